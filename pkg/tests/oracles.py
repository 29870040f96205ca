"""Slow, direct reference implementations used only by the tests."""
import math

import numpy as np

C1 = (0.01 * 255) ** 2
C2 = (0.03 * 255) ** 2


def gaussian2d(size=11, sigma=1.5):
    half = (size - 1) / 2
    g = np.array([[math.exp(-((i - half) ** 2 + (j - half) ** 2) / (2 * sigma ** 2)) for j in range(size)]
                  for i in range(size)])
    return g / g.sum()


def window_terms(a, b, size=11):
    """Per-window (ssim, cs) from explicit weighted statistics of each patch."""
    w = gaussian2d(size)
    H, W = a.shape
    s_vals, cs_vals = [], []
    for i in range(H - size + 1):
        for j in range(W - size + 1):
            pa, pb = a[i:i + size, j:j + size], b[i:i + size, j:j + size]
            ma, mb = (w * pa).sum(), (w * pb).sum()
            va = (w * (pa - ma) ** 2).sum()
            vb = (w * (pb - mb) ** 2).sum()
            cov = (w * (pa - ma) * (pb - mb)).sum()
            cs = (2 * cov + C2) / (va + vb + C2)
            lum = (2 * ma * mb + C1) / (ma ** 2 + mb ** 2 + C1)
            s_vals.append(lum * cs)
            cs_vals.append(cs)
    return float(np.mean(s_vals)), float(np.mean(cs_vals))


def ssim_oracle(x, y):
    x, y = np.asarray(x, float), np.asarray(y, float)
    return float(np.mean([window_terms(x[..., c], y[..., c])[0] for c in range(x.shape[2])]))


def halve(plane):
    """2x2 mean, mirroring the last row/column when the side is odd."""
    H, W = plane.shape
    out = np.empty(((H + 1) // 2, (W + 1) // 2))
    for i in range(out.shape[0]):
        for j in range(out.shape[1]):
            rows = [min(2 * i, H - 1), min(2 * i + 1, H - 1)]
            cols = [min(2 * j, W - 1), min(2 * j + 1, W - 1)]
            out[i, j] = sum(plane[r, c] for r in rows for c in cols) / 4
    return out


def ms_ssim_oracle(x, y, weights):
    x, y = np.asarray(x, float), np.asarray(y, float)
    vals = []
    for c in range(x.shape[2]):
        a, b = x[..., c], y[..., c]
        v = 1.0
        for j, wj in enumerate(weights):
            s, cs = window_terms(a, b)
            term = s if j == len(weights) - 1 else cs
            v *= max(term, 0.0) ** wj
            a, b = halve(a), halve(b)
        vals.append(v)
    return float(np.mean(vals))


def miou_oracle(gt, pred, K, ignore=255):
    gt, pred = np.asarray(gt), np.asarray(pred)
    coords = [(i, j) for i in range(gt.shape[0]) for j in range(gt.shape[1]) if gt[i, j] != ignore]
    ious = []
    for k in range(K):
        g = {p for p in coords if gt[p] == k}
        q = {p for p in coords if pred[p] == k}
        union = g | q
        if union:
            ious.append(len(g & q) / len(union))
    return sum(ious) / len(ious)
