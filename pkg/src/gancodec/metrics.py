"""Distortion metrics (PSNR, SSIM, MS-SSIM) and segmentation mIoU.

Distortion metrics work on 8-bit rasters (dynamic range 255). Colour images
are scored per channel and the channel scores averaged.
"""
import math
from dataclasses import asdict, dataclass

import numpy as np

from . import kernels
from .errors import ShapeError, UndefinedMetricError

DATA_RANGE = 255.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
MS_SSIM_WEIGHTS = (0.0448, 0.2856, 0.3001, 0.2363, 0.1333)


def _pair(x, y):
    a = np.asarray(x, dtype=np.float64)
    b = np.asarray(y, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch {a.shape} vs {b.shape}")
    if a.ndim == 2:
        a, b = a[..., None], b[..., None]
    if a.ndim != 3:
        raise ShapeError(f"expected (H, W) or (H, W, C) images, got {a.shape}")
    return a, b


def psnr(x, y, data_range=DATA_RANGE):
    """10*log10(range^2 / MSE) in dB; ``inf`` for identical inputs."""
    a, b = _pair(x, y)
    mse = np.mean((a - b) ** 2)
    if mse == 0:
        return math.inf
    return 10.0 * math.log10(data_range ** 2 / mse)


def gaussian_window(size=SSIM_WINDOW, sigma=SSIM_SIGMA):
    """Normalised 1-D Gaussian; its outer product is the 2-D SSIM window."""
    t = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(t ** 2) / (2.0 * sigma ** 2))
    return g / g.sum()


def _ssim_maps(a, b, window, data_range, k1, k2):
    """Per-window SSIM and contrast-structure maps of two 2-D planes."""
    c1 = (k1 * data_range) ** 2
    c2 = (k2 * data_range) ** 2
    f = kernels.filter_valid
    a = np.ascontiguousarray(a)
    b = np.ascontiguousarray(b)
    mu_a, mu_b = f(a, window), f(b, window)
    var_a = f(a * a, window) - mu_a ** 2
    var_b = f(b * b, window) - mu_b ** 2
    cov = f(a * b, window) - mu_a * mu_b
    cs = (2.0 * cov + c2) / (var_a + var_b + c2)
    lum = (2.0 * mu_a * mu_b + c1) / (mu_a ** 2 + mu_b ** 2 + c1)
    return lum * cs, cs


def _check_window(shape, win):
    if shape[0] < win or shape[1] < win:
        raise ShapeError(f"image {shape[0]}x{shape[1]} is smaller than the {win}x{win} SSIM window")


def ssim(x, y, data_range=DATA_RANGE, win_size=SSIM_WINDOW, sigma=SSIM_SIGMA, k1=SSIM_K1, k2=SSIM_K2):
    """Mean SSIM over all fully-contained Gaussian windows, averaged over channels."""
    a, b = _pair(x, y)
    _check_window(a.shape, win_size)
    w = gaussian_window(win_size, sigma)
    vals = [_ssim_maps(a[..., c], b[..., c], w, data_range, k1, k2)[0].mean() for c in range(a.shape[2])]
    return float(np.mean(vals))


def downsample2(plane):
    """2x2 box average then keep every second sample; odd edges are mirrored."""
    h, w = plane.shape
    p = np.pad(plane, ((0, h % 2), (0, w % 2)), mode="symmetric")
    return 0.25 * (p[0::2, 0::2] + p[1::2, 0::2] + p[0::2, 1::2] + p[1::2, 1::2])


def ms_ssim_min_size(scales=len(MS_SSIM_WEIGHTS), win_size=SSIM_WINDOW):
    """Smallest side length that still fits the window at the coarsest scale."""
    return win_size * 2 ** (scales - 1) - (2 ** (scales - 1) - 1)


def ms_ssim_weights(scales):
    if scales == len(MS_SSIM_WEIGHTS):
        return MS_SSIM_WEIGHTS
    if not 1 <= scales <= len(MS_SSIM_WEIGHTS):
        raise ValueError(f"scales must be in [1, {len(MS_SSIM_WEIGHTS)}]")
    w = np.asarray(MS_SSIM_WEIGHTS[:scales])
    return tuple(w / w.sum())


def ms_ssim(x, y, data_range=DATA_RANGE, weights=None, scales=None,
            win_size=SSIM_WINDOW, sigma=SSIM_SIGMA, k1=SSIM_K1, k2=SSIM_K2):
    """Multi-scale SSIM.

    Contrast-structure terms of scales 1..M-1 and the full SSIM of scale M
    are raised to ``weights`` and multiplied. Negative terms are clipped to 0
    before exponentiation so the result stays in [0, 1]. With ``scales`` < 5
    and no explicit ``weights``, the leading standard weights are
    renormalised to sum to one.
    """
    if weights is None:
        weights = ms_ssim_weights(scales or len(MS_SSIM_WEIGHTS))
    weights = tuple(float(v) for v in weights)
    m = len(weights)
    a, b = _pair(x, y)
    need = ms_ssim_min_size(m, win_size)
    if min(a.shape[:2]) < need:
        raise ShapeError(
            f"image {a.shape[0]}x{a.shape[1]} too small for {m}-scale MS-SSIM; "
            f"minimum side is {need} pixels"
        )
    w = gaussian_window(win_size, sigma)
    out = []
    for c in range(a.shape[2]):
        pa, pb = a[..., c], b[..., c]
        value = 1.0
        for j in range(m):
            s_map, cs_map = _ssim_maps(pa, pb, w, data_range, k1, k2)
            term = s_map.mean() if j == m - 1 else cs_map.mean()
            value *= max(term, 0.0) ** weights[j]
            if j < m - 1:
                pa, pb = downsample2(pa), downsample2(pb)
        out.append(value)
    return float(np.mean(out))


# ---------------------------------------------------------------------------
# segmentation


class ConfusionMatrix:
    """K x K pixel counts; rows are ground truth, columns predictions."""

    def __init__(self, num_classes, counts=None):
        self.num_classes = int(num_classes)
        if counts is None:
            counts = np.zeros((self.num_classes, self.num_classes), dtype=np.int64)
        counts = np.asarray(counts, dtype=np.int64)
        if counts.shape != (self.num_classes, self.num_classes) or (counts < 0).any():
            raise ShapeError("confusion counts must be a non-negative K x K matrix")
        self.counts = counts

    @property
    def total(self):
        return int(self.counts.sum())

    def __add__(self, other):
        if other.num_classes != self.num_classes:
            raise ShapeError("cannot merge matrices with different class counts")
        return ConfusionMatrix(self.num_classes, self.counts + other.counts)

    def __eq__(self, other):
        return isinstance(other, ConfusionMatrix) and np.array_equal(self.counts, other.counts)

    def __repr__(self):
        return f"ConfusionMatrix(K={self.num_classes}, total={self.total})"


def confusion_accumulate(pred, gt, cm, ignore_label=255):
    """New matrix equal to ``cm`` plus the counts of one prediction/label pair."""
    p = np.asarray(pred)
    g = np.asarray(gt)
    if p.shape != g.shape:
        raise ShapeError(f"prediction {p.shape} and ground truth {g.shape} differ")
    K = cm.num_classes
    g = np.ascontiguousarray(g.ravel().astype(np.int64))
    p = np.ascontiguousarray(p.ravel().astype(np.int64))
    scored = g != ignore_label
    if scored.any():
        if g[scored].min() < 0 or g[scored].max() >= K:
            raise ShapeError(f"ground-truth class id outside [0, {K})")
        if p[scored].min() < 0 or p[scored].max() >= K:
            raise ShapeError(f"predicted class id outside [0, {K})")
    return cm + ConfusionMatrix(K, kernels.confusion(g, p, K, ignore_label))


def class_iou(cm):
    """Per-class IoU with NaN for classes absent from both maps."""
    c = cm.counts.astype(np.float64)
    tp = np.diag(c)
    union = c.sum(axis=0) + c.sum(axis=1) - tp
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(union > 0, tp / union, np.nan)


def miou(cm):
    iou = class_iou(cm)
    present = ~np.isnan(iou)
    if not present.any():
        raise UndefinedMetricError("mIoU undefined: no class occurs in ground truth or prediction")
    return float(iou[present].mean())


@dataclass
class RatePoint:
    method: str
    F: int
    L: int
    mode: str
    bpp: float
    psnr_db: float
    ssim: float
    ms_ssim: float
    miou: float
    seg_model: str
    seed: int
    config_hash: str

    def __post_init__(self):
        if not self.bpp > 0:
            raise ValueError(f"bpp must be positive, got {self.bpp}")
        for name in ("ssim", "ms_ssim", "miou"):
            v = getattr(self, name)
            if v is not None and not (math.isnan(v) or -1.0 <= v <= 1.0):
                raise ValueError(f"{name} out of range: {v}")

    def to_dict(self):
        return asdict(self)
