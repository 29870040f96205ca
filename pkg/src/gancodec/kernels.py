"""Hot numeric kernels.

Every kernel exists twice: a numba-compiled loop (``*_nb``) and a vectorised
numpy equivalent (``*_np``). The un-suffixed public names dispatch to the
numba version unless numba is missing or disabled through
``GANCODEC_DISABLE_NUMBA``. Integer kernels agree bit-for-bit across the two
paths; the filter kernel agrees to rounding (summation order differs).
``benchmarks/bench_kernels.py`` times both.
"""
import numpy as np

from ._accel import HAVE_NUMBA, njit

# ---------------------------------------------------------------------------
# nearest reconstruction level (ties -> lower index)


def nearest_level_np(values, midpoints):
    return np.searchsorted(midpoints, values, side="left").astype(np.int64)


@njit
def nearest_level_nb(values, midpoints):
    n = values.shape[0]
    m = midpoints.shape[0]
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        v = values[i]
        lo = 0
        hi = m
        # first midpoint >= v
        while lo < hi:
            mid = (lo + hi) >> 1
            if midpoints[mid] < v:
                lo = mid + 1
            else:
                hi = mid
        out[i] = lo
    return out


# ---------------------------------------------------------------------------
# fixed-width MSB-first bit packing


def pack_indices_np(indices, bits):
    idx = indices.astype(np.uint64)
    shifts = np.arange(bits - 1, -1, -1, dtype=np.uint64)
    bitmat = ((idx[:, None] >> shifts[None, :]) & np.uint64(1)).astype(np.uint8)
    return np.packbits(bitmat.ravel())


@njit
def pack_indices_nb(indices, bits):
    n = indices.shape[0]
    total = n * bits
    out = np.zeros((total + 7) // 8, dtype=np.uint8)
    pos = 0
    for i in range(n):
        v = indices[i]
        for b in range(bits - 1, -1, -1):
            if (v >> b) & 1:
                out[pos >> 3] |= np.uint8(0x80 >> (pos & 7))
            pos += 1
    return out


def unpack_indices_np(payload, bits, count):
    flat = np.unpackbits(payload)[: count * bits].reshape(count, bits).astype(np.int64)
    weights = (1 << np.arange(bits - 1, -1, -1, dtype=np.int64))
    return flat @ weights


@njit
def unpack_indices_nb(payload, bits, count):
    out = np.zeros(count, dtype=np.int64)
    pos = 0
    for i in range(count):
        v = 0
        for _ in range(bits):
            bit = (payload[pos >> 3] >> (7 - (pos & 7))) & 1
            v = (v << 1) | bit
            pos += 1
        out[i] = v
    return out


# ---------------------------------------------------------------------------
# confusion matrix accumulation (rows = ground truth, cols = prediction)


def confusion_np(gt, pred, num_classes, ignore_label):
    keep = gt != ignore_label
    g = gt[keep].astype(np.int64)
    p = pred[keep].astype(np.int64)
    flat = np.bincount(g * num_classes + p, minlength=num_classes * num_classes)
    return flat.reshape(num_classes, num_classes)


@njit
def confusion_nb(gt, pred, num_classes, ignore_label):
    cm = np.zeros((num_classes, num_classes), dtype=np.int64)
    for i in range(gt.shape[0]):
        g = gt[i]
        if g == ignore_label:
            continue
        cm[g, pred[i]] += 1
    return cm


# ---------------------------------------------------------------------------
# separable 'valid' correlation of a 2-D plane with a 1-D kernel on both axes


def filter_valid_np(plane, kernel):
    k = kernel.shape[0]
    rows = np.lib.stride_tricks.sliding_window_view(plane, k, axis=0) @ kernel
    return np.lib.stride_tricks.sliding_window_view(rows, k, axis=1) @ kernel


@njit
def filter_valid_nb(plane, kernel):
    h, w = plane.shape
    k = kernel.shape[0]
    ho = h - k + 1
    wo = w - k + 1
    tmp = np.zeros((ho, w))
    for i in range(ho):
        for j in range(w):
            acc = 0.0
            for t in range(k):
                acc += plane[i + t, j] * kernel[t]
            tmp[i, j] = acc
    out = np.zeros((ho, wo))
    for i in range(ho):
        for j in range(wo):
            acc = 0.0
            for t in range(k):
                acc += tmp[i, j + t] * kernel[t]
            out[i, j] = acc
    return out


if HAVE_NUMBA:
    nearest_level = nearest_level_nb
    pack_indices = pack_indices_nb
    unpack_indices = unpack_indices_nb
    confusion = confusion_nb
    filter_valid = filter_valid_nb
else:
    nearest_level = nearest_level_np
    pack_indices = pack_indices_np
    unpack_indices = unpack_indices_np
    confusion = confusion_np
    filter_valid = filter_valid_np

BACKEND = "numba" if HAVE_NUMBA else "numpy"
