"""Scalar quantisation of the bottleneck.

The hard quantiser maps each latent element to its nearest reconstruction
level. For training, a softmax over negative absolute distances gives a
smooth surrogate

    r_hat = sum_j c_j * exp(-|c_j - r|) / sum_k exp(-|c_k - r|)

whose derivative is used in place of the (almost everywhere zero) derivative
of the hard quantiser.
"""
from dataclasses import dataclass

import numpy as np
import torch

from .. import kernels
from ..errors import ConfigurationError, FormatError

MODES = ("hard", "soft", "straight-through")


@dataclass(frozen=True, eq=False)
class QuantizerSpec:
    levels: np.ndarray
    mode: str = "straight-through"

    def __post_init__(self):
        levels = np.asarray(self.levels, dtype=np.float64).ravel()
        if levels.size < 2:
            raise ConfigurationError("a quantiser needs at least two levels")
        if np.any(np.diff(levels) <= 0):
            raise ConfigurationError("levels must be strictly increasing")
        if levels[0] < -1 or levels[-1] > 1:
            raise ConfigurationError("levels must lie in [-1, 1]")
        if self.mode not in MODES:
            raise ConfigurationError(f"unknown quantiser mode {self.mode!r}; expected one of {MODES}")
        levels.setflags(write=False)
        object.__setattr__(self, "levels", levels)

    @classmethod
    def uniform(cls, L, mode="straight-through"):
        """``L`` equally spaced levels covering [-1, 1]."""
        return cls(np.linspace(-1.0, 1.0, int(L)), mode)

    @property
    def L(self):
        return self.levels.size

    @property
    def midpoints(self):
        return 0.5 * (self.levels[1:] + self.levels[:-1])

    def with_mode(self, mode):
        return QuantizerSpec(self.levels, mode)

    def __eq__(self, other):
        return (isinstance(other, QuantizerSpec) and self.mode == other.mode
                and np.array_equal(self.levels, other.levels))

    def __hash__(self):
        return hash((self.mode, self.levels.tobytes()))


@dataclass(frozen=True, eq=False)
class LatentCode:
    """Level indices of a quantised bottleneck, laid out (height, width, F)."""

    indices: np.ndarray
    L: int

    def __post_init__(self):
        idx = np.asarray(self.indices)
        if idx.ndim != 3:
            raise FormatError(f"latent code must be 3-D (h, w, F), got shape {idx.shape}")
        object.__setattr__(self, "indices", idx.astype(np.int64, copy=False))

    @property
    def shape(self):
        return self.indices.shape

    def __eq__(self, other):
        return (isinstance(other, LatentCode) and self.L == other.L
                and np.array_equal(self.indices, other.indices))


def _softmax_weights(r, levels):
    e = np.abs(levels - r[..., None])
    # shift by the row minimum so the largest exponent is exp(0)
    w = np.exp(-(e - e.min(axis=-1, keepdims=True)))
    return w / w.sum(axis=-1, keepdims=True)


def quantize_soft(r, q):
    """Smooth quantiser output; scalar in, scalar out, arrays element-wise."""
    arr = np.asarray(r, dtype=np.float64)
    p = _softmax_weights(arr, q.levels)
    out = p @ q.levels
    return float(out) if np.ndim(r) == 0 else out


def quantize_soft_grad(r, q):
    """Analytic derivative of :func:`quantize_soft` with respect to ``r``.

    With p the softmax weights and s_j = sign(r - c_j) (sign(0) = 0),
    d r_hat / dr = -sum_j p_j s_j (c_j - r_hat). Non-differentiable only at
    ``r == c_j``.
    """
    arr = np.asarray(r, dtype=np.float64)
    p = _softmax_weights(arr, q.levels)
    r_hat = p @ q.levels
    s = np.sign(arr[..., None] - q.levels)
    g = -np.sum(p * s * (q.levels - r_hat[..., None]), axis=-1)
    return float(g) if np.ndim(r) == 0 else g


def quantize_hard(latent, q):
    """Nearest-level indices; an exact midpoint goes to the lower index."""
    arr = np.asarray(latent, dtype=np.float64)
    if arr.ndim != 3:
        raise FormatError(f"latent must be (h, w, F), got shape {arr.shape}")
    flat = np.ascontiguousarray(arr.ravel())
    idx = kernels.nearest_level(flat, np.ascontiguousarray(q.midpoints))
    return LatentCode(idx.reshape(arr.shape), q.L)


def dequantize(code, q):
    if code.L != q.L:
        raise FormatError(f"code has L={code.L} but quantiser has L={q.L}")
    idx = code.indices
    if idx.size and (idx.min() < 0 or idx.max() >= q.L):
        raise FormatError(f"level index out of range [0, {q.L})")
    return q.levels[idx]


# ---------------------------------------------------------------------------
# torch paths used inside the training graph


def soft_quantize_torch(r, levels):
    e = torch.abs(r.unsqueeze(-1) - levels)
    p = torch.softmax(-e, dim=-1)
    return (p * levels).sum(dim=-1)


def hard_quantize_torch(r, levels):
    mids = 0.5 * (levels[1:] + levels[:-1])
    idx = torch.bucketize(r.contiguous(), mids.contiguous(), right=False)
    return levels[idx]


def quantize_training(latent, q, mode=None):
    """Quantiser used between encoder and decoder during training.

    ``soft`` forwards the smooth surrogate. ``straight-through`` forwards the
    hard level but back-propagates the surrogate's gradient. ``hard``
    forwards the hard level with zero gradient.
    """
    mode = mode or q.mode
    levels = torch.tensor(q.levels, dtype=latent.dtype, device=latent.device)
    if mode == "soft":
        return soft_quantize_torch(latent, levels)
    if mode == "straight-through":
        soft = soft_quantize_torch(latent, levels)
        hard = hard_quantize_torch(latent.detach(), levels)
        return soft + (hard - soft).detach()
    if mode == "hard":
        return hard_quantize_torch(latent.detach(), levels)
    raise ConfigurationError(f"unknown quantiser mode {mode!r}")
