"""Least-squares GAN, feature-matching and pixel losses.

All functions take torch tensors and return scalar tensors so they can sit
inside the training graph. Logits and features come in per-scale lists as
produced by :class:`~gancodec.training.discriminator.MultiScaleDiscriminator`.
"""
import math
from dataclasses import dataclass

import torch

from ..errors import NumericError, ShapeError


@dataclass(frozen=True)
class LossWeights:
    w_gan: float = 1.0
    w_fm: float = 1.0
    w_sim: float = 1.0

    def __post_init__(self):
        for name in ("w_gan", "w_fm", "w_sim"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")


def _as_list(x):
    return list(x) if isinstance(x, (list, tuple)) else [x]


def gan_loss_discriminator(real_logits, fake_logits):
    """0.5*mean((D(x)-1)^2) + 0.5*mean(D(x_hat)^2), averaged over scales."""
    real, fake = _as_list(real_logits), _as_list(fake_logits)
    if len(real) != len(fake):
        raise ShapeError(f"{len(real)} real scales vs {len(fake)} fake scales")
    terms = []
    for r, f in zip(real, fake):
        if r.shape[1:] != f.shape[1:]:
            raise ShapeError(f"logit grid mismatch {tuple(r.shape)} vs {tuple(f.shape)}")
        terms.append(0.5 * ((r - 1) ** 2).mean() + 0.5 * (f ** 2).mean())
    return torch.stack(terms).mean()


def gan_loss_generator(fake_logits):
    """0.5*mean((D(x_hat)-1)^2), averaged over scales."""
    return torch.stack([0.5 * ((f - 1) ** 2).mean() for f in _as_list(fake_logits)]).mean()


def feature_matching_loss(real_features, fake_features):
    """Mean absolute difference per tapped map, averaged over maps and scales.

    Accepts a flat list of maps or a per-scale list of lists.
    """
    def flatten(feats):
        out = []
        for f in feats:
            out.extend(flatten(f) if isinstance(f, (list, tuple)) else [f])
        return out

    real, fake = flatten(_as_list(real_features)), flatten(_as_list(fake_features))
    if len(real) != len(fake) or not real:
        raise ShapeError(f"{len(real)} real maps vs {len(fake)} fake maps")
    terms = []
    for r, f in zip(real, fake):
        if r.shape != f.shape:
            raise ShapeError(f"feature map mismatch {tuple(r.shape)} vs {tuple(f.shape)}")
        terms.append((r - f).abs().mean())
    return torch.stack(terms).mean()


def similarity_loss(x, x_hat):
    """Pixel MSE over all H*W*C values."""
    if x.shape != x_hat.shape:
        raise ShapeError(f"image mismatch {tuple(x.shape)} vs {tuple(x_hat.shape)}")
    return ((x - x_hat) ** 2).mean()


def generator_total_loss(parts, weights=LossWeights()):
    """Weighted sum of ``(gan, fm, sim)``; unit weights give the plain sum.

    ``parts`` may hold floats or scalar tensors; a non-finite part raises
    :class:`NumericError` naming it.
    """
    gan, fm, sim = parts
    for name, value in (("gan", gan), ("fm", fm), ("sim", sim)):
        v = float(value.detach()) if torch.is_tensor(value) else float(value)
        if not math.isfinite(v):
            raise NumericError(f"non-finite {name} loss: {v}")
    return weights.w_gan * gan + weights.w_fm * fm + weights.w_sim * sim
