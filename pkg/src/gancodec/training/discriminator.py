"""Multi-scale PatchGAN discriminator."""
from dataclasses import dataclass

import torch
from torch import nn

from ..errors import ConfigurationError


@dataclass(frozen=True)
class DiscriminatorSpec:
    """``scales`` PatchGAN stacks of ``n_strided`` stride-2 4x4 convolutions.

    Each stack ends with a stride-1 logit convolution; every post-activation
    layer before it is tapped for feature matching, so ``M = n_strided``.
    """

    scales: int = 3
    n_strided: int = 3
    base_channels: int = 64
    max_channels: int = 512
    channels: int = 3

    def __post_init__(self):
        if self.scales < 1:
            raise ConfigurationError("need at least one discriminator scale")
        if self.n_strided < 1:
            raise ConfigurationError("need at least one strided layer")

    @property
    def taps(self):
        return self.n_strided

    @property
    def receptive_field(self):
        """Patch size ``v`` seen by one logit at the finest scale."""
        rf, jump = 1, 1
        for stride in [2] * self.n_strided + [1]:
            rf += (4 - 1) * jump
            jump *= stride
        return rf

    @classmethod
    def tiny(cls, **kw):
        kw.setdefault("base_channels", 16)
        kw.setdefault("max_channels", 64)
        return cls(**kw)

    def patch_grid(self, H, W):
        """Logit-grid shape of every scale for an ``H x W`` input."""
        out = []
        for _ in range(self.scales):
            h, w = H, W
            for _ in range(self.n_strided):
                h, w = h // 2, w // 2
            out.append((h - 1, w - 1))
            H, W = (H - 1) // 2 + 1, (W - 1) // 2 + 1
        return out

    def patch_count(self, H, W):
        """Total number of patch decisions over all scales."""
        return sum(h * w for h, w in self.patch_grid(H, W))


class PatchStack(nn.Module):
    def __init__(self, spec):
        super().__init__()
        layers = []
        cin = spec.channels
        for i in range(spec.n_strided):
            cout = min(spec.base_channels * 2 ** i, spec.max_channels)
            block = [nn.Conv2d(cin, cout, 4, stride=2, padding=1)]
            if i > 0:
                block.append(nn.InstanceNorm2d(cout, affine=True))
            block.append(nn.LeakyReLU(0.2))
            layers.append(nn.Sequential(*block))
            cin = cout
        self.features = nn.ModuleList(layers)
        self.logits = nn.Conv2d(cin, 1, 4, stride=1, padding=1)

    def forward(self, x):
        taps = []
        for layer in self.features:
            x = layer(x)
            taps.append(x)
        return self.logits(x), taps


class MultiScaleDiscriminator(nn.Module):
    def __init__(self, spec):
        super().__init__()
        self.spec = spec
        self.stacks = nn.ModuleList([PatchStack(spec) for _ in range(spec.scales)])
        self.down = nn.AvgPool2d(3, stride=2, padding=1, count_include_pad=False)

    def forward(self, x):
        """Returns ``(logits, features)``: a list of logit grids, one per scale,
        and a list (per scale) of tapped feature maps."""
        H, W = x.shape[-2:]
        v = self.spec.receptive_field
        if min(H, W) < v:
            raise ConfigurationError(f"input {H}x{W} is smaller than the {v}x{v} patch receptive field")
        logits, feats = [], []
        for i, stack in enumerate(self.stacks):
            if i:
                x = self.down(x)
            if min(x.shape[-2:]) < 2 ** self.spec.n_strided * 2:
                raise ConfigurationError(
                    f"scale {i + 1} input {tuple(x.shape[-2:])} too small for {self.spec.n_strided} strided layers"
                )
            lg, ft = stack(x)
            logits.append(lg)
            feats.append(ft)
        return logits, feats


def build_discriminator(spec):
    return MultiScaleDiscriminator(spec)
