"""Encoder / decoder networks of the generator."""
import numpy as np
import torch
from torch import nn

from ..errors import ConfigurationError, NumericError, ShapeError
from .quantizer import quantize_training

IN_EPS = 1e-5


def _norm(ch):
    return nn.InstanceNorm2d(ch, eps=IN_EPS, affine=True)


class ConvBlock(nn.Sequential):
    def __init__(self, cin, cout, kernel, stride=1, relu=True, norm=True):
        layers = [
            nn.ReflectionPad2d(kernel // 2),
            nn.Conv2d(cin, cout, kernel, stride=stride),
        ]
        if norm:
            layers.append(_norm(cout))
        if relu:
            layers.append(nn.ReLU(inplace=True))
        super().__init__(*layers)


class ResidualUnit(nn.Module):
    def __init__(self, ch):
        super().__init__()
        self.body = nn.Sequential(
            ConvBlock(ch, ch, 3),
            ConvBlock(ch, ch, 3, relu=False),
        )

    def forward(self, x):
        return x + self.body(x)


class Encoder(nn.Module):
    """Six conv blocks; blocks 2..(n+1) downsample by ``s``.

    The last block has no rectifier, which would leave the negative half of
    a symmetric level set unused; its instance norm is optional
    (``config.bottleneck_norm``).
    """

    def __init__(self, config):
        super().__init__()
        sched = config.encoder_schedule
        if len(sched) != 6:
            raise ConfigurationError(f"encoder schedule needs 6 widths, got {len(sched)}: {sched}")
        if sched[-1] != config.F:
            raise ConfigurationError("last encoder width must equal F")
        if config.n > 4:
            raise ConfigurationError(f"six-block encoder supports at most 4 strided blocks, got n={config.n}")
        self.config = config
        blocks = [ConvBlock(config.channels, sched[0], 7)]
        for i in range(1, 5):
            stride = config.s if i <= config.n else 1
            blocks.append(ConvBlock(sched[i - 1], sched[i], 3, stride=stride))
        blocks.append(ConvBlock(sched[4], sched[5], 3, relu=False, norm=config.bottleneck_norm))
        self.blocks = nn.ModuleList(blocks)

    def forward(self, x, check_finite=False):
        for i, block in enumerate(self.blocks):
            x = block(x)
            if check_finite and not torch.isfinite(x).all():
                raise NumericError(f"non-finite activation after encoder block {i + 1}")
        return x


class Decoder(nn.Module):
    """Residual units followed by ``n`` transposed convolutions, tanh output."""

    def __init__(self, config):
        super().__init__()
        widths = config.decoder_channels
        if len(widths) != config.n + 1:
            raise ConfigurationError(f"decoder schedule needs {config.n + 1} widths, got {len(widths)}")
        self.config = config
        s = config.s
        self.head = ConvBlock(config.F, widths[0], 3)
        self.residual = nn.Sequential(*[ResidualUnit(widths[0]) for _ in range(config.residual_units)])
        ups = []
        for cin, cout in zip(widths[:-1], widths[1:]):
            ups += [
                nn.ConvTranspose2d(cin, cout, 3, stride=s, padding=1, output_padding=s - 1),
                _norm(cout),
                nn.ReLU(inplace=True),
            ]
        self.upsample = nn.Sequential(*ups)
        self.tail = nn.Sequential(
            nn.ReflectionPad2d(3),
            nn.Conv2d(widths[-1], config.channels, 7),
            nn.Tanh(),
        )

    def forward(self, z):
        return self.tail(self.upsample(self.residual(self.head(z))))


class Generator(nn.Module):
    """Encoder, quantiser and decoder chained for training.

    ``quant_mode=None`` bypasses quantisation entirely (the
    train-without-quantisation baseline).
    """

    def __init__(self, config, quantizer):
        super().__init__()
        self.config = config
        self.quantizer = quantizer
        self.encoder = Encoder(config)
        self.decoder = Decoder(config)

    def forward(self, x, quant_mode="default"):
        z = self.encoder(x)
        if quant_mode == "default":
            quant_mode = self.quantizer.mode
        if quant_mode is not None:
            z = quantize_training(z, self.quantizer, quant_mode)
        return self.decoder(z)


def build_encoder(config):
    return Encoder(config)


def build_decoder(config):
    return Decoder(config)


# ---------------------------------------------------------------------------
# numpy-level inference (H, W, C) <-> (h, w, F)


def _check_divisible(H, W, d):
    if H % d or W % d:
        raise ShapeError(f"image {H}x{W} is not divisible by d={d}")


def _param_dtype(net):
    return next(net.parameters()).dtype


@torch.no_grad()
def encode(image, enc):
    """Real-valued latent ``(H/d, W/d, F)`` for an ``(H, W, C)`` image in [-1, 1]."""
    img = np.asarray(image)
    if img.ndim != 3:
        raise ShapeError(f"expected (H, W, C) image, got shape {img.shape}")
    _check_divisible(img.shape[0], img.shape[1], enc.config.d)
    was_training = enc.training
    enc.eval()
    try:
        x = torch.as_tensor(img, dtype=_param_dtype(enc)).permute(2, 0, 1).unsqueeze(0)
        z = enc(x, check_finite=True)
    finally:
        enc.train(was_training)
    return z[0].permute(1, 2, 0).double().numpy()


@torch.no_grad()
def decode(latent, dec):
    """Image ``(h*d, w*d, C)`` in [-1, 1] from a real-valued latent."""
    z = np.asarray(latent)
    if z.ndim != 3 or z.shape[2] != dec.config.F:
        raise ShapeError(f"expected (h, w, {dec.config.F}) latent, got shape {z.shape}")
    was_training = dec.training
    dec.eval()
    try:
        t = torch.as_tensor(z, dtype=_param_dtype(dec)).permute(2, 0, 1).unsqueeze(0)
        out = dec(t)
    finally:
        dec.train(was_training)
    if not torch.isfinite(out).all():
        raise NumericError("non-finite decoder output")
    return out[0].permute(1, 2, 0).double().numpy()
