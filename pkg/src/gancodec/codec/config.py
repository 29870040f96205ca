from dataclasses import asdict, dataclass, field

from ..errors import ConfigurationError


def downsampling_factor(s, n):
    """Overall spatial reduction ``d = s**n`` of ``n`` layers with stride ``s``."""
    if s < 1 or n < 0:
        raise ConfigurationError(f"need s >= 1 and n >= 0, got s={s}, n={n}")
    return int(s) ** int(n)


FULL_ENCODER_CHANNELS = (64, 128, 256, 512, 512)
FULL_DECODER_CHANNELS = (512, 256, 128, 64, 32)
TINY_ENCODER_CHANNELS = (16, 32, 64, 128, 128)
TINY_DECODER_CHANNELS = (128, 64, 32, 16, 8)


@dataclass(frozen=True)
class CodecConfig:
    """Generator hyper-parameters.

    ``encoder_channels`` lists the widths of the first five encoder blocks;
    the sixth block always emits ``F`` maps, so the full schedule is
    ``(*encoder_channels, F)``. ``decoder_channels`` holds the residual-unit
    width followed by one width per upsampling stage.
    """

    F: int = 8
    L: int = 4
    s: int = 2
    n: int = 4
    channels: int = 3
    encoder_channels: tuple = FULL_ENCODER_CHANNELS
    decoder_channels: tuple = FULL_DECODER_CHANNELS
    residual_units: int = 9
    bottleneck_norm: bool = False

    def __post_init__(self):
        object.__setattr__(self, "encoder_channels", tuple(int(c) for c in self.encoder_channels))
        object.__setattr__(self, "decoder_channels", tuple(int(c) for c in self.decoder_channels))
        if self.F < 1:
            raise ConfigurationError(f"F must be >= 1, got {self.F}")
        if self.L < 2:
            raise ConfigurationError(f"L must be >= 2, got {self.L}")
        if self.residual_units < 0:
            raise ConfigurationError("residual_units must be >= 0")
        if len(self.decoder_channels) != self.n + 1:
            raise ConfigurationError(
                f"decoder schedule needs n+1={self.n + 1} widths, got {len(self.decoder_channels)}"
            )
        downsampling_factor(self.s, self.n)

    @property
    def d(self):
        return downsampling_factor(self.s, self.n)

    @property
    def encoder_schedule(self):
        return self.encoder_channels + (self.F,)

    @classmethod
    def tiny(cls, F=8, L=4, **kw):
        """Desk-scale widths for CPU experiments."""
        return cls(F=F, L=L, encoder_channels=TINY_ENCODER_CHANNELS,
                   decoder_channels=TINY_DECODER_CHANNELS, **kw)

    def to_dict(self):
        out = asdict(self)
        out["encoder_channels"] = list(self.encoder_channels)
        out["decoder_channels"] = list(self.decoder_channels)
        return out

    @classmethod
    def from_dict(cls, data):
        return cls(**data)
