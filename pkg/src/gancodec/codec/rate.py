"""Fixed-length rate accounting for the quantised bottleneck."""
import math

from ..errors import ShapeError


def bits_per_element(L):
    return math.log2(L)


def latent_information_bits(H, W, F, L, d):
    """Bits needed to transmit a ``H/d x W/d x F`` code with ``L`` levels.

    Fractional when ``L`` is not a power of two.
    """
    if H % d or W % d:
        raise ShapeError(f"image {H}x{W} is not divisible by d={d}")
    bits = (H // d) * (W // d) * F * bits_per_element(L)
    return int(bits) if float(bits).is_integer() else bits


def bitrate_bpp(F, L, d):
    """Bits per original pixel; independent of image size."""
    return F * bits_per_element(L) / (d * d)
