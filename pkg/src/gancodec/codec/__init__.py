"""Generator, quantiser, rate accounting and bitstream of the learned codec."""
from .bitstream import Bitstream, deserialize_bitstream, serialize_bitstream
from .config import CodecConfig, downsampling_factor
from .networks import Decoder, Encoder, Generator, build_decoder, build_encoder, decode, encode
from .pixels import check_image, to_uint8, to_unit
from .quantizer import (
    LatentCode,
    QuantizerSpec,
    dequantize,
    quantize_hard,
    quantize_soft,
    quantize_soft_grad,
    quantize_training,
)
from .rate import bitrate_bpp, latent_information_bits


def compress(image, generator):
    """Encode, hard-quantise and serialise an (H, W, C) image in [-1, 1]."""
    q = generator.quantizer
    code = quantize_hard(encode(check_image(image), generator.encoder), q)
    return serialize_bitstream(code, q, generator.config.d)


def decompress(data, generator):
    """Inverse of :func:`compress`; returns an (H, W, C) image in [-1, 1]."""
    q = generator.quantizer
    code = deserialize_bitstream(data, generator.config.d)
    return decode(dequantize(code, q), generator.decoder)


def reconstruct(image, generator):
    """Round trip through the quantised bottleneck without serialising."""
    q = generator.quantizer
    code = quantize_hard(encode(image, generator.encoder), q)
    return decode(dequantize(code, q), generator.decoder)


__all__ = [
    "Bitstream", "CodecConfig", "Decoder", "Encoder", "Generator", "LatentCode", "QuantizerSpec",
    "bitrate_bpp", "build_decoder", "build_encoder", "check_image", "compress", "decode",
    "decompress", "dequantize", "deserialize_bitstream", "downsampling_factor", "encode",
    "latent_information_bits", "quantize_hard", "quantize_soft", "quantize_soft_grad",
    "quantize_training", "reconstruct", "serialize_bitstream", "to_uint8", "to_unit",
]
