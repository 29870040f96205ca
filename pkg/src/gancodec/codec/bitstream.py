"""Fixed-rate container for a quantised latent code.

Layout (big-endian)::

    0..3   magic b"SCMP"
    4      format version (1)
    5..8   image height H, uint32
    9..12  image width W, uint32
    13     feature maps F, uint8
    14     bits per element ld(L), uint8
    15..   level indices, ld(L) bits each, MSB first, row-major over
           (height, width, feature); final byte zero-padded in its low bits

The latent grid is ``H/d x W/d``; ``d`` is a property of the codec, not of
the stream, so readers must supply it.
"""
import math
import struct
from dataclasses import dataclass

import numpy as np

from .. import kernels
from ..errors import BadMagicError, FormatError, TruncatedPayloadError, UnsupportedVersionError
from .quantizer import LatentCode

MAGIC = b"SCMP"
VERSION = 1
_HEADER = struct.Struct(">4sBIIBB")
HEADER_SIZE = _HEADER.size  # 15


def _bits_for(L):
    bits = int(L).bit_length() - 1
    if L < 2 or (1 << bits) != L:
        raise FormatError(f"bitstream needs a power-of-two level count, got L={L}")
    return bits


@dataclass(frozen=True)
class Bitstream:
    H: int
    W: int
    F: int
    bits: int
    payload: bytes
    version: int = VERSION

    @property
    def L(self):
        return 1 << self.bits

    def information_bits(self, d):
        """Payload bits before byte padding."""
        return (self.H // d) * (self.W // d) * self.F * self.bits

    def to_bytes(self):
        return _HEADER.pack(MAGIC, self.version, self.H, self.W, self.F, self.bits) + self.payload

    @classmethod
    def from_bytes(cls, data):
        data = bytes(data)
        if data[:4] != MAGIC[: len(data)]:
            raise BadMagicError(f"bad magic {data[:4]!r}, expected {MAGIC!r}")
        if len(data) < 4:
            raise TruncatedPayloadError("stream shorter than the magic number")
        if len(data) < HEADER_SIZE:
            raise TruncatedPayloadError(f"header needs {HEADER_SIZE} bytes, got {len(data)}")
        _, version, H, W, F, bits = _HEADER.unpack_from(data)
        if version != VERSION:
            raise UnsupportedVersionError(f"unsupported bitstream version {version}")
        if bits < 1 or bits > 16:
            raise FormatError(f"invalid bits-per-element field {bits}")
        if F < 1:
            raise FormatError("feature-map count must be >= 1")
        return cls(H=H, W=W, F=F, bits=bits, payload=data[HEADER_SIZE:], version=version)


def serialize_bitstream(code, q, d=16):
    """Pack ``code`` into the container. Returns ``bytes``."""
    if code.L != q.L:
        raise FormatError(f"code has L={code.L} but quantiser has L={q.L}")
    bits = _bits_for(q.L)
    h, w, F = code.shape
    if F > 255:
        raise FormatError("at most 255 feature maps fit the header")
    idx = code.indices
    if idx.size and (idx.min() < 0 or idx.max() >= q.L):
        raise FormatError(f"level index out of range [0, {q.L})")
    payload = kernels.pack_indices(np.ascontiguousarray(idx.ravel()), bits)
    return Bitstream(H=h * d, W=w * d, F=F, bits=bits, payload=payload.tobytes()).to_bytes()


def deserialize_bitstream(data, d=16):
    bs = Bitstream.from_bytes(data)
    if bs.H % d or bs.W % d:
        raise FormatError(f"header size {bs.H}x{bs.W} not divisible by d={d}")
    h, w = bs.H // d, bs.W // d
    count = h * w * bs.F
    nbits = count * bs.bits
    need = math.ceil(nbits / 8)
    if len(bs.payload) < need:
        raise TruncatedPayloadError(f"payload has {len(bs.payload)} bytes, expected {need}")
    if len(bs.payload) > need:
        raise FormatError(f"{len(bs.payload) - need} trailing bytes after payload")
    payload = np.frombuffer(bs.payload, dtype=np.uint8)
    if nbits % 8 and payload[-1] & ((1 << (8 - nbits % 8)) - 1):
        raise FormatError("non-zero padding bits")
    idx = kernels.unpack_indices(payload, bs.bits, count)
    return LatentCode(idx.reshape(h, w, bs.F), bs.L)
