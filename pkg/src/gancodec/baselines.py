"""JPEG / JPEG2000 / WebP baselines at a requested bitrate.

Rate is always measured from the encoded byte string, header included:
``bpp = 8 * len(file) / (H * W)``.

Encoding goes through an adapter so the same search runs against Pillow's
bundled codecs, against external command-line tools, or against files
recorded earlier (hermetic tests).
"""
import hashlib
import io
import json
import math
import os
import shutil
import subprocess
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image, features

from .errors import CodecToolError, CodecUnavailableError, UnreachableTargetError

CODECS = ("jpeg", "jpeg2000", "webp")
SUFFIX = {"jpeg": ".jpg", "jpeg2000": ".jp2", "webp": ".webp"}
# (low, high, integer?) quality bounds; higher quality -> larger file
QUALITY_BOUNDS = {
    "jpeg": (1, 95, True),
    "webp": (0, 100, True),
    "jpeg2000": (1.0, 100.0, False),
}
MAX_BISECTIONS = 20
TOOLS_ENV = "GANCODEC_CODEC_TOOLS"


def _check_codec(codec):
    if codec not in CODECS:
        raise ValueError(f"unknown codec {codec!r}; expected one of {CODECS}")


def jp2_compression_ratio(quality):
    """Map JPEG2000 quality in [1, 100] to an OpenJPEG rate (1:1 .. 1024:1)."""
    return 2.0 ** ((100.0 - quality) * 10.0 / 99.0)


class PillowAdapter:
    """Pillow's bundled libjpeg / OpenJPEG / libwebp."""

    name = "pillow"
    _FEATURE = {"jpeg": "jpg", "jpeg2000": "jpg_2000", "webp": "webp"}

    def available(self, codec):
        return bool(features.check(self._FEATURE[codec]))

    def encode(self, image, codec, quality):
        _check_codec(codec)
        if not self.available(codec):
            raise CodecUnavailableError(
                f"Pillow was built without {codec} support; reinstall Pillow with the {codec} library"
            )
        buf = io.BytesIO()
        img = Image.fromarray(np.asarray(image, dtype=np.uint8))
        try:
            if codec == "jpeg":
                img.save(buf, "JPEG", quality=int(quality))
            elif codec == "webp":
                img.save(buf, "WEBP", quality=int(quality), method=6)
            else:
                img.save(buf, "JPEG2000", quality_mode="rates",
                         quality_layers=[jp2_compression_ratio(quality)], irreversible=True)
        except OSError as exc:
            raise CodecToolError(f"{codec} encode failed: {exc}") from exc
        return buf.getvalue()

    def decode(self, data, codec):
        try:
            return np.asarray(Image.open(io.BytesIO(data)).convert("RGB"), dtype=np.uint8)
        except OSError as exc:
            raise CodecToolError(f"{codec} decode failed: {exc}") from exc


class CommandAdapter:
    """External encoders driven by argument templates.

    ``templates`` maps a codec to ``{"encode": [...], "decode": [...]}``
    argument lists containing ``{input}``, ``{output}`` and (for encode)
    ``{quality}`` placeholders. Encoders read PNG and write the codec's
    file; decoders write PNG.
    """

    name = "command"

    def __init__(self, templates):
        self.templates = templates

    @classmethod
    def from_env(cls):
        """Templates from the JSON file named by ``GANCODEC_CODEC_TOOLS``."""
        path = os.environ.get(TOOLS_ENV)
        if not path:
            raise CodecUnavailableError(f"set {TOOLS_ENV} to a JSON file of codec command templates")
        with open(path) as fh:
            return cls(json.load(fh))

    def available(self, codec):
        t = self.templates.get(codec)
        return bool(t) and all(shutil.which(t[k][0]) for k in ("encode", "decode"))

    def _run(self, args, codec):
        exe = shutil.which(args[0])
        if exe is None:
            raise CodecUnavailableError(f"{args[0]} not found on PATH; install it or fix {TOOLS_ENV}")
        proc = subprocess.run([exe, *args[1:]], capture_output=True)
        if proc.returncode != 0:
            raise CodecToolError(f"{codec} tool {args[0]} failed: {proc.stderr.decode(errors='replace')[:500]}")

    def encode(self, image, codec, quality):
        _check_codec(codec)
        if codec not in self.templates:
            raise CodecUnavailableError(f"no command template for {codec}")
        with tempfile.TemporaryDirectory() as tmp:
            src, dst = Path(tmp) / "in.png", Path(tmp) / ("out" + SUFFIX[codec])
            Image.fromarray(np.asarray(image, dtype=np.uint8)).save(src)
            q = int(quality) if QUALITY_BOUNDS[codec][2] else quality
            args = [a.format(input=src, output=dst, quality=q) for a in self.templates[codec]["encode"]]
            self._run(args, codec)
            return dst.read_bytes()

    def decode(self, data, codec):
        with tempfile.TemporaryDirectory() as tmp:
            src, dst = Path(tmp) / ("in" + SUFFIX[codec]), Path(tmp) / "out.png"
            src.write_bytes(data)
            args = [a.format(input=src, output=dst) for a in self.templates[codec]["decode"]]
            self._run(args, codec)
            return np.asarray(Image.open(dst).convert("RGB"), dtype=np.uint8)


def image_digest(image):
    arr = np.ascontiguousarray(np.asarray(image, dtype=np.uint8))
    h = hashlib.sha256(str(arr.shape).encode())
    h.update(arr.tobytes())
    return h.hexdigest()[:16]


def _quality_tag(quality):
    return f"{quality:.6f}" if isinstance(quality, float) else str(int(quality))


class GoldenAdapter:
    """Replays encoded files recorded under ``root/<image digest>/``.

    With ``fallback`` set, missing entries are produced by the fallback
    adapter and recorded, so a run with the real codecs populates the store
    for later tool-free runs.
    """

    name = "golden"

    def __init__(self, root, fallback=None):
        self.root = Path(root)
        self.fallback = fallback

    def _path(self, image, codec, quality):
        return self.root / image_digest(image) / f"{codec}_q{_quality_tag(quality)}{SUFFIX[codec]}"

    def available(self, codec):
        return self.fallback is not None and self.fallback.available(codec) or self.root.is_dir()

    def encode(self, image, codec, quality):
        _check_codec(codec)
        path = self._path(image, codec, quality)
        if path.exists():
            return path.read_bytes()
        if self.fallback is None:
            raise CodecUnavailableError(f"no recorded {codec} file at {path} and no live codec")
        data = self.fallback.encode(image, codec, quality)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(data)
        return data

    def decode(self, data, codec):
        # every recorded format is decodable by Pillow's readers
        return PillowAdapter().decode(data, codec)


def default_adapter():
    if os.environ.get(TOOLS_ENV):
        return CommandAdapter.from_env()
    return PillowAdapter()


@dataclass
class EncodeResult:
    codec: str
    quality: float
    data: bytes
    reconstruction: np.ndarray
    bpp: float


def file_bpp(nbytes, H, W):
    return 8.0 * nbytes / (H * W)


def encode_standard(image, codec, quality, adapter=None):
    """Encode and decode an (H, W, 3) uint8 image with a standard codec."""
    _check_codec(codec)
    adapter = adapter or default_adapter()
    img = np.asarray(image, dtype=np.uint8)
    data = adapter.encode(img, codec, quality)
    rec = adapter.decode(data, codec)
    if rec.shape != img.shape:
        raise CodecToolError(f"{codec} returned shape {rec.shape}, expected {img.shape}")
    return EncodeResult(codec, quality, data, rec, file_bpp(len(data), img.shape[0], img.shape[1]))


@dataclass
class CodecRequest:
    codec: str
    target_bpp: float
    tolerance: float = 0.10
    quality_bounds: tuple = None

    def __post_init__(self):
        _check_codec(self.codec)
        if not self.target_bpp > 0:
            raise ValueError("target bpp must be positive")
        if self.quality_bounds is None:
            self.quality_bounds = QUALITY_BOUNDS[self.codec][:2]


@dataclass
class SearchResult:
    quality: float
    bpp: float
    within_tolerance: bool
    result: EncodeResult
    trace: list = field(default_factory=list)


def _closer(a, b, target):
    """True if EncodeResult ``a`` beats ``b``; ties prefer the smaller file."""
    da, db = abs(a.bpp - target), abs(b.bpp - target)
    return da < db or (da == db and len(a.data) < len(b.data))


def search_quality_for_bpp(image, request, adapter=None):
    """Bisect the quality parameter until the file rate is within tolerance."""
    adapter = adapter or default_adapter()
    codec, target, tol = request.codec, request.target_bpp, request.tolerance
    integer = QUALITY_BOUNDS[codec][2]
    lo, hi = request.quality_bounds
    trace = []

    def run(q):
        r = encode_standard(image, codec, q, adapter)
        trace.append((q, r.bpp))
        return r

    def ok(r):
        return abs(r.bpp - target) / target <= tol

    low, high = run(lo), run(hi)
    if low.bpp > target * (1 + tol) or high.bpp < target * (1 - tol):
        raise UnreachableTargetError(
            f"{codec} cannot reach {target:.4g} bpp on this image; "
            f"achievable range is [{low.bpp:.4g}, {high.bpp:.4g}] bpp",
            achievable=(low.bpp, high.bpp),
        )
    best = low if _closer(low, high, target) else high
    for r in (low, high):
        if ok(r):
            return SearchResult(r.quality, r.bpp, True, r, trace)
    for _ in range(MAX_BISECTIONS):
        if integer and hi - lo <= 1:
            break
        mid = (lo + hi) // 2 if integer else 0.5 * (lo + hi)
        r = run(mid)
        if _closer(r, best, target):
            best = r
        if ok(r):
            return SearchResult(mid, r.bpp, True, r, trace)
        if r.bpp < target:
            lo = mid
        else:
            hi = mid
    return SearchResult(best.quality, best.bpp, ok(best), best, trace)
