"""Dataset ingestion and the synthetic desk-scale dataset."""
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from ..codec.pixels import to_unit
from ..errors import DatasetError

IGNORE_LABEL = 255
RESOLUTIONS = ("native", "half")


@dataclass
class DatasetManifest:
    split: str
    image_paths: list
    label_paths: list = None
    resolution: str = "native"

    def __post_init__(self):
        self.image_paths = [Path(p) for p in self.image_paths]
        if self.label_paths is not None:
            self.label_paths = [Path(p) for p in self.label_paths]
            if len(self.label_paths) != len(self.image_paths):
                raise DatasetError(
                    f"{len(self.image_paths)} images but {len(self.label_paths)} label maps"
                )
        if self.resolution not in RESOLUTIONS:
            raise DatasetError(f"resolution must be one of {RESOLUTIONS}")

    def __len__(self):
        return len(self.image_paths)

    @property
    def has_labels(self):
        return self.label_paths is not None

    def subset(self, indices):
        idx = list(indices)
        return DatasetManifest(
            self.split,
            [self.image_paths[i] for i in idx],
            None if self.label_paths is None else [self.label_paths[i] for i in idx],
            self.resolution,
        )

    def with_resolution(self, resolution):
        return DatasetManifest(self.split, self.image_paths, self.label_paths, resolution)


def _flat_layout(root, split):
    base = root / split if (root / split / "images").is_dir() else root
    images = sorted((base / "images").glob("*.png"))
    label_dir = base / "labels"
    if not label_dir.is_dir():
        return images, None
    labels, missing = [], []
    for p in images:
        lp = label_dir / p.name
        (labels if lp.exists() else missing).append(lp if lp.exists() else p.name)
    if missing:
        raise DatasetError(f"images without label map: {missing}")
    return images, labels


def _cityscapes_layout(root, split):
    img_root = root / "leftImg8bit" / split
    images = sorted(img_root.glob("*/*_leftImg8bit.png"))
    gt_root = root / "gtFine" / split
    if not gt_root.is_dir():
        return images, None
    labels, missing = [], []
    for p in images:
        stem = p.name[: -len("_leftImg8bit.png")]
        lp = gt_root / p.parent.name / f"{stem}_gtFine_labelTrainIds.png"
        if lp.exists():
            labels.append(lp)
        else:
            missing.append(str(p.relative_to(root)))
    if missing:
        raise DatasetError(f"images without label map: {missing}")
    return images, labels


def ingest(root, layout="auto", split="train", resolution="native"):
    """Build a manifest from a ``flat`` (images/, labels/) or ``cityscapes`` tree.

    Ordering is the sorted path order, so re-ingesting gives the same manifest.
    """
    root = Path(root)
    if not root.is_dir():
        raise DatasetError(f"{root} is not a directory")
    if layout == "auto":
        layout = "cityscapes" if (root / "leftImg8bit").is_dir() else "flat"
    if layout == "flat":
        images, labels = _flat_layout(root, split)
    elif layout == "cityscapes":
        images, labels = _cityscapes_layout(root, split)
    else:
        raise DatasetError(f"unknown layout {layout!r}")
    if not images:
        raise DatasetError(f"no images found under {root} ({layout} layout, split {split!r})")
    return DatasetManifest(split, images, labels, resolution)


def read_rgb(path, resolution="native"):
    img = Image.open(path).convert("RGB")
    if resolution == "half":
        img = img.resize((img.width // 2, img.height // 2), Image.BOX)
    return np.asarray(img, dtype=np.uint8)


def read_label(path, resolution="native"):
    lab = np.asarray(Image.open(path), dtype=np.uint8)
    if lab.ndim != 2:
        raise DatasetError(f"label map {path} must be single-channel")
    return lab[::2, ::2] if resolution == "half" else lab


def load_images(manifest):
    """uint8 stack ``(N, H, W, 3)``."""
    return np.stack([read_rgb(p, manifest.resolution) for p in manifest.image_paths])


def load_labels(manifest):
    if not manifest.has_labels:
        raise DatasetError("manifest has no label maps")
    return np.stack([read_label(p, manifest.resolution) for p in manifest.label_paths])


def load_unit_images(manifest):
    """Float stack in [-1, 1]."""
    return to_unit(load_images(manifest))


# ---------------------------------------------------------------------------
# synthetic scenes: coloured shapes on a shaded background, exact class masks

_PALETTE = np.array([
    (90, 110, 130), (200, 40, 40), (40, 170, 60), (50, 80, 210), (220, 200, 40),
    (160, 60, 190), (40, 190, 190), (240, 140, 30), (120, 70, 30), (230, 230, 230),
    (20, 20, 20), (250, 120, 170), (100, 160, 20), (0, 90, 110), (150, 150, 60),
    (110, 0, 60), (180, 210, 250), (70, 40, 120), (200, 120, 110),
], dtype=np.float64)


def _shape_mask(rng, yy, xx, H, W):
    kind = rng.integers(3)
    cy, cx = rng.uniform(0.1, 0.9) * H, rng.uniform(0.05, 0.95) * W
    ry, rx = rng.uniform(0.08, 0.22) * H, rng.uniform(0.05, 0.15) * W
    if kind == 0:
        return (np.abs(yy - cy) <= ry) & (np.abs(xx - cx) <= rx)
    if kind == 1:
        return ((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2 <= 1.0
    # isosceles triangle pointing up
    top, bottom = cy - ry, cy + ry
    frac = np.clip((yy - top) / (bottom - top), 0, 1)
    return (yy >= top) & (yy <= bottom) & (np.abs(xx - cx) <= frac * rx)


def synthetic_scene(rng, H, W, K):
    """One ``(image uint8 (H, W, 3), label uint8 (H, W))`` pair containing all K classes."""
    if K < 2 or K > len(_PALETTE):
        raise DatasetError(f"K must be in [2, {len(_PALETTE)}]")
    yy, xx = np.mgrid[0:H, 0:W].astype(np.float64)
    for _ in range(100):
        label = np.zeros((H, W), dtype=np.uint8)
        classes = list(range(1, K)) + list(rng.integers(1, K, size=rng.integers(0, K)))
        order = rng.permutation(len(classes))
        for i in order:
            label[_shape_mask(rng, yy, xx, H, W)] = classes[i]
        if np.unique(label).size == K:
            break
    else:  # pragma: no cover - practically unreachable
        raise DatasetError("could not place all classes")
    shade = 0.75 + 0.5 * (yy / max(H - 1, 1))[..., None]
    colours = _PALETTE[:K] + rng.uniform(-25, 25, size=(K, 3))
    img = colours[label] * shade
    # per-class texture: horizontal stripes whose period depends on the class
    period = 3.0 + (label % 4)
    img += 12.0 * np.sin(2 * np.pi * yy / period)[..., None] * (label > 0)[..., None]
    img += rng.normal(0.0, 6.0, size=img.shape)
    return np.clip(np.rint(img), 0, 255).astype(np.uint8), label


def generate_synthetic(root, count, dims=(64, 128), K=4, seed=0, split=None):
    """Write ``count`` image/label PNG pairs under ``root`` (flat layout).

    Returns the manifest. Files depend only on ``(seed, index)``.
    """
    H, W = dims
    if H % 16 or W % 16:
        raise DatasetError(f"dims {H}x{W} must be divisible by 16")
    base = Path(root) / split if split else Path(root)
    (base / "images").mkdir(parents=True, exist_ok=True)
    (base / "labels").mkdir(parents=True, exist_ok=True)
    for i in range(count):
        rng = np.random.default_rng([seed, i])
        img, lab = synthetic_scene(rng, H, W, K)
        Image.fromarray(img).save(base / "images" / f"{i:05d}.png")
        Image.fromarray(lab).save(base / "labels" / f"{i:05d}.png")
    return ingest(Path(root), "flat", split=split or "train")
