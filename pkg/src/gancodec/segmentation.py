"""Semantic-segmentation harness: retraining strategies and the evaluation matrix.

Any object with ``num_classes``, ``train_step(images, labels)`` and
``predict(image)`` can be trained and evaluated here; :class:`FCNSegmenter`
is the bundled desk-scale model.
"""
import logging
from dataclasses import asdict, dataclass

import numpy as np
import torch
from torch import nn
from torch.nn import functional as nnf

from .checkpoint import load_checkpoint, save_checkpoint
from .errors import ConfigurationError, DatasetError, ShapeError
from .metrics import ConfusionMatrix, confusion_accumulate, miou

log = logging.getLogger(__name__)

IGNORE_LABEL = 255
STRATEGIES = ("uncoded", "reconstructions", "mixed", "finetune")
FULL_SCALE_ITERATIONS = 120_000
FULL_SCALE_FINETUNE_SPLIT = 90_000 / 120_000


@dataclass(frozen=True)
class TrainingStrategy:
    """How the segmentation model sees original vs. coded images.

    ``finetune`` trains on originals for ``round(split * iterations)``
    steps and on reconstructions for the rest.
    """

    kind: str
    iterations: int = 1000
    finetune_split: float = FULL_SCALE_FINETUNE_SPLIT
    batch_size: int = 4
    lr: float = 1e-3
    seed: int = 0
    flip: bool = True

    def __post_init__(self):
        if self.kind not in STRATEGIES:
            raise ConfigurationError(f"strategy must be one of {STRATEGIES}, got {self.kind!r}")
        if self.iterations < 1:
            raise ConfigurationError("iteration budget must be >= 1")
        if not 0.0 <= self.finetune_split <= 1.0:
            raise ConfigurationError("finetune_split must be in [0, 1]")

    @classmethod
    def full_scale(cls, kind, **kw):
        return cls(kind, iterations=FULL_SCALE_ITERATIONS, **kw)

    @property
    def needs_codec(self):
        return self.kind != "uncoded"

    def phases(self):
        """``[(source, iterations), ...]`` with sources original/reconstruction/mixed."""
        n = self.iterations
        if self.kind == "uncoded":
            return [("original", n)]
        if self.kind == "reconstructions":
            return [("reconstruction", n)]
        if self.kind == "mixed":
            return [("mixed", n)]
        first = int(round(self.finetune_split * n))
        return [("original", first), ("reconstruction", n - first)]


# ---------------------------------------------------------------------------
# bundled model


class TinySegNet(nn.Module):
    """Four stride-2 stages down, four transposed-conv stages up, with skips."""

    def __init__(self, num_classes, widths=(16, 32, 64, 96)):
        super().__init__()
        self.widths = tuple(widths)
        self.stem = nn.Sequential(nn.Conv2d(3, widths[0], 3, padding=1), nn.BatchNorm2d(widths[0]), nn.ReLU(True))
        downs, cin = [], widths[0]
        for w in widths:
            downs.append(nn.Sequential(
                nn.Conv2d(cin, w, 3, stride=2, padding=1), nn.BatchNorm2d(w), nn.ReLU(True),
                nn.Conv2d(w, w, 3, padding=1), nn.BatchNorm2d(w), nn.ReLU(True),
            ))
            cin = w
        self.downs = nn.ModuleList(downs)
        skips = [widths[0]] + list(widths[:-1])
        ups = []
        for skip in reversed(skips):
            ups.append(nn.ModuleDict({
                "up": nn.ConvTranspose2d(cin, skip, 4, stride=2, padding=1),
                "fuse": nn.Sequential(nn.Conv2d(2 * skip, skip, 3, padding=1), nn.BatchNorm2d(skip), nn.ReLU(True)),
            }))
            cin = skip
        self.ups = nn.ModuleList(ups)
        self.head = nn.Conv2d(cin, num_classes, 1)

    def forward(self, x):
        x = self.stem(x)
        skips = [x]
        for down in self.downs:
            x = down(x)
            skips.append(x)
        skips.pop()
        for up in self.ups:
            x = up["up"](x)
            x = up["fuse"](torch.cat([x, skips.pop()], dim=1))
        return self.head(x)


def _to_input(images):
    arr = np.asarray(images, dtype=np.float32)
    if arr.ndim == 3:
        arr = arr[None]
    return torch.from_numpy(np.ascontiguousarray(arr.transpose(0, 3, 1, 2))) / 127.5 - 1.0


class FCNSegmenter:
    """TinySegNet + Adam + pixel cross-entropy (ignore label masked)."""

    stride = 16

    def __init__(self, num_classes, widths=(16, 32, 64, 96), lr=1e-3, seed=0):
        torch.manual_seed(seed)
        self.num_classes = num_classes
        self.net = TinySegNet(num_classes, widths)
        self.lr = lr
        self.opt = torch.optim.Adam(self.net.parameters(), lr=lr)
        self.steps = 0

    def train_step(self, images, labels):
        self.net.train()
        x = _to_input(images)
        y = torch.from_numpy(np.asarray(labels, dtype=np.int64))
        self.opt.zero_grad(set_to_none=True)
        loss = nnf.cross_entropy(self.net(x), y, ignore_index=IGNORE_LABEL)
        loss.backward()
        self.opt.step()
        self.steps += 1
        return float(loss.detach())

    def reset_optimizer(self, lr=None):
        self.opt = torch.optim.Adam(self.net.parameters(), lr=lr or self.lr)

    @torch.no_grad()
    def predict(self, image):
        img = np.asarray(image)
        if img.ndim != 3 or img.shape[0] % self.stride or img.shape[1] % self.stride:
            raise ShapeError(f"image shape {img.shape} must be (H, W, 3) with H, W divisible by {self.stride}")
        self.net.eval()
        return self.net(_to_input(img))[0].argmax(dim=0).numpy().astype(np.uint8)

    def save(self, path, extra=None):
        cfg = {"num_classes": self.num_classes, "widths": list(self.net.widths), "lr": self.lr}
        cfg.update(extra or {})
        return save_checkpoint(path, "segmentation", cfg, self.steps, weights={"model": self.net})

    @classmethod
    def load(cls, path):
        blob = load_checkpoint(path, kind="segmentation")
        cfg = blob["config"]
        model = cls(cfg["num_classes"], tuple(cfg["widths"]), cfg.get("lr", 1e-3))
        model.net.load_state_dict(blob["weights"]["model"])
        model.steps = blob["step"]
        return model


# ---------------------------------------------------------------------------
# training


def _check_dataset(images, labels):
    if labels is None:
        raise DatasetError("segmentation training needs label maps")
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    if images.shape[0] == 0:
        raise DatasetError("empty dataset")
    if images.shape[:3] != labels.shape:
        raise DatasetError(f"images {images.shape} and labels {labels.shape} do not align")
    return images, labels


def code_images(images, codec):
    """Reconstructions of every image through ``codec`` (uint8 -> uint8)."""
    out = np.stack([np.asarray(codec(img), dtype=np.uint8) for img in images])
    if out.shape != images.shape:
        raise ShapeError(f"coding changed image shape {images.shape} -> {out.shape}")
    return out


class _SampleStream:
    """Endless seeded stream of ``(image, label)`` samples for one source."""

    def __init__(self, source, originals, recons, labels, rng):
        self.source, self.orig, self.rec, self.labels, self.rng = source, originals, recons, labels, rng
        self._queue = []

    def _epoch(self):
        n = len(self.labels)
        if self.source == "original":
            return [(self.orig, i) for i in self.rng.permutation(n)]
        if self.source == "reconstruction":
            return [(self.rec, i) for i in self.rng.permutation(n)]
        # union of both sets, strictly alternating original / reconstruction
        p, q = self.rng.permutation(n), self.rng.permutation(n)
        out = []
        for a, b in zip(p, q):
            out += [(self.orig, a), (self.rec, b)]
        return out

    def take(self, k):
        while len(self._queue) < k:
            self._queue.extend(self._epoch())
        picked, self._queue = self._queue[:k], self._queue[k:]
        return picked


def train_segmentation(images, labels, strategy, codec=None, model=None, reconstructions=None,
                       num_classes=None):
    """Train ``model`` (default: a fresh :class:`FCNSegmenter`) under ``strategy``.

    ``codec`` maps a uint8 image to its uint8 reconstruction; precomputed
    ``reconstructions`` may be passed instead. Exactly
    ``strategy.iterations`` optimiser steps are taken. Returns
    ``(model, losses)``.
    """
    images, labels = _check_dataset(images, labels)
    if strategy.needs_codec and reconstructions is None:
        if codec is None:
            raise ConfigurationError(f"strategy {strategy.kind!r} needs a coding method")
        reconstructions = code_images(images, codec)
    if model is None:
        k = num_classes or int(labels[labels != IGNORE_LABEL].max()) + 1
        model = FCNSegmenter(k, lr=strategy.lr, seed=strategy.seed)
    rng = np.random.default_rng(strategy.seed)
    losses = []
    for source, iters in strategy.phases():
        stream = _SampleStream(source, images, reconstructions, labels, rng)
        for _ in range(iters):
            picks = stream.take(strategy.batch_size)
            xb = np.stack([src[i] for src, i in picks])
            yb = np.stack([labels[i] for _, i in picks])
            if strategy.flip:
                flips = rng.random(len(picks)) < 0.5
                xb[flips] = xb[flips, :, ::-1]
                yb[flips] = yb[flips, :, ::-1]
            losses.append(model.train_step(xb, yb))
        log.debug("%s phase %s: %d steps", strategy.kind, source, iters)
    return model, losses


def predict(model, image):
    return model.predict(image)


# ---------------------------------------------------------------------------
# evaluation


def evaluate_confusion(model, images, labels, codec=None, num_classes=None):
    """One global confusion matrix over the whole (optionally coded) set."""
    images, labels = _check_dataset(images, labels)
    k = num_classes or model.num_classes
    cm = ConfusionMatrix(k)
    for img, lab in zip(images, labels):
        shown = img if codec is None else np.asarray(codec(img), dtype=np.uint8)
        cm = confusion_accumulate(model.predict(shown), lab, cm, IGNORE_LABEL)
    return cm


def evaluate_matrix(models, coding_methods, images, labels):
    """mIoU for every (model, coding method) pair.

    ``models`` and ``coding_methods`` are name -> object mappings; a coding
    method of ``None`` means uncoded. Returns ``{(model, coding): mIoU}``.
    """
    images, labels = _check_dataset(images, labels)
    coded = {name: images if fn is None else code_images(images, fn) for name, fn in coding_methods.items()}
    table = {}
    for mname, model in models.items():
        for cname, imgs in coded.items():
            table[(mname, cname)] = miou(evaluate_confusion(model, imgs, labels))
    return table
