"""Sweep configuration stored as one YAML file per experiment."""
import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import yaml

from ..errors import ConfigurationError

DEFAULT_L_VALUES = (2, 4, 8, 16, 32, 64)
DEFAULT_F_VALUES = (2, 4, 8, 10)


@dataclass
class SweepConfig:
    # data
    train_root: str = "data/train"
    val_root: str = "data/val"
    layout: str = "auto"
    resolution: str = "native"
    num_classes: int = 4
    # GAN grid
    F_values: list = field(default_factory=lambda: list(DEFAULT_F_VALUES))
    L_values: list = field(default_factory=lambda: list(DEFAULT_L_VALUES))
    modes: list = field(default_factory=lambda: ["straight-through", "none"])
    network_size: str = "tiny"
    epochs: int = 50
    max_steps: int = None
    batch_size: int = 4
    lr: float = 2e-4
    # baselines
    codecs: list = field(default_factory=lambda: ["jpeg", "jpeg2000", "webp"])
    targets: list = field(default_factory=lambda: [0.0625, 0.125, 0.25])
    tolerance: float = 0.10
    # segmentation
    seg_iterations: int = 600
    seg_batch_size: int = 4
    seg_lr: float = 1e-3
    retrained_points: list = field(default_factory=list)
    # evaluation
    ms_ssim_scales: int = 5
    seeds: list = field(default_factory=lambda: [0])
    output_dir: str = "results"
    workers: int = 1

    def __post_init__(self):
        for L in self.L_values:
            if L < 2 or L & (L - 1):
                raise ConfigurationError(f"L values must be powers of two >= 2, got {L}")
        for F in self.F_values:
            if F < 1:
                raise ConfigurationError(f"F values must be >= 1, got {F}")
        if self.network_size not in ("tiny", "full"):
            raise ConfigurationError("network_size must be 'tiny' or 'full'")
        if self.workers < 1:
            raise ConfigurationError("workers must be >= 1")
        self.retrained_points = [list(p) for p in self.retrained_points]

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            data = yaml.safe_load(fh) or {}
        return cls.from_dict(data)

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self):
        return asdict(self)

    def dump(self, path):
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w") as fh:
            yaml.safe_dump(self.to_dict(), fh, sort_keys=True)


def config_hash(obj):
    """Short stable digest of a JSON-serialisable object."""
    blob = json.dumps(obj, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:12]
