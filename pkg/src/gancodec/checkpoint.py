"""Self-describing checkpoint container shared by GAN and segmentation training.

A checkpoint is a ``torch.save`` archive holding only tensors and plain
Python values, so it loads with ``weights_only=True``::

    {"format": "gancodec-checkpoint", "version": 1, "kind": str,
     "config": <json str>, "step": int, "epoch": int,
     "weights": {net_name: state_dict}, "optim": {name: state_dict},
     "rng": {name: ByteTensor}}
"""
import json
import os
from pathlib import Path

import torch

from .errors import FormatError

FORMAT = "gancodec-checkpoint"
VERSION = 1


def save_checkpoint(path, kind, config, step, weights, optim=None, rng=None, epoch=0):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    blob = {
        "format": FORMAT,
        "version": VERSION,
        "kind": kind,
        "config": json.dumps(config, sort_keys=True),
        "step": int(step),
        "epoch": int(epoch),
        "weights": {k: v.state_dict() for k, v in weights.items()},
        "optim": {k: v.state_dict() for k, v in (optim or {}).items()},
        "rng": dict(rng or {}),
    }
    tmp = path.with_name(path.name + ".tmp")
    torch.save(blob, tmp)
    os.replace(tmp, path)
    return path


def load_checkpoint(path, kind=None):
    try:
        blob = torch.load(path, map_location="cpu", weights_only=True)
    except Exception as exc:  # torch raises several unrelated types here
        raise FormatError(f"cannot read checkpoint {path}: {exc}") from exc
    if not isinstance(blob, dict) or blob.get("format") != FORMAT:
        raise FormatError(f"{path} is not a {FORMAT} file")
    if blob.get("version") != VERSION:
        raise FormatError(f"unsupported checkpoint version {blob.get('version')}")
    if kind is not None and blob["kind"] != kind:
        raise FormatError(f"{path} holds a {blob['kind']!r} checkpoint, expected {kind!r}")
    blob["config"] = json.loads(blob["config"])
    return blob
