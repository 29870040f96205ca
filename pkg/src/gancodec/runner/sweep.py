"""Rate sweep over (F, L, mode) GAN points and standard-codec baselines."""
import csv
import hashlib
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .. import baselines, metrics
from ..codec import CodecConfig, bitrate_bpp, reconstruct, to_uint8, to_unit
from ..errors import CodecUnavailableError, GancodecError, UnreachableTargetError
from ..segmentation import FCNSegmenter, TrainingStrategy, evaluate_confusion, train_segmentation
from ..training.discriminator import DiscriminatorSpec
from ..training.trainer import TrainConfig, load_generator, save_training_checkpoint, train
from .config import config_hash
from .data import ingest, load_images, load_labels

log = logging.getLogger(__name__)

CSV_COLUMNS = ("method", "F", "L", "mode", "bpp", "psnr_db", "ssim", "ms_ssim", "miou",
               "seg_model", "seed", "config_hash")


@dataclass
class SweepData:
    train_unit: np.ndarray
    train_u8: np.ndarray
    train_labels: np.ndarray
    val_u8: np.ndarray
    val_labels: np.ndarray
    fingerprint: str


def load_sweep_data(cfg):
    tr = ingest(cfg.train_root, cfg.layout, split="train", resolution=cfg.resolution)
    va = ingest(cfg.val_root, cfg.layout, split="val")
    train_u8 = load_images(tr)
    val_u8 = load_images(va)
    h = hashlib.sha256()
    for arr in (train_u8, val_u8):
        h.update(str(arr.shape).encode())
        h.update(arr.tobytes())
    return SweepData(
        train_unit=to_unit(train_u8),
        train_u8=train_u8,
        train_labels=load_labels(tr) if tr.has_labels else None,
        val_u8=val_u8,
        val_labels=load_labels(va) if va.has_labels else None,
        fingerprint=h.hexdigest()[:12],
    )


def codec_config_for(cfg, F, L):
    return CodecConfig.tiny(F=F, L=L) if cfg.network_size == "tiny" else CodecConfig(F=F, L=L)


def disc_spec_for(cfg):
    return DiscriminatorSpec.tiny() if cfg.network_size == "tiny" else DiscriminatorSpec()


def distortion(reference_u8, coded_u8, ms_scales):
    """Mean PSNR / SSIM / MS-SSIM over a set of image pairs."""
    p, s, m = [], [], []
    for a, b in zip(reference_u8, coded_u8):
        p.append(metrics.psnr(a, b))
        s.append(metrics.ssim(a, b))
        m.append(metrics.ms_ssim(a, b, scales=ms_scales))
    return float(np.mean(p)), float(np.mean(s)), float(np.mean(m))


class Sweep:
    """Runs and caches every point of a :class:`SweepConfig`.

    Each point's result lives in ``<output_dir>/points/<hash>.json``;
    existing files are reused, so an interrupted sweep resumes where it
    stopped.
    """

    def __init__(self, cfg, data=None, adapter=None):
        self.cfg = cfg
        self.out = Path(cfg.output_dir)
        self.data = data or load_sweep_data(cfg)
        self.adapter = adapter
        self.failures = []
        self._seg_models = {}

    # -- bookkeeping -------------------------------------------------------

    def _point_path(self, h):
        return self.out / "points" / f"{h}.json"

    def _cached(self, h):
        p = self._point_path(h)
        if p.exists():
            return metrics.RatePoint(**json.loads(p.read_text()))
        return None

    def _store(self, point):
        p = self._point_path(point.config_hash)
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(json.dumps(point.to_dict(), sort_keys=True, indent=1))
        return point

    def _train_cfg(self, mode, seed):
        return TrainConfig(epochs=self.cfg.epochs, max_steps=self.cfg.max_steps, batch_size=self.cfg.batch_size,
                           lr=self.cfg.lr, seed=seed, quant_mode=mode)

    def _gan_key(self, F, L, mode, seed):
        c = self.cfg
        return {"data": self.data.fingerprint, "resolution": c.resolution, "F": F, "L": L, "mode": mode,
                "seed": seed, "size": c.network_size, "train": self._train_cfg(mode, seed).to_dict()}

    def _seg_key(self, seed):
        c = self.cfg
        return {"data": self.data.fingerprint, "K": c.num_classes, "iterations": c.seg_iterations,
                "batch": c.seg_batch_size, "lr": c.seg_lr, "seed": seed}

    # -- models ------------------------------------------------------------

    def generator(self, F, L, mode, seed):
        h = config_hash(self._gan_key(F, L, mode, seed))
        path = self.out / "models" / f"gan_{h}.pt"
        if path.exists():
            return load_generator(path)
        state = train(self.data.train_unit, self._train_cfg(mode, seed), codec_config_for(self.cfg, F, L),
                      disc_spec_for(self.cfg))
        save_training_checkpoint(path, state)
        return load_generator(path)

    def segmenter(self, seed):
        if self.data.train_labels is None:
            return None
        h = config_hash(self._seg_key(seed))
        if h in self._seg_models:
            return self._seg_models[h]
        path = self.out / "models" / f"seg_{h}.pt"
        if path.exists():
            model = FCNSegmenter.load(path)
        else:
            strat = TrainingStrategy("uncoded", self.cfg.seg_iterations, batch_size=self.cfg.seg_batch_size,
                                     lr=self.cfg.seg_lr, seed=seed)
            model, _ = train_segmentation(self.data.train_u8, self.data.train_labels, strat,
                                          num_classes=self.cfg.num_classes)
            model.save(path, {"strategy": strat.kind})
        self._seg_models[h] = model
        return model

    def _miou(self, model, coded_u8):
        if model is None or self.data.val_labels is None:
            return math.nan
        cm = evaluate_confusion(model, coded_u8, self.data.val_labels, num_classes=self.cfg.num_classes)
        return metrics.miou(cm)

    # -- points ------------------------------------------------------------

    def gan_point(self, F, L, mode, seed):
        key = self._gan_key(F, L, mode, seed)
        key["eval"] = {"seg": self._seg_key(seed), "ms_scales": self.cfg.ms_ssim_scales}
        h = config_hash(key)
        hit = self._cached(h)
        if hit is not None:
            return hit
        gen = self.generator(F, L, mode, seed)
        coded = np.stack([to_uint8(reconstruct(to_unit(img), gen)) for img in self.data.val_u8])
        p, s, m = distortion(self.data.val_u8, coded, self.cfg.ms_ssim_scales)
        miou = self._miou(self.segmenter(seed), coded)
        return self._store(metrics.RatePoint(
            "gan", F, L, mode, bitrate_bpp(F, L, gen.config.d), p, s, m, miou, "uncoded", seed, h))

    def retrained_point(self, F, L, mode, seed):
        """mIoU of a segmenter fine-tuned on this GAN's reconstructions."""
        key = self._gan_key(F, L, mode, seed)
        key["eval"] = {"seg": self._seg_key(seed), "ms_scales": self.cfg.ms_ssim_scales, "finetune": True}
        h = config_hash(key)
        hit = self._cached(h)
        if hit is not None:
            return hit
        gen = self.generator(F, L, mode, seed)

        def code(img):
            return to_uint8(reconstruct(to_unit(img), gen))

        strat = TrainingStrategy("finetune", self.cfg.seg_iterations, batch_size=self.cfg.seg_batch_size,
                                 lr=self.cfg.seg_lr, seed=seed)
        model, _ = train_segmentation(self.data.train_u8, self.data.train_labels, strat, codec=code,
                                      num_classes=self.cfg.num_classes)
        coded = np.stack([code(img) for img in self.data.val_u8])
        p, s, m = distortion(self.data.val_u8, coded, self.cfg.ms_ssim_scales)
        return self._store(metrics.RatePoint(
            "gan", F, L, mode, bitrate_bpp(F, L, gen.config.d), p, s, m, self._miou(model, coded),
            "finetune", seed, h))

    def baseline_point(self, codec, target, seed):
        key = {"data": self.data.fingerprint, "codec": codec, "target": target, "tol": self.cfg.tolerance,
               "seg": self._seg_key(seed), "ms_scales": self.cfg.ms_ssim_scales}
        h = config_hash(key)
        hit = self._cached(h)
        if hit is not None:
            return hit
        req = baselines.CodecRequest(codec, target, self.cfg.tolerance)
        results = [baselines.search_quality_for_bpp(img, req, self.adapter) for img in self.data.val_u8]
        coded = np.stack([r.result.reconstruction for r in results])
        n_pix = sum(img.shape[0] * img.shape[1] for img in self.data.val_u8)
        bpp = 8.0 * sum(len(r.result.data) for r in results) / n_pix
        p, s, m = distortion(self.data.val_u8, coded, self.cfg.ms_ssim_scales)
        miou = self._miou(self.segmenter(seed), coded)
        return self._store(metrics.RatePoint(
            codec, 0, 0, f"target={target:g}", bpp, p, s, m, miou, "uncoded", seed, h))

    # -- driver ------------------------------------------------------------

    def jobs(self):
        c = self.cfg
        out = []
        for seed in c.seeds:
            for F in c.F_values:
                for L in c.L_values:
                    for mode in c.modes:
                        out.append(("gan", (F, L, mode, seed)))
            for F, L, *rest in c.retrained_points:
                out.append(("retrained", (F, L, rest[0] if rest else "straight-through", seed)))
            for codec in c.codecs:
                for t in c.targets:
                    out.append(("baseline", (codec, t, seed)))
        return out

    def _run(self, job):
        kind, args = job
        fn = {"gan": self.gan_point, "retrained": self.retrained_point, "baseline": self.baseline_point}[kind]
        try:
            return fn(*args)
        except CodecUnavailableError:
            # a missing tool breaks every later point too; stop here
            raise
        except GancodecError as exc:
            log.warning("sweep point %s%s failed: %s", kind, args, exc)
            self.failures.append({"kind": kind, "args": list(args), "error": str(exc)})
            return None

    def run(self):
        self.out.mkdir(parents=True, exist_ok=True)
        self.cfg.dump(self.out / "config.yaml")
        jobs = self.jobs()
        # training jobs stay sequential; baseline evaluation may fan out
        train_jobs = [j for j in jobs if j[0] != "baseline"]
        eval_jobs = [j for j in jobs if j[0] == "baseline"]
        for seed in self.cfg.seeds:
            self.segmenter(seed)
        points = [self._run(j) for j in train_jobs]
        if self.cfg.workers > 1:
            with ThreadPoolExecutor(self.cfg.workers) as pool:
                points += list(pool.map(self._run, eval_jobs))
        else:
            points += [self._run(j) for j in eval_jobs]
        table = [p for p in points if p is not None]
        write_results(self.out, table)
        (self.out / "failures.json").write_text(json.dumps(self.failures, indent=1))
        return table


def run_sweep(cfg, data=None, adapter=None):
    return Sweep(cfg, data, adapter).run()


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


def write_results(out_dir, table):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "results.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for p in table:
            d = p.to_dict()
            w.writerow([_fmt(d[k]) for k in CSV_COLUMNS])
    (out / "results.json").write_text(json.dumps([p.to_dict() for p in table], indent=1, sort_keys=True))


def read_results(path):
    path = Path(path)
    if path.suffix == ".json":
        return [metrics.RatePoint(**d) for d in json.loads(path.read_text())]
    rows = []
    with open(path, newline="") as fh:
        for r in csv.DictReader(fh):
            rows.append(metrics.RatePoint(
                method=r["method"], F=int(r["F"]), L=int(r["L"]), mode=r["mode"], bpp=float(r["bpp"]),
                psnr_db=float(r["psnr_db"]), ssim=float(r["ssim"]), ms_ssim=float(r["ms_ssim"]),
                miou=float(r["miou"]), seg_model=r["seg_model"], seed=int(r["seed"]),
                config_hash=r["config_hash"],
            ))
    return rows
