"""Alternating generator / discriminator training."""
import csv
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import torch

from ..checkpoint import load_checkpoint, save_checkpoint
from ..codec.config import CodecConfig
from ..codec.networks import Generator
from ..codec.quantizer import QuantizerSpec
from ..errors import ConfigurationError, DatasetError, NumericError
from .discriminator import DiscriminatorSpec, MultiScaleDiscriminator
from .losses import (
    LossWeights,
    feature_matching_loss,
    gan_loss_discriminator,
    gan_loss_generator,
    generator_total_loss,
    similarity_loss,
)

log = logging.getLogger(__name__)

LOG_COLUMNS = ("step", "L_gan_G", "L_fm", "L_sim", "L_gen_total", "L_disc")
# "none" trains without quantisation and quantises only at inference
TRAIN_QUANT_MODES = ("straight-through", "soft", "hard", "none")


class TrainingDiverged(NumericError):
    pass


@dataclass
class TrainConfig:
    epochs: int = 50
    lr: float = 2e-4
    betas: tuple = (0.5, 0.999)
    batch_size: int = 1
    seed: int = 0
    quant_mode: str = "straight-through"
    weights: LossWeights = field(default_factory=LossWeights)
    max_steps: int = None
    checkpoint_every: int = 1

    def __post_init__(self):
        if not self.lr >= 0:
            raise ConfigurationError("learning rate must be >= 0")
        if self.epochs < 1:
            raise ConfigurationError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ConfigurationError("batch size must be >= 1")
        if self.quant_mode not in TRAIN_QUANT_MODES:
            raise ConfigurationError(f"quant_mode must be one of {TRAIN_QUANT_MODES}")
        if isinstance(self.weights, dict):
            self.weights = LossWeights(**self.weights)
        self.betas = tuple(self.betas)

    @property
    def generator_quant_mode(self):
        return None if self.quant_mode == "none" else self.quant_mode

    def to_dict(self):
        return asdict(self)


@dataclass
class TrainState:
    generator: Generator
    discriminator: MultiScaleDiscriminator
    opt_g: torch.optim.Optimizer
    opt_d: torch.optim.Optimizer
    config: TrainConfig
    step: int = 0
    epoch: int = 0
    history: list = field(default_factory=list)
    shuffler: torch.Generator = None


def new_state(codec_config, config, disc_spec=None, levels=None):
    """Seeded generator, discriminator and Adam optimisers."""
    torch.manual_seed(config.seed)
    mode = config.quant_mode if config.quant_mode != "none" else "straight-through"
    q = QuantizerSpec(levels, mode) if levels is not None else QuantizerSpec.uniform(codec_config.L, mode)
    gen = Generator(codec_config, q)
    disc = MultiScaleDiscriminator(disc_spec or DiscriminatorSpec())
    opt_g = torch.optim.Adam(gen.parameters(), lr=config.lr, betas=config.betas)
    opt_d = torch.optim.Adam(disc.parameters(), lr=config.lr, betas=config.betas)
    shuffler = torch.Generator()
    shuffler.manual_seed(config.seed)
    return TrainState(gen, disc, opt_g, opt_d, config, shuffler=shuffler)


def generator_objective(generator, discriminator, x, weights=LossWeights(), quant_mode="default"):
    """Forward pass and the three generator loss terms plus their sum."""
    x_hat = generator(x) if quant_mode == "default" else generator(x, quant_mode)
    fake_logits, fake_feats = discriminator(x_hat)
    with torch.no_grad():
        _, real_feats = discriminator(x)
    parts = (
        gan_loss_generator(fake_logits),
        feature_matching_loss(real_feats, fake_feats),
        similarity_loss(x, x_hat),
    )
    return parts, generator_total_loss(parts, weights)


def _set_grad(module, flag):
    for p in module.parameters():
        p.requires_grad_(flag)


def _finite(report):
    bad = {k: v for k, v in report.items() if k != "step" and not math.isfinite(v)}
    if bad:
        raise TrainingDiverged(f"non-finite losses at step {report['step']}: {bad}")


def train_step(batch, state):
    """One generator update followed by one discriminator update.

    ``batch`` is an ``(B, C, H, W)`` tensor in [-1, 1]. Returns the loss
    report of this step; ``state`` is updated in place.
    """
    gen, disc, cfg = state.generator, state.discriminator, state.config
    mode = cfg.generator_quant_mode
    gen.train()
    disc.train()

    # generator phase: gradients flow through D but only G is stepped
    _set_grad(disc, False)
    state.opt_g.zero_grad(set_to_none=True)
    try:
        (l_gan, l_fm, l_sim), l_gen = generator_objective(gen, disc, batch, cfg.weights, mode)
    except NumericError as exc:
        raise TrainingDiverged(f"step {state.step + 1}: {exc}") from exc
    l_gen.backward()
    state.opt_g.step()
    _set_grad(disc, True)

    # discriminator phase on a fresh reconstruction
    _set_grad(gen, False)
    state.opt_d.zero_grad(set_to_none=True)
    with torch.no_grad():
        x_hat = gen(batch, mode)
    real_logits, _ = disc(batch)
    fake_logits, _ = disc(x_hat)
    l_disc = gan_loss_discriminator(real_logits, fake_logits)
    l_disc.backward()
    state.opt_d.step()
    _set_grad(gen, True)

    state.step += 1
    report = {
        "step": state.step,
        "L_gan_G": float(l_gan.detach()),
        "L_fm": float(l_fm.detach()),
        "L_sim": float(l_sim.detach()),
        "L_gen_total": float(l_gen.detach()),
        "L_disc": float(l_disc.detach()),
    }
    _finite(report)
    state.history.append(report)
    return report


def _as_tensor_dataset(dataset):
    arr = np.asarray(dataset, dtype=np.float32)
    if arr.ndim == 3:
        arr = arr[None]
    if arr.ndim != 4 or arr.shape[0] == 0:
        raise DatasetError("training needs a non-empty (N, H, W, C) image stack")
    return torch.from_numpy(np.ascontiguousarray(arr.transpose(0, 3, 1, 2)))


def save_training_checkpoint(path, state):
    cfg = {
        "codec": state.generator.config.to_dict(),
        "levels": state.generator.quantizer.levels.tolist(),
        "train": state.config.to_dict(),
        "disc": asdict(state.discriminator.spec),
    }
    return save_checkpoint(
        path, "gan", cfg, state.step,
        weights={"generator": state.generator, "discriminator": state.discriminator},
        optim={"generator": state.opt_g, "discriminator": state.opt_d},
        rng={"torch": torch.get_rng_state(), "shuffle": state.shuffler.get_state()},
        epoch=state.epoch,
    )


def load_generator(path):
    """Generator (eval mode) from a GAN checkpoint."""
    blob = load_checkpoint(path, kind="gan")
    cfg = blob["config"]
    codec = CodecConfig.from_dict(cfg["codec"])
    mode = cfg["train"]["quant_mode"]
    q = QuantizerSpec(cfg["levels"], mode if mode != "none" else "straight-through")
    gen = Generator(codec, q)
    gen.load_state_dict(blob["weights"]["generator"])
    gen.eval()
    return gen


def restore_state(path):
    blob = load_checkpoint(path, kind="gan")
    cfg = blob["config"]
    tc = dict(cfg["train"])
    state = new_state(
        CodecConfig.from_dict(cfg["codec"]), TrainConfig(**tc),
        DiscriminatorSpec(**cfg["disc"]), levels=cfg["levels"],
    )
    state.generator.load_state_dict(blob["weights"]["generator"])
    state.discriminator.load_state_dict(blob["weights"]["discriminator"])
    state.opt_g.load_state_dict(blob["optim"]["generator"])
    state.opt_d.load_state_dict(blob["optim"]["discriminator"])
    state.step = blob["step"]
    state.epoch = blob["epoch"]
    torch.set_rng_state(blob["rng"]["torch"])
    state.shuffler.set_state(blob["rng"]["shuffle"])
    return state


def write_log(path, history):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=LOG_COLUMNS)
        w.writeheader()
        for row in history:
            w.writerow({k: row[k] for k in LOG_COLUMNS})


def train(dataset, config, codec_config=None, disc_spec=None, checkpoint_dir=None,
          log_path=None, resume=None, callback=None):
    """Train a generator on an ``(N, H, W, C)`` stack of [-1, 1] images.

    Runs ``epochs * ceil(N / batch_size)`` steps (fewer if ``max_steps`` is
    set). With ``checkpoint_dir`` the full training state is written to
    ``last.pt`` every ``checkpoint_every`` epochs; ``resume`` restarts from
    such a file. Returns the final :class:`TrainState`, whose ``history``
    holds one loss report per step.
    """
    data = _as_tensor_dataset(dataset)
    n = data.shape[0]
    if resume is not None:
        state = restore_state(resume)
        state.config.epochs = config.epochs
        state.config.max_steps = config.max_steps
    else:
        state = new_state(codec_config or CodecConfig(), config, disc_spec)
    cfg = state.config
    d = state.generator.config.d
    if data.shape[2] % d or data.shape[3] % d:
        raise ConfigurationError(f"training images {tuple(data.shape[2:])} not divisible by d={d}")

    bs = cfg.batch_size
    while state.epoch < cfg.epochs:
        order = torch.randperm(n, generator=state.shuffler)
        for start in range(0, n, bs):
            if cfg.max_steps is not None and state.step >= cfg.max_steps:
                break
            report = train_step(data[order[start:start + bs]], state)
            if callback is not None:
                callback(report, state)
        state.epoch += 1
        if checkpoint_dir is not None and state.epoch % cfg.checkpoint_every == 0:
            save_training_checkpoint(Path(checkpoint_dir) / "last.pt", state)
        if cfg.max_steps is not None and state.step >= cfg.max_steps:
            break
        log.debug("epoch %d done at step %d", state.epoch, state.step)
    if log_path is not None:
        write_log(log_path, state.history)
    state.generator.eval()
    return state
