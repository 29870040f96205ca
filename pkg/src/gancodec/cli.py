"""Command-line entry point: ``gancodec <subcommand> ...``.

Exit codes: 0 success, 1 usage or input error, 2 environment (a codec or
tool is missing), 3 numeric failure.
"""
import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np
from PIL import Image

from . import __version__, metrics
from .errors import CodecUnavailableError, GancodecError, NumericError

EXIT_OK, EXIT_USAGE, EXIT_ENV, EXIT_NUMERIC = 0, 1, 2, 3

log = logging.getLogger("gancodec")


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on bad usage; this tool reserves 2 for environment errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _read_image(path):
    return np.asarray(Image.open(path).convert("RGB"), dtype=np.uint8)


def _write_image(path, arr):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(arr).save(path)


# ---------------------------------------------------------------------------
# subcommands


def cmd_synth(args):
    from .runner.data import generate_synthetic

    m = generate_synthetic(args.out, args.count, (args.height, args.width), K=args.classes, seed=args.seed)
    print(f"wrote {len(m)} image/label pairs to {args.out}")


def cmd_train(args):
    from .codec import CodecConfig
    from .runner.data import ingest, load_unit_images
    from .training.discriminator import DiscriminatorSpec
    from .training.trainer import TrainConfig, save_training_checkpoint, train

    manifest = ingest(args.data, args.layout, split="train", resolution=args.resolution)
    images = load_unit_images(manifest)
    if args.network_size == "tiny":
        codec_cfg, disc = CodecConfig.tiny(F=args.F, L=args.L), DiscriminatorSpec.tiny()
    else:
        codec_cfg, disc = CodecConfig(F=args.F, L=args.L), DiscriminatorSpec()
    cfg = TrainConfig(epochs=args.epochs, lr=args.lr, batch_size=args.batch_size, seed=args.seed,
                      quant_mode=args.mode, max_steps=args.max_steps)
    out = Path(args.out)

    def progress(report, state):
        if report["step"] % args.log_every == 0:
            log.info("step %d  sim %.4f  gen %.4f  disc %.4f", report["step"], report["L_sim"],
                     report["L_gen_total"], report["L_disc"])

    state = train(images, cfg, codec_cfg, disc, checkpoint_dir=out, log_path=out / "train_log.csv",
                  resume=args.resume, callback=progress)
    save_training_checkpoint(out / "final.pt", state)
    print(f"trained {state.step} steps; checkpoint {out / 'final.pt'}")


def cmd_compress(args):
    from .codec import compress, to_unit
    from .training.trainer import load_generator

    gen = load_generator(args.checkpoint)
    data = compress(to_unit(_read_image(args.input)), gen)
    Path(args.output).write_bytes(data)
    img = _read_image(args.input)
    print(f"{len(data)} bytes, {8 * len(data) / (img.shape[0] * img.shape[1]):.6f} bpp (file incl. header)")


def cmd_decompress(args):
    from .codec import decompress, to_uint8
    from .training.trainer import load_generator

    gen = load_generator(args.checkpoint)
    _write_image(args.output, to_uint8(decompress(Path(args.input).read_bytes(), gen)))


def cmd_evaluate(args):
    ref, rec = _read_image(args.reference), _read_image(args.reconstruction)
    out = {"psnr_db": metrics.psnr(ref, rec), "ssim": metrics.ssim(ref, rec)}
    try:
        out["ms_ssim"] = metrics.ms_ssim(ref, rec, scales=args.ms_ssim_scales)
    except GancodecError as exc:
        out["ms_ssim"] = None
        log.warning("%s", exc)
    print(json.dumps(out, indent=1))


def cmd_seg_train(args):
    from .codec import reconstruct, to_uint8, to_unit
    from .runner.data import ingest, load_images, load_labels
    from .segmentation import FCNSegmenter, TrainingStrategy, train_segmentation
    from .training.trainer import load_generator

    manifest = ingest(args.data, args.layout, split="train", resolution=args.resolution)
    images, labels = load_images(manifest), load_labels(manifest)
    codec = None
    if args.checkpoint:
        gen = load_generator(args.checkpoint)

        def codec(img):
            return to_uint8(reconstruct(to_unit(img), gen))

    strat = TrainingStrategy(args.strategy, args.iterations, batch_size=args.batch_size, lr=args.lr,
                             seed=args.seed)
    model = FCNSegmenter.load(args.init) if args.init else None
    model, losses = train_segmentation(images, labels, strat, codec=codec, model=model,
                                       num_classes=args.classes)
    model.save(args.out, {"strategy": strat.kind})
    print(f"{len(losses)} steps, final loss {losses[-1]:.4f}; model {args.out}")


def _sweep_fields():
    from .runner.config import SweepConfig

    return SweepConfig, dataclasses.fields(SweepConfig)


def cmd_sweep(args):
    from .baselines import GoldenAdapter, default_adapter
    from .runner.config import SweepConfig
    from .runner.plots import emit_plots
    from .runner.sweep import run_sweep

    data = SweepConfig.load(args.config).to_dict() if args.config else {}
    for f in dataclasses.fields(SweepConfig):
        v = getattr(args, f.name)
        if v is not None:
            data[f.name] = v
    cfg = SweepConfig.from_dict(data)
    adapter = default_adapter()
    if args.golden:
        adapter = GoldenAdapter(args.golden, fallback=None if args.golden_only else adapter)
    table = run_sweep(cfg, adapter=adapter)
    emit_plots(table, Path(cfg.output_dir) / "plots")
    print(f"{len(table)} points written to {cfg.output_dir}/results.csv")


def cmd_plot(args):
    from .runner.plots import emit_plots
    from .runner.sweep import read_results

    paths = emit_plots(read_results(args.results), args.out)
    for p in paths:
        print(p)


# ---------------------------------------------------------------------------
# parser


def _add_data_args(p):
    p.add_argument("--data", required=True, help="dataset root")
    p.add_argument("--layout", default="auto", choices=["auto", "flat", "cityscapes"])
    p.add_argument("--resolution", default="native", choices=["native", "half"])


def _add_sweep_flags(p):
    SweepConfig, flds = _sweep_fields()
    for f in flds:
        flag = "--" + f.name.replace("_", "-")
        default = f.default if f.default is not dataclasses.MISSING else f.default_factory()
        if isinstance(default, list):
            if f.name == "retrained_points":
                p.add_argument(flag, type=lambda s: [int(v) if v.isdigit() else v for v in s.split(":")],
                               nargs="*", default=None, metavar="F:L[:mode]")
            else:
                kind = int if default and isinstance(default[0], int) else (
                    float if default and isinstance(default[0], float) else str)
                p.add_argument(flag, type=kind, nargs="+", default=None)
        else:
            kind = type(default) if default is not None else int
            p.add_argument(flag, type=kind, default=None, help=f"(default {default})")


def build_parser():
    ap = _Parser(prog="gancodec", description="GAN-based image codec: training, coding and evaluation.")
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="write a synthetic shapes dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--count", type=int, default=8)
    p.add_argument("--height", type=int, default=64)
    p.add_argument("--width", type=int, default=128)
    p.add_argument("--classes", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train a generator/discriminator pair")
    _add_data_args(p)
    p.add_argument("--out", required=True, help="checkpoint directory")
    p.add_argument("-F", type=int, default=8)
    p.add_argument("-L", type=int, default=4)
    p.add_argument("--mode", default="straight-through", choices=["straight-through", "soft", "hard", "none"])
    p.add_argument("--network-size", default="tiny", choices=["tiny", "full"])
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--max-steps", type=int)
    p.add_argument("--batch-size", type=int, default=1)
    p.add_argument("--lr", type=float, default=2e-4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--resume", help="resume from a last.pt checkpoint")
    p.add_argument("--log-every", type=int, default=50)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("compress", help="image -> bitstream")
    p.add_argument("checkpoint")
    p.add_argument("input")
    p.add_argument("output")
    p.set_defaults(func=cmd_compress)

    p = sub.add_parser("decompress", help="bitstream -> image")
    p.add_argument("checkpoint")
    p.add_argument("input")
    p.add_argument("output")
    p.set_defaults(func=cmd_decompress)

    p = sub.add_parser("evaluate", help="PSNR / SSIM / MS-SSIM of an image pair")
    p.add_argument("reference")
    p.add_argument("reconstruction")
    p.add_argument("--ms-ssim-scales", type=int, default=5)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("seg-train", help="train the segmentation model")
    _add_data_args(p)
    p.add_argument("--out", required=True, help="model checkpoint path")
    p.add_argument("--strategy", default="uncoded", choices=["uncoded", "reconstructions", "mixed", "finetune"])
    p.add_argument("--checkpoint", help="GAN checkpoint used as the coding method")
    p.add_argument("--init", help="start from an existing segmentation checkpoint")
    p.add_argument("--iterations", type=int, default=1000)
    p.add_argument("--batch-size", type=int, default=4)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--classes", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_seg_train)

    p = sub.add_parser("sweep", help="run a rate sweep; flags override the config file")
    p.add_argument("--config", help="YAML sweep configuration")
    p.add_argument("--golden", help="directory of recorded baseline files")
    p.add_argument("--golden-only", action="store_true", help="never call a live codec")
    _add_sweep_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("plot", help="draw the four rate panels from results.csv/json")
    p.add_argument("results")
    p.add_argument("--out", default="plots")
    p.set_defaults(func=cmd_plot)
    return ap


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(message)s")
    try:
        args.func(args)
    except CodecUnavailableError as exc:
        print(f"environment error: {exc}", file=sys.stderr)
        return EXIT_ENV
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (GancodecError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
