"""Rate-distortion and rate-mIoU figures from a sweep table."""
import math
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

METRICS = {
    "psnr": ("psnr_db", "PSNR [dB]"),
    "ssim": ("ssim", "SSIM"),
    "ms_ssim": ("ms_ssim", "MS-SSIM"),
    "miou": ("miou", "mIoU"),
}
GAN_STYLE = {"straight-through": "-", "soft": "-.", "hard": "-", "none": "--"}
# fixed PNG metadata so identical tables give identical files
_PNG_META = {"Software": None}


def _finite(v):
    return v is not None and not math.isnan(v) and not math.isinf(v)


def _series(table, field):
    """Group points into line series, averaging over seeds at equal rate."""
    groups = defaultdict(lambda: defaultdict(list))
    stars = []
    for p in table:
        y = getattr(p, field)
        if not _finite(y):
            continue
        if p.seg_model == "finetune":
            stars.append((p.bpp, y))
            continue
        key = ("gan", p.mode, p.F) if p.method == "gan" else (p.method, None, None)
        groups[key][p.bpp].append(y)
    series = {}
    for key, by_rate in groups.items():
        xs = sorted(by_rate)
        series[key] = (xs, [sum(by_rate[x]) / len(by_rate[x]) for x in xs])
    return series, stars


def _limits(values, pad=0.05):
    lo, hi = min(values), max(values)
    span = hi - lo or max(abs(hi), 1.0) * 0.1
    return lo - pad * span, hi + pad * span


def plot_metric(table, name, path):
    field, label = METRICS[name]
    series, stars = _series(table, field)
    if not series and not stars:
        return None
    fig, ax = plt.subplots(figsize=(6, 4.5))
    xs_all, ys_all = [], []
    for key in sorted(series, key=str):
        xs, ys = series[key]
        method, mode, F = key
        if method == "gan":
            ax.plot(xs, ys, GAN_STYLE.get(mode, "-"), marker="o", ms=3, label=f"GAN F={F} ({mode})")
        else:
            ax.plot(xs, ys, ":", color="black", marker="s", ms=3, label=method)
        xs_all += xs
        ys_all += ys
    if stars:
        sx, sy = zip(*stars)
        ax.plot(sx, sy, "*", ms=12, color="tab:red", linestyle="none", label="segmenter fine-tuned")
        xs_all += sx
        ys_all += sy
    ax.set_xlim(*_limits(xs_all))
    ax.set_ylim(*_limits(ys_all))
    ax.set_xlabel("bits per pixel")
    ax.set_ylabel(label)
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=100, metadata=_PNG_META)
    plt.close(fig)
    return Path(path)


def emit_plots(table, out_dir):
    """Write ``psnr.png``, ``ssim.png``, ``ms_ssim.png`` and ``miou.png``.

    Metrics with no finite value (e.g. mIoU without labels) are skipped.
    Returns the list of written paths.
    """
    if not table:
        raise ValueError("cannot plot an empty results table")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name in METRICS:
        p = plot_metric(table, name, out / f"{name}.png")
        if p is not None:
            written.append(p)
    return written
