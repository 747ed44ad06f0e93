"""SVG charts: performance diagram, resolution deltas and latent-size sweeps.

All figures share one style block so that identical inputs give
byte-identical files: fixed canvas, fixed SVG id salt and no creation date.
"""

from contextlib import contextmanager
from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.lines import Line2D  # noqa: E402

from ..errors import InvalidInputError  # noqa: E402

CANVAS_PT = 800  # square canvas edge in SVG user units (pt)
STYLE = {
    "svg.hashsalt": "gridrep",
    "svg.fonttype": "none",
    "font.family": "DejaVu Sans",
    "font.size": 13,
    "axes.titlesize": 15,
    "axes.labelsize": 14,
    "legend.fontsize": 11,
    "lines.linewidth": 1.6,
    "figure.dpi": 72,
    "savefig.dpi": 72,
    "path.simplify": False,
}
CSI_LEVELS = tuple(round(0.1 * i, 1) for i in range(1, 10))
BIAS_LEVELS = (0.3, 0.5, 0.8, 1, 1.3, 2, 3, 5, 10)
EVENT_MARKERS = {"FT": "o", "NE": "s", "SWF": "^", "HR": "D", "NWPTC": "v"}
METHOD_COLORS = {"pca": "#1f77b4", "cae": "#d62728", "imported": "#2ca02c", "pt": "#2ca02c"}
EXTRA_MARKERS = ("P", "X", "*", "h", "<", ">")
EXTRA_COLORS = ("#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")
SWEEP_STYLES = {"csi": "-.", "pod": "-", "far": "--"}


@dataclass(frozen=True)
class DiagramPoint:
    sr: float
    pod: float
    event: str
    method: str

    def __post_init__(self):
        for name in ("sr", "pod"):
            v = getattr(self, name)
            if v is None or not 0.0 <= v <= 1.0:
                raise InvalidInputError(f"diagram point {name}={v!r} outside [0, 1]")


def _lookup(table, extras, keys):
    mapping = {}
    spare = iter(extras)
    for k in keys:
        if k not in mapping:
            mapping[k] = table.get(k) or next(spare, extras[-1])
    return mapping


def _slug(text):
    return "".join(ch if ch.isalnum() else "-" for ch in str(text))


@contextmanager
def _figure(width_pt=CANVAS_PT, height_pt=CANVAS_PT):
    with plt.rc_context(STYLE):
        fig = plt.figure(figsize=(width_pt / 72.0, height_pt / 72.0))
        try:
            yield fig
        finally:
            plt.close(fig)


def _save(fig, out):
    try:
        fig.savefig(out, format="svg", metadata={"Date": None})
    except OSError as exc:
        raise OSError(f"cannot write chart {out}: {exc.strerror}") from exc


def csi_from_sr_pod(sr, pod):
    return 1.0 / (1.0 / pod + 1.0 / sr - 1.0)


def render_performance_diagram(points, out, title="Performance diagram"):
    """Success ratio vs POD with CSI contours (solid) and bias rays (dashed)."""
    points = list(points)
    events = [p.event for p in points]
    methods = [p.method for p in points]
    markers = _lookup(EVENT_MARKERS, EXTRA_MARKERS, events)
    colors = _lookup(METHOD_COLORS, EXTRA_COLORS, methods)
    with _figure() as fig:
        ax = fig.add_axes([0.1, 0.1, 0.62, 0.8])
        grid = np.linspace(0.005, 1.0, 200)
        sr_g, pod_g = np.meshgrid(grid, grid)
        cs = ax.contour(sr_g, pod_g, csi_from_sr_pod(sr_g, pod_g), levels=CSI_LEVELS,
                        colors="0.45", linestyles="solid", linewidths=1.0)
        cs.set_gid("csi-contours")
        ax.clabel(cs, fmt="%.1f", fontsize=9)
        for b in BIAS_LEVELS:
            xs = np.array([0.0, min(1.0, 1.0 / b)])
            line, = ax.plot(xs, b * xs, color="0.3", linestyle="--", linewidth=0.9)
            line.set_gid(f"bias-{_slug(b)}")
            if b >= 1:
                ax.text(min(1.0, 1.0 / b), 1.0, f"{b:g}", fontsize=9, ha="center", va="bottom")
            else:
                ax.text(1.0, b, f"{b:g}", fontsize=9, ha="left", va="center")
        for p in points:
            line, = ax.plot([p.sr], [p.pod], linestyle="none", marker=markers[p.event],
                            markersize=11, markerfacecolor=colors[p.method],
                            markeredgecolor="black", clip_on=False)
            line.set_gid(f"point-{_slug(p.method)}-{_slug(p.event)}")
        ax.set_xlim(0, 1)
        ax.set_ylim(0, 1)
        ax.set_aspect("equal")
        ax.set_xlabel("Success ratio (1 - FAR)")
        ax.set_ylabel("Probability of detection (POD)")
        ax.set_title(title, pad=22)
        handles = [Line2D([], [], linestyle="none", marker=markers[e], color="black",
                          markerfacecolor="white", markersize=9, label=e)
                   for e in dict.fromkeys(events)]
        handles += [Line2D([], [], linestyle="none", marker="s", markersize=10,
                           color=colors[m], label=m.upper()) for m in dict.fromkeys(methods)]
        handles += [Line2D([], [], color="0.45", label="CSI"),
                    Line2D([], [], color="0.3", linestyle="--", label="Bias")]
        ax.legend(handles=handles, loc="upper left", bbox_to_anchor=(1.06, 1.0), frameon=False)
        _save(fig, out)
    return out


def render_sweep_chart(dims, series, out, title="Latent size sweep"):
    """CSI (dash-dot), POD (solid) and FAR (dashed) against latent size on a log2 axis.

    ``series`` maps method name to ``{"csi": [...], "pod": [...], "far": [...]}``;
    ``None`` entries are left as gaps.
    """
    dims = [int(d) for d in dims]
    if not dims:
        raise InvalidInputError("sweep chart needs at least one latent size")
    colors = _lookup(METHOD_COLORS, EXTRA_COLORS, list(series))
    with _figure(CANVAS_PT, CANVAS_PT * 5 // 8) as fig:
        ax = fig.add_axes([0.1, 0.12, 0.66, 0.78])
        for method, metrics in series.items():
            for metric, style in SWEEP_STYLES.items():
                values = list(metrics.get(metric, []))
                if len(values) != len(dims):
                    raise InvalidInputError(
                        f"{method}/{metric}: {len(values)} values for {len(dims)} latent sizes")
                y = np.array([np.nan if v is None else v for v in values], dtype=float)
                line, = ax.plot(dims, y, linestyle=style, marker="o", markersize=5,
                                color=colors[method], label=f"{method.upper()} {metric.upper()}")
                line.set_gid(f"line-{_slug(method)}-{metric}")
        ax.set_xscale("log", base=2)
        ax.set_xticks(dims)
        ax.set_xticklabels([str(d) for d in dims])
        ax.minorticks_off()
        if len(dims) == 1:
            ax.set_xlim(dims[0] / 2, dims[0] * 2)
        ax.set_ylim(0, 1)
        ax.set_xlabel("Latent space dimension")
        ax.set_ylabel("Score")
        ax.set_title(title)
        ax.legend(loc="upper left", bbox_to_anchor=(1.02, 1.0), frameon=False)
        _save(fig, out)
    return out


def render_delta_chart(rows, out, title="High minus low resolution"):
    """Three panels (CSI, POD, FAR) of grouped bars, one group per event.

    ``rows`` are ``(method, event, {metric: MetricDelta})`` tuples.
    """
    rows = list(rows)
    methods = list(dict.fromkeys(r[0] for r in rows))
    events = list(dict.fromkeys(r[1] for r in rows))
    colors = _lookup(METHOD_COLORS, EXTRA_COLORS, methods)
    lookup = {(m, e): d for m, e, d in rows}
    width = 0.8 / max(1, len(methods))
    with _figure(CANVAS_PT, CANVAS_PT) as fig:
        axes = fig.subplots(3, 1, sharex=True)
        for ax, metric in zip(axes, ("csi", "pod", "far")):
            for i, m in enumerate(methods):
                xs = np.arange(len(events)) + (i - (len(methods) - 1) / 2) * width
                vals = []
                for e in events:
                    d = lookup.get((m, e), {}).get(metric)
                    vals.append(0.0 if d is None or d.delta is None else d.delta)
                bars = ax.bar(xs, vals, width=width, color=colors[m], label=m.upper())
                for patch, e in zip(bars, events):
                    patch.set_gid(f"bar-{_slug(m)}-{_slug(e)}-{metric}")
            ax.axhline(0.0, color="black", linewidth=0.8)
            ax.set_ylabel(f"Δ {metric.upper()}")
        axes[-1].set_xticks(np.arange(len(events)))
        axes[-1].set_xticklabels(events)
        axes[0].set_title(title)
        axes[0].legend(loc="upper right", frameon=False)
        _save(fig, out)
    return out


def render_reconstruction_montage(cases, out, title="Reconstructions"):
    """Grid of grayscale panels; ``cases`` are ``(label, [(column title, image), ...])``."""
    cases = list(cases)
    if not cases:
        raise InvalidInputError("no reconstruction cases")
    ncols = len(cases[0][1])
    with _figure(CANVAS_PT, max(200, CANVAS_PT * len(cases) // ncols)) as fig:
        axes = np.atleast_2d(fig.subplots(len(cases), ncols, squeeze=False))
        for r, (label, panels) in enumerate(cases):
            for c, (name, img) in enumerate(panels):
                ax = axes[r, c]
                ax.imshow(np.clip(img, 0, 1), cmap="gray", vmin=0, vmax=1, interpolation="nearest")
                ax.set_xticks([])
                ax.set_yticks([])
                if r == 0:
                    ax.set_title(name)
                if c == 0:
                    ax.set_ylabel(label, fontsize=9)
        fig.suptitle(title)
        _save(fig, out)
    return out
