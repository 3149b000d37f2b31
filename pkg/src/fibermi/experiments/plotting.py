"""SVG figures: MI versus operating point, one curve per estimator, dashed references."""

from __future__ import annotations

import io
import math
import warnings
from collections import OrderedDict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from fibermi.experiments.runner import atomic_write  # noqa: E402

REFERENCE_LABELS = {
    "awgn_capacity": "linear capacity log2(1+SNR)",
    "half_gaussian_bound": "half-Gaussian bound",
}
AXIS_LABELS = {
    "snr_db": "SNR (dB)",
    "power_dbm": "input power (dBm)",
    "alpha_rad": "rotation angle (rad)",
    "spans": "number of spans",
}

_RC = {"svg.hashsalt": "fibermi", "svg.fonttype": "path", "font.size": 9}


def default_plot_config(spec) -> dict:
    refs = ["awgn_capacity"]
    top = None
    if spec.channel == "zero-dispersion":
        refs.append("half_gaussian_bound")
        top = "snr_db"
    if spec.channel == "realistic":
        top = "snr_db"
    cfg = {
        "title": spec.description or spec.name,
        "x": "point",
        "x_label": AXIS_LABELS.get(spec.sweep.variable, spec.sweep.variable),
        "y_label": "MI (bits/symbol)",
        "references": refs,
        "top_axis": top,
        "series": ["estimator", "input"] if len(spec.inputs) > 1 else ["estimator"],
    }
    cfg.update(spec.plot)
    return cfg


def _group(rows, keys):
    groups = OrderedDict()
    for r in rows:
        groups.setdefault(tuple(getattr(r, k) for k in keys), []).append(r)
    return groups


def _linear_offset(rows, x_col, top_col):
    """top = x + c if that holds across all rows, else None."""
    d = [getattr(r, top_col) - getattr(r, x_col) for r in rows
         if r is not None and all(map(math.isfinite, (getattr(r, top_col), getattr(r, x_col))))]
    if not d or max(d) - min(d) > 1e-6:
        return None
    return float(np.median(d))


def render_svg(rows, config: dict) -> str:
    """Build the figure and return the SVG text."""
    rows = list(rows)
    if not rows:
        raise ValueError("no rows to plot")
    flt = config.get("filter") or {}
    rows = [r for r in rows if all(str(getattr(r, k)) == str(v) for k, v in flt.items())]
    if not rows:
        raise ValueError("no rows left after the plot filter")
    if len({r.experiment for r in rows}) > 1:
        raise ValueError("rows from more than one experiment")
    x_col = config.get("x", "point")
    series = config.get("series") or ["estimator"]
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(6.4, 4.4))
        dropped = 0
        for key, grp in _group(rows, series).items():
            x = np.array([getattr(r, x_col) for r in grp], dtype=float)
            y = np.array([r.mi_bits for r in grp], dtype=float)
            ok = np.isfinite(x) & np.isfinite(y)
            dropped += int((~ok).sum())
            if not ok.any():
                continue
            order = np.argsort(x[ok], kind="stable")
            label = " ".join(str(k) for k in key)
            if ok.sum() == 1:
                ax.plot(x[ok], y[ok], linestyle="none", marker="o", label=label)
            else:
                ax.plot(x[ok][order], y[ok][order], marker=".", linewidth=1.2, label=label)
        if dropped:
            warnings.warn(f"{dropped} point(s) with non-finite MI omitted from the plot", RuntimeWarning)
        refs = config.get("references") or []
        by_x = OrderedDict()
        for r in sorted(rows, key=lambda r: getattr(r, x_col)):
            by_x.setdefault(getattr(r, x_col), r)
        xs = np.array(list(by_x), dtype=float)
        for ref in refs:
            ys = np.array([getattr(r, ref) for r in by_x.values()], dtype=float)
            ok = np.isfinite(xs) & np.isfinite(ys)
            if not ok.any():
                continue
            style = dict(linestyle="--", color="0.3" if ref == "awgn_capacity" else "0.55", linewidth=1.0,
                         label=config.get("reference_labels", {}).get(ref, REFERENCE_LABELS.get(ref, ref)))
            if ok.sum() == 1:
                ax.plot(xs[ok], ys[ok], marker="_", markersize=14, **style)
            else:
                ax.plot(xs[ok], ys[ok], **style)
        top = config.get("top_axis")
        if top:
            c = _linear_offset(rows, x_col, top)
            if c is None:
                warnings.warn(f"{top} is not a fixed offset of {x_col}; top axis skipped", RuntimeWarning)
            else:
                sec = ax.secondary_xaxis("top", functions=(lambda v: v + c, lambda v: v - c))
                sec.set_xlabel(AXIS_LABELS.get(top, top))
        ax.set_xlabel(config.get("x_label", x_col))
        ax.set_ylabel(config.get("y_label", "MI (bits/symbol)"))
        if "ylim" in config:
            ax.set_ylim(*config["ylim"])
        if config.get("title"):
            ax.set_title(config["title"])
        ax.grid(True, linewidth=0.4, alpha=0.5)
        ax.legend(fontsize=7, loc="best")
        fig.tight_layout()
        buf = io.StringIO()
        fig.savefig(buf, format="svg", metadata={"Date": None})
        plt.close(fig)
    return buf.getvalue()


def render_plot(rows, config: dict, path) -> str:
    """Write the SVG for ``rows`` to ``path`` atomically and return the path."""
    atomic_write(path, render_svg(rows, config))
    return str(path)
