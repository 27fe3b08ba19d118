"""CSV tables and SVG figures.

Floats are written with ``repr`` (shortest round-trip form) and figures
with a fixed SVG hash salt and no date stamp, so identical inputs give
byte-identical files.
"""

from __future__ import annotations

import csv
import io
import os
from pathlib import Path

import numpy as np

from .analysis import RateReport
from .core import GridFunction

__all__ = [
    "ReportError",
    "node_rows",
    "emit_csv",
    "emit_node_csv",
    "emit_rate_csv",
    "emit_rate_svg",
    "emit_curves_svg",
    "NODE_HEADER",
    "RATE_HEADER",
]

NODE_HEADER = ("index", "x", "d_x", "value")
RATE_HEADER = ("eps", "error")


class ReportError(ValueError):
    pass


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _write_atomic(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def emit_csv(header, rows, path, trailer=()) -> Path:
    """Write ``header``, ``rows`` and optional trailing rows; refuse empty tables."""
    rows = [list(r) for r in rows]
    if not rows:
        raise ReportError(f"refusing to write {path}: no rows")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        if len(r) != len(header):
            raise ReportError(f"row {r!r} does not match header {header!r}")
        w.writerow([_fmt(v) for v in r])
    for r in trailer:
        w.writerow([_fmt(v) for v in r])
    path = Path(path)
    _write_atomic(path, buf.getvalue())
    return path


def node_rows(u: GridFunction, mask=None):
    idx = np.arange(u.n)
    if mask is not None:
        idx = idx[mask]
    x, d, v = u.x, u.d, u.values
    return [(int(i), x[i], d[i], v[i]) for i in idx]


def emit_node_csv(u: GridFunction, path, mask=None) -> Path:
    return emit_csv(NODE_HEADER, node_rows(u, mask), path)


def emit_rate_csv(report: RateReport, path) -> Path:
    rows = list(zip(report.eps_list, report.error_list))
    fit = ("#fit", report.fitted_slope, report.fit_residual, report.target_slope, bool(report.passed))
    return emit_csv(RATE_HEADER, rows, path, trailer=[fit])


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams.update(
        {
            "svg.hashsalt": "hjvisc",
            "svg.fonttype": "path",
            "font.size": 9,
            "axes.grid": True,
            "grid.alpha": 0.3,
        }
    )
    return plt


def _save_svg(fig, path):
    plt = _pyplot()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    fig.savefig(buf, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)
    _write_atomic(path, buf.getvalue())
    return path


def emit_rate_svg(report: RateReport, path, title: str = "") -> Path:
    """Log-log scatter of the errors with the fitted line and a target-slope guide."""
    plt = _pyplot()
    eps = np.asarray(report.eps_list)
    err = np.asarray(report.error_list)
    fig, ax = plt.subplots(figsize=(4.8, 3.6))
    ax.loglog(eps, err, "o", color="k", label="error")
    e = np.geomspace(eps.min(), eps.max(), 50)
    ax.loglog(e, np.exp(report.intercept) * e**report.fitted_slope, "-", color="C0",
              label=f"fit, slope {report.fitted_slope:.3f}")
    # guide through the smallest-eps point
    k = int(np.argmin(eps))
    ax.loglog(e, err[k] * (e / eps[k]) ** report.target_slope, "--", color="C3",
              label=f"target slope {report.target_slope:.3f}")
    ax.set_xlabel("eps")
    ax.set_ylabel("error")
    if title:
        ax.set_title(title)
    ax.legend(loc="best", frameon=False)
    fig.tight_layout()
    return _save_svg(fig, path)


def emit_curves_svg(curves, path, xlabel="x", ylabel="value", title="", logx=False, logy=False) -> Path:
    """Line plot of ``(label, x, y)`` curves."""
    curves = list(curves)
    if not curves:
        raise ReportError(f"refusing to write {path}: no curves")
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(4.8, 3.6))
    for label, x, y in curves:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        ok = np.isfinite(x) & np.isfinite(y)
        ax.plot(x[ok], y[ok], "-", lw=1.2, label=label)
    if logx:
        ax.set_xscale("log")
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    if len(curves) > 1:
        ax.legend(loc="best", frameon=False, fontsize=7)
    fig.tight_layout()
    return _save_svg(fig, path)
