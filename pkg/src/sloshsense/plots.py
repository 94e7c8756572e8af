"""Figure data: every figure is an SVG plus the plain-text table it was drawn from.

Kinds
-----
``signal``      principal signal (and optionally its fitted model) over time
``regions``     classifier decision regions on a (lambda, omega) grid
``surface``     regressor output on a (lambda, omega) grid
``scatter``     predicted vs true values from an evaluation report
``efficiency``  MAE against training-set size from a sweep

Tables are tab-separated with a header row.  All inputs are validated and
all data computed before the first file is written, so a failure leaves no
partial output.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib
import numpy as np
from matplotlib.figure import Figure

from .dataset import EvalReport
from .errors import ValidationError
from .fitting import FitResult, model_eval
from .models import GprModel, QuadModel, SvmModel, regress, svm_predict
from .pipeline import PrincipalSignal
from .transfer import TransferMap

KINDS = ("signal", "regions", "surface", "scatter", "efficiency")
DEFAULT_BOUNDS = ((0.0, 2.0), (10.0, 25.0))


def _cell(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def _table_text(header: Sequence[str], rows) -> str:
    lines = ["\t".join(header)]
    lines += ["\t".join(_cell(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def _training_bounds(model) -> tuple[tuple[float, float], tuple[float, float]] | None:
    if isinstance(model, (GprModel, SvmModel)):
        raw = model.X * model.x_std + model.x_mean
        lo, hi = raw.min(axis=0), raw.max(axis=0)
        pad = 0.1 * np.where(hi > lo, hi - lo, 1.0)
        return ((float(lo[0] - pad[0]), float(hi[0] + pad[0])), (float(lo[1] - pad[1]), float(hi[1] + pad[1])))
    return None


def feature_grid(bounds, shape: tuple[int, int]) -> tuple[np.ndarray, np.ndarray]:
    """Row-major (omega outer, lambda inner) grid of feature pairs."""
    (l0, l1), (w0, w1) = bounds
    lam = np.linspace(l0, l1, shape[0])
    om = np.linspace(w0, w1, shape[1])
    L, W = np.meshgrid(lam, om)
    return L, W


def _new_figure() -> tuple[Figure, object]:
    fig = Figure(figsize=(5.0, 3.8))
    return fig, fig.add_subplot(1, 1, 1)


def _signal(obj, fit: FitResult | None):
    if not isinstance(obj, PrincipalSignal):
        raise ValidationError("signal plot needs a PrincipalSignal")
    if len(obj) == 0:
        raise ValidationError("empty signal")
    t, u = obj.t, obj.u
    header, cols = ["t", "u"], [t, u]
    fig, ax = _new_figure()
    ax.plot(t, u, lw=0.8, label="u")
    if fit is not None:
        uh = model_eval(fit.params, t)
        header.append("u_fit")
        cols.append(uh)
        ax.plot(t, uh, lw=0.8, ls="--", label="fit")
        ax.legend(loc="upper right")
    ax.set_xlabel("t (s)")
    ax.set_ylabel("principal motion")
    return fig, header, list(zip(*cols))


def _grid_plot(model, kind: str, bounds, shape):
    if bounds is None:
        bounds = _training_bounds(getattr(model, "base", model)) or DEFAULT_BOUNDS
    L, W = feature_grid(bounds, shape)
    X = np.column_stack([L.ravel(), W.ravel()])
    fig, ax = _new_figure()
    if kind == "regions":
        if not isinstance(model, SvmModel):
            raise ValidationError("regions plot needs an SvmModel")
        Z = svm_predict(model, X)
        ax.pcolormesh(L, W, Z.reshape(L.shape), shading="nearest", cmap="Set2")
        train = model.X * model.x_std + model.x_mean
        ax.scatter(train[:, 0], train[:, 1], s=8, c="k")
        header = ["lambda", "omega", "class_id"]
        rows = [(a, b, int(c)) for a, b, c in zip(X[:, 0], X[:, 1], Z)]
    else:
        if not isinstance(model, (GprModel, QuadModel, TransferMap)):
            raise ValidationError("surface plot needs a regression model")
        Z = regress(model, X)
        mesh = ax.pcolormesh(L, W, Z.reshape(L.shape), shading="nearest", cmap="viridis")
        fig.colorbar(mesh, ax=ax)
        header = ["lambda", "omega", "value"]
        rows = list(zip(X[:, 0], X[:, 1], Z))
    ax.set_xlabel("lambda (1/s)")
    ax.set_ylabel("omega (rad/s)")
    return fig, header, rows


def _scatter(report):
    if not isinstance(report, EvalReport):
        raise ValidationError("scatter plot needs an EvalReport")
    if report.is_empty:
        raise ValidationError("empty report")
    rows = [(p["target"], p["group"], p["truth"], p["pred"]) for p in report.predictions]
    fig, ax = _new_figure()
    for target in sorted({r[0] for r in rows}):
        tr = np.array([r[2] for r in rows if r[0] == target], dtype=float)
        pr = np.array([r[3] for r in rows if r[0] == target], dtype=float)
        ax.scatter(tr, pr, s=8, label=target)
    lo = min(min(float(r[2]), float(r[3])) for r in rows)
    hi = max(max(float(r[2]), float(r[3])) for r in rows)
    ax.plot([lo, hi], [lo, hi], color="0.5", lw=0.8)
    ax.set_xlabel("true")
    ax.set_ylabel("predicted")
    ax.legend(loc="upper left")
    return fig, ["target", "group", "truth", "pred"], rows


def _efficiency(reports):
    reports = [reports] if isinstance(reports, EvalReport) else list(reports or [])
    if not reports or any(not isinstance(r, EvalReport) or r.is_empty for r in reports):
        raise ValidationError("efficiency plot needs non-empty EvalReports")
    size_key = "n_tune" if "n_tune" in reports[0].sizes else "n_train"
    rows = []
    for r in reports:
        for target, m in sorted(r.metrics.items()):
            if "mae" in m:
                rows.append((int(r.sizes[size_key]), target, float(m["mae"])))
    if not rows:
        raise ValidationError("reports carry no regression metrics")
    fig, ax = _new_figure()
    for target in sorted({r[1] for r in rows}):
        pts = sorted((n, v) for n, t, v in rows if t == target)
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=target)
    ax.set_xlabel("training set size")
    ax.set_ylabel("MAE")
    ax.legend(loc="upper right")
    return fig, ["n", "target", "mae"], rows


def emit_plotdata(obj, kind: str, out_dir: str | Path, stem: str | None = None, fit: FitResult | None = None,
                  bounds=None, shape: tuple[int, int] = (60, 60)) -> list[Path]:
    """Write ``<stem>.svg`` and ``<stem>.txt`` for one figure; returns both paths."""
    if kind not in KINDS:
        raise ValidationError(f"unknown plot kind {kind!r}; choose from {KINDS}")
    if kind == "signal":
        fig, header, rows = _signal(obj, fit)
    elif kind in ("regions", "surface"):
        fig, header, rows = _grid_plot(obj, kind, bounds, shape)
    elif kind == "scatter":
        fig, header, rows = _scatter(obj)
    else:
        fig, header, rows = _efficiency(obj)
    text = _table_text(header, rows)

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = stem or kind
    svg, txt = out_dir / f"{stem}.svg", out_dir / f"{stem}.txt"
    fig.tight_layout()
    with matplotlib.rc_context({"svg.hashsalt": "sloshsense", "svg.fonttype": "none"}):
        fig.savefig(svg, format="svg", metadata={"Date": None})
    txt.write_text(text, encoding="utf-8", newline="\n")
    return [svg, txt]


def read_plot_table(path: str | Path) -> tuple[list[str], list[list[str]]]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines:
        raise ValidationError(f"{path}: empty table")
    return lines[0].split("\t"), [ln.split("\t") for ln in lines[1:] if ln]
