"""Text container for trained models.

Layout::

    SLOSH-MODEL v1
    kind=gpr|quad|svm|xfer
    key=value
    ...

Floats are written with ``repr`` so a save/load round trip reproduces every
stored number exactly, and hence every prediction bit for bit.  Arrays are
comma-separated with a companion ``<name>.shape`` entry.  A transfer map
embeds its base model under the ``base.`` prefix; free-form metadata (for
example the target name) is stored under ``meta.``.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import ValidationError
from .formats import format_value, parse_float
from .models.gpr import GprModel
from .models.quad import QuadModel
from .models.svm import BinaryMachine, SvmModel
from .transfer import TransferMap

MAGIC = "SLOSH-MODEL v1"


def _put_array(out: dict, name: str, arr) -> None:
    arr = np.asarray(arr)
    out[f"{name}.shape"] = ",".join(str(s) for s in arr.shape)
    out[name] = ",".join(repr(float(v)) for v in arr.ravel())


def _get_array(d: dict, name: str, dtype=float) -> np.ndarray:
    try:
        shape_text, text = d[f"{name}.shape"], d[name]
    except KeyError as exc:
        raise ValidationError(f"model file lacks field {exc.args[0]!r}") from None
    shape = tuple(int(s) for s in shape_text.split(",") if s)
    values = [parse_float(v, name) for v in text.split(",")] if text else []
    arr = np.array(values, dtype=float)
    if arr.size != int(np.prod(shape)):
        raise ValidationError(f"{name}: {arr.size} values do not fill shape {shape}")
    return arr.reshape(shape).astype(dtype)


def _get_float(d: dict, name: str) -> float:
    if name not in d:
        raise ValidationError(f"model file lacks field {name!r}")
    return parse_float(d[name], name)


def _encode(model) -> dict[str, str]:
    out: dict[str, str] = {}
    if isinstance(model, GprModel):
        out["kind"] = "gpr"
        for name in ("X", "y", "length_scales", "x_mean", "x_std", "L", "alpha"):
            _put_array(out, name, getattr(model, name))
        for name in ("signal_var", "noise_var", "y_mean", "y_std", "jitter", "log_marginal_likelihood"):
            out[name] = format_value(float(getattr(model, name)))
    elif isinstance(model, QuadModel):
        out["kind"] = "quad"
        _put_array(out, "coef", model.coef)
    elif isinstance(model, SvmModel):
        out["kind"] = "svm"
        for name in ("X", "x_mean", "x_std"):
            _put_array(out, name, getattr(model, name))
        out["classes"] = ",".join(str(c) for c in model.classes)
        out["C"] = format_value(model.C)
        out["bandwidth"] = format_value(model.bandwidth)
        out["n_machines"] = str(len(model.machines))
        for k, m in enumerate(model.machines):
            p = f"machine{k}."
            out[p + "pos"], out[p + "neg"] = str(m.pos), str(m.neg)
            for name in ("support", "dual_coef", "alphas"):
                _put_array(out, p + name, getattr(m, name))
            out[p + "bias"] = format_value(m.bias)
            out[p + "kkt_residual"] = format_value(m.kkt_residual)
            out[p + "n_iter"] = str(m.n_iter)
    elif isinstance(model, TransferMap):
        out["kind"] = "xfer"
        for name in ("alpha1", "alpha2", "beta1", "beta2", "tune_mse", "identity_mse"):
            out[name] = format_value(float(getattr(model, name)))
        for key, value in _encode(model.base).items():
            out["base." + key] = value
    else:
        raise ValidationError(f"cannot serialize {type(model).__name__}")
    return out


def _decode(d: dict[str, str]):
    kind = d.get("kind")
    if kind == "gpr":
        return GprModel(
            X=_get_array(d, "X"), y=_get_array(d, "y"), length_scales=_get_array(d, "length_scales"),
            signal_var=_get_float(d, "signal_var"), noise_var=_get_float(d, "noise_var"),
            x_mean=_get_array(d, "x_mean"), x_std=_get_array(d, "x_std"),
            y_mean=_get_float(d, "y_mean"), y_std=_get_float(d, "y_std"),
            L=_get_array(d, "L"), alpha=_get_array(d, "alpha"), jitter=_get_float(d, "jitter"),
            log_marginal_likelihood=_get_float(d, "log_marginal_likelihood"),
        )
    if kind == "quad":
        coef = _get_array(d, "coef")
        if coef.shape != (6,):
            raise ValidationError("quadratic model needs 6 coefficients")
        return QuadModel(coef=coef)
    if kind == "svm":
        machines = []
        for k in range(int(_get_float(d, "n_machines"))):
            p = f"machine{k}."
            machines.append(BinaryMachine(
                pos=int(_get_float(d, p + "pos")), neg=int(_get_float(d, p + "neg")),
                support=_get_array(d, p + "support", dtype=int), dual_coef=_get_array(d, p + "dual_coef"),
                alphas=_get_array(d, p + "alphas"), bias=_get_float(d, p + "bias"),
                kkt_residual=_get_float(d, p + "kkt_residual"), n_iter=int(_get_float(d, p + "n_iter")),
            ))
        classes = tuple(int(c) for c in d.get("classes", "").split(",") if c)
        return SvmModel(X=_get_array(d, "X"), classes=classes, machines=tuple(machines),
                        C=_get_float(d, "C"), bandwidth=_get_float(d, "bandwidth"),
                        x_mean=_get_array(d, "x_mean"), x_std=_get_array(d, "x_std"))
    if kind == "xfer":
        base = {k[5:]: v for k, v in d.items() if k.startswith("base.")}
        return TransferMap(
            alpha1=_get_float(d, "alpha1"), alpha2=_get_float(d, "alpha2"),
            beta1=_get_float(d, "beta1"), beta2=_get_float(d, "beta2"), base=_decode(base),
            tune_mse=_get_float(d, "tune_mse"), identity_mse=_get_float(d, "identity_mse"),
        )
    raise ValidationError(f"unknown model kind {kind!r}")


def dumps_model(model, meta: dict | None = None) -> str:
    lines = [MAGIC]
    for key, value in _encode(model).items():
        lines.append(f"{key}={value}")
    for key, value in (meta or {}).items():
        lines.append(f"meta.{key}={format_value(value)}")
    return "\n".join(lines) + "\n"


def loads_model(text: str, with_meta: bool = False):
    lines = text.splitlines()
    if not lines or lines[0].strip() != MAGIC:
        raise ValidationError(f"not a model file (missing {MAGIC!r} header)")
    d: dict[str, str] = {}
    for lineno, line in enumerate(lines[1:], 2):
        if not line.strip():
            continue
        if "=" not in line:
            raise ValidationError(f"model line {lineno}: expected key=value")
        key, value = line.split("=", 1)
        d[key] = value
    meta = {k[5:]: v for k, v in d.items() if k.startswith("meta.")}
    model = _decode({k: v for k, v in d.items() if not k.startswith("meta.")})
    return (model, meta) if with_meta else model


def save_model(path: str | Path, model, meta: dict | None = None) -> None:
    Path(path).write_text(dumps_model(model, meta), encoding="utf-8", newline="\n")


def load_model(path: str | Path, with_meta: bool = False):
    return loads_model(Path(path).read_text(encoding="utf-8"), with_meta=with_meta)
