"""Command-line interface: ``sloshsense <command> [options]``.

Exit codes: 0 success, 1 invalid input, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import fields, replace
from pathlib import Path

import numpy as np

from .dataset import (BENCHMARKS, EvalReport, TaskSpec, build_items, extract_features, make_benchmark,
                      read_manifest, run_benchmark, run_transfer, subsample, sweep, write_manifest)
from .errors import NumericalError, ValidationError
from .fitting import FitConfig, fit, read_fit, write_fit
from .formats import parse_float, read_kv, read_table, write_table
from .modelio import load_model, save_model
from .models import GprModel, SvmModel, gpr_predict, gpr_train, quad_fit, regress, svm_predict, svm_train
from .pipeline import PipelineConfig, preprocess, read_signal, write_signal
from .plots import KINDS, emit_plotdata
from .sim import SimConfig, config_from_mapping, read_markers_csv, render_markers, simulate, write_config, write_markers_csv
from .transfer import transfer_fit


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # usage errors are input errors; keep exit code 2 for numerical failures
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _split_config(path: str | None) -> tuple[dict, dict, dict]:
    """Route keys of a key=value config file to SimConfig, PipelineConfig and FitConfig."""
    if path is None:
        return {}, {}, {}
    pairs = read_kv(path)
    names = [{f.name for f in fields(cls)} for cls in (SimConfig, PipelineConfig, FitConfig)]
    parts: tuple[dict, dict, dict] = ({}, {}, {})
    for key, value in pairs.items():
        for part, known in zip(parts, names):
            if key in known:
                part[key] = value
                break
        else:
            raise ValidationError(f"{path}: unknown config key {key!r}")
    return parts


def _typed(cls, pairs: dict, **overrides):
    kwargs = {}
    for f in fields(cls):
        if f.name in pairs:
            v = parse_float(pairs[f.name], f.name)
            kwargs[f.name] = int(v) if f.type in ("int", int) else v
    kwargs.update({k: v for k, v in overrides.items() if v is not None})
    return cls(**kwargs)


def _configs(args) -> tuple[PipelineConfig, FitConfig]:
    _, pipe, fitc = _split_config(args.config)
    pipe_cfg = _typed(PipelineConfig, pipe, cutoff_hz=getattr(args, "cutoff", None),
                      top_k=getattr(args, "top_k", None))
    fit_cfg = _typed(FitConfig, fitc, components=getattr(args, "components", None),
                     n_restarts=getattr(args, "restarts", None))
    return pipe_cfg, replace(fit_cfg, seed=args.seed)


def _source(text: str, seed: int):
    if Path(text).is_file():
        return read_manifest(text)
    if text in BENCHMARKS:
        return make_benchmark(text, seed)
    raise ValidationError(f"{text!r} is neither a manifest file nor a benchmark ({', '.join(BENCHMARKS)})")


def _out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _features_arg(args) -> np.ndarray:
    if args.features:
        header, data = read_table(args.features)
        if header[:2] != ["lambda", "omega"]:
            raise ValidationError(f"{args.features}: expected columns lambda,omega")
        return data[:, :2]
    if args.lam is None or args.omega is None:
        raise ValidationError("give --features FILE or both --lambda and --omega")
    return np.array([[args.lam, args.omega]])


# --- commands -----------------------------------------------------------------


def cmd_simulate(args) -> int:
    sim_pairs, _, _ = _split_config(args.config)
    cfg = config_from_mapping(sim_pairs)
    changes = {k: getattr(args, k) for k in ("L", "h", "gamma", "kappa", "eps0", "duration", "noise_std")
               if getattr(args, k) is not None}
    cfg = cfg.with_(**changes)
    trace = simulate(cfg)
    out = _out(args)
    write_markers_csv(out / "markers.csv", render_markers(trace, cfg, args.seed))
    write_table(out / "trace.csv", ["t", "eps", "deps", "fx", "energy"],
                [trace.t, trace.eps, trace.deps, trace.fx, trace.energy])
    write_config(out / "sim.cfg", cfg)
    print(f"wrote {out / 'markers.csv'} ({cfg.n_samples} samples, {cfg.n_markers} markers)")
    return 0


def cmd_preprocess(args) -> int:
    pipe_cfg, _ = _configs(args)
    sig = preprocess(read_markers_csv(args.markers), pipe_cfg)
    out = _out(args)
    write_signal(out / "signal.csv", sig, pipe_cfg)
    print(f"variance_ratio={sig.variance_ratio:.4f}")
    if sig.low_variance:
        print(f"warning: variance ratio below {pipe_cfg.min_variance_ratio}", file=sys.stderr)
    return 0


def cmd_fit(args) -> int:
    _, fit_cfg = _configs(args)
    result = fit(read_signal(args.signal), fit_cfg)
    out = _out(args)
    write_fit(out / "fit.txt", result)
    print(f"lambda={result.params.lam!r} omega={result.params.omega!r} converged={result.converged}")
    return 0 if result.converged else 2


def _items(args, split: str):
    pipe_cfg, fit_cfg = _configs(args)
    manifest = _source(args.source, args.seed)
    feats = extract_features(manifest, pipe_cfg, fit_cfg, args.workers)
    items, dropped = build_items(manifest, feats, split, args.container)
    if dropped:
        print(f"warning: {len(dropped)} trial groups had no converged fit", file=sys.stderr)
    if not items:
        raise ValidationError(f"no {split} items")
    return manifest, feats, items


def cmd_train(args) -> int:
    _, _, items = _items(args, "train")
    items = subsample(items, args.train_size, args.seed)
    X = np.array([it.features for it in items])
    if args.model == "svm":
        y = [it.label.class_id for it in items]
        if any(v is None for v in y):
            raise ValidationError("svm needs class_id labels")
        model, target = svm_train(X, np.array(y)), "class"
    else:
        target = args.target
        y = [it.label.get(target) for it in items]
        if any(v is None for v in y):
            raise ValidationError(f"missing {target!r} labels")
        y = np.array(y)
        model = gpr_train(X, y, seed=args.seed) if args.model == "gpr" else quad_fit(X, y)
    path = _out(args) / f"model_{target}.slm"
    save_model(path, model, meta={"target": target, "n_train": len(items)})
    print(f"wrote {path}")
    return 0


def cmd_predict(args, classify: bool = False) -> int:
    model, meta = load_model(args.model, with_meta=True)
    X = _features_arg(args)
    if classify or isinstance(model, SvmModel):
        if not isinstance(model, SvmModel):
            raise ValidationError("classify needs an svm model")
        pred = svm_predict(model, X)
        header, cols = ["lambda", "omega", "class_id"], [X[:, 0], X[:, 1], pred]
    elif isinstance(model, GprModel):
        mean, std = gpr_predict(model, X)
        header, cols = ["lambda", "omega", "mean", "std"], [X[:, 0], X[:, 1], mean, std]
    else:
        header, cols = ["lambda", "omega", "mean"], [X[:, 0], X[:, 1], regress(model, X)]
    for row in zip(*cols):
        print(",".join(repr(float(v)) for v in row))
    if args.features:
        write_table(_out(args) / "predictions.csv", header, cols)
    return 0


def cmd_transfer(args) -> int:
    base, meta = load_model(args.base, with_meta=True)
    target = meta.get("target", args.target)
    _, _, items = _items(args, "train")
    tune = subsample(items, args.n_tune, args.seed)
    X = np.array([it.features for it in tune])
    y = [it.label.get(target) for it in tune]
    if any(v is None for v in y):
        raise ValidationError(f"missing {target!r} labels")
    tmap = transfer_fit(base, X, np.array(y), seed=args.seed)
    path = _out(args) / f"xfer_{target}.slm"
    save_model(path, tmap, meta={"target": target, "n_tune": len(tune)})
    print(f"alpha1={tmap.alpha1!r} alpha2={tmap.alpha2!r} beta1={tmap.beta1!r} beta2={tmap.beta2!r}")
    print(f"tuning mse {tmap.tune_mse:.6g} (identity {tmap.identity_mse:.6g}); wrote {path}")
    return 0


def _task(args) -> TaskSpec:
    kind = "classification" if args.model == "svm" else "regression"
    targets = tuple(t for t in args.targets.split(",") if t)
    return TaskSpec(kind=kind, targets=targets, container=args.container,
                    train_size=getattr(args, "train_size", None))


def cmd_bench(args) -> int:
    pipe_cfg, fit_cfg = _configs(args)
    manifest = _source(args.source, args.seed)
    out = _out(args)
    if args.write_data:
        write_manifest(manifest, out / "data")
    feats = extract_features(manifest, pipe_cfg, fit_cfg, args.workers)
    if args.transfer_to:
        report = run_transfer(manifest, args.container, args.transfer_to, args.n_tune, args.seed,
                              targets=_task(args).targets, features=feats, pipe_cfg=pipe_cfg, fit_cfg=fit_cfg)
    else:
        report = run_benchmark(manifest, _task(args), args.model, args.seed, features=feats,
                               pipe_cfg=pipe_cfg, fit_cfg=fit_cfg)
    report.write(out / "report.json")
    for name, m in sorted(report.metrics.items()):
        print(name, " ".join(f"{k}={v:.6g}" for k, v in sorted(m.items())))
    return 0


def cmd_sweep(args) -> int:
    pipe_cfg, fit_cfg = _configs(args)
    manifest = _source(args.source, args.seed)
    sizes = [int(s) for s in args.sizes.split(",") if s]
    feats = extract_features(manifest, pipe_cfg, fit_cfg, args.workers)
    reports = sweep(manifest, _task(args), sizes, args.model, args.seed, features=feats,
                    pipe_cfg=pipe_cfg, fit_cfg=fit_cfg)
    out = _out(args)
    for n, r in zip(sizes, reports):
        r.write(out / f"sweep_{n:04d}.json")
        print(n, " ".join(f"{t}:mae={m['mae']:.6g}" for t, m in sorted(r.metrics.items()) if "mae" in m))
    return 0


def cmd_plot(args) -> int:
    bounds = None
    if args.bounds:
        b = [parse_float(v, "bounds") for v in args.bounds.split(",")]
        if len(b) != 4:
            raise ValidationError("--bounds needs lam_min,lam_max,omega_min,omega_max")
        bounds = ((b[0], b[1]), (b[2], b[3]))
    inputs = args.inputs
    fit_result = read_fit(args.fit) if args.fit else None
    if args.kind == "signal":
        obj = read_signal(inputs[0])
    elif args.kind in ("regions", "surface"):
        obj = load_model(inputs[0])
    elif args.kind == "scatter":
        obj = EvalReport.read(inputs[0])
    else:
        obj = [EvalReport.read(p) for p in inputs]
    for p in emit_plotdata(obj, args.kind, _out(args), fit=fit_result, bounds=bounds):
        print(f"wrote {p}")
    return 0


# --- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    common.add_argument("--config", help="key=value file with simulator, pipeline or fit settings")
    common.add_argument("--out", default=".", help="output directory (default: current)")

    p = _Parser(prog="sloshsense", description="Liquid property estimation from tactile sloshing signals.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", parents=[common], help="simulate a recording and render marker CSV")
    for name in ("L", "h", "gamma", "kappa", "eps0", "duration"):
        s.add_argument(f"--{name}", type=float)
    s.add_argument("--noise-std", dest="noise_std", type=float)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("preprocess", parents=[common], help="marker CSV -> principal signal")
    s.add_argument("markers")
    s.add_argument("--cutoff", type=float, help="low-pass cutoff in Hz")
    s.add_argument("--top-k", dest="top_k", type=int, help="number of markers kept")
    s.set_defaults(func=cmd_preprocess)

    s = sub.add_parser("fit", parents=[common], help="fit the damped-oscillation model to a signal")
    s.add_argument("signal")
    s.add_argument("--components", type=int, choices=(1, 2))
    s.add_argument("--restarts", type=int)
    s.set_defaults(func=cmd_fit)

    def data_args(s):
        s.add_argument("source", help="manifest file or benchmark name")
        s.add_argument("--container", help="restrict to one container id")
        s.add_argument("--workers", type=int, default=1, help="processes used to fit recordings (default 1)")

    s = sub.add_parser("train", parents=[common], help="train a property model on a manifest")
    data_args(s)
    s.add_argument("--target", default="h", choices=("h", "c", "mu"))
    s.add_argument("--model", default="gpr", choices=("gpr", "quad", "svm"))
    s.add_argument("--train-size", dest="train_size", type=int)
    s.set_defaults(func=cmd_train)

    for name, classify in (("predict", False), ("classify", True)):
        s = sub.add_parser(name, parents=[common], help=f"{name} from (lambda, omega) features")
        s.add_argument("model", help="model file")
        s.add_argument("--features", help="CSV with lambda,omega columns")
        s.add_argument("--lambda", dest="lam", type=float)
        s.add_argument("--omega", type=float)
        s.set_defaults(func=lambda a, c=classify: cmd_predict(a, classify=c))

    s = sub.add_parser("transfer", parents=[common], help="fit a feature warp for a new container")
    s.add_argument("base", help="model trained on the source container")
    data_args(s)
    s.add_argument("--n-tune", dest="n_tune", type=int, default=15)
    s.add_argument("--target", default="h", choices=("h", "c", "mu"))
    s.set_defaults(func=cmd_transfer)

    for name, func in (("bench", cmd_bench), ("sweep", cmd_sweep)):
        s = sub.add_parser(name, parents=[common], help=f"run an evaluation {name}")
        data_args(s)
        s.add_argument("--model", default="gpr", choices=("gpr", "quad", "svm"))
        s.add_argument("--targets", default="h,c,mu")
        if name == "bench":
            s.add_argument("--train-size", dest="train_size", type=int)
            s.add_argument("--transfer-to", dest="transfer_to", help="evaluate transfer to this container")
            s.add_argument("--n-tune", dest="n_tune", type=int, default=15)
            s.add_argument("--write-data", action="store_true", help="also write manifest and recordings")
        else:
            s.add_argument("--sizes", default="10,20,30,40,50,60,70,80,90,100")
        s.set_defaults(func=func)

    s = sub.add_parser("plot", parents=[common], help="write figure SVG and data table")
    s.add_argument("kind", choices=KINDS)
    s.add_argument("inputs", nargs="+", help="signal CSV, model file, or report JSON(s)")
    s.add_argument("--fit", help="fit file to overlay on a signal plot")
    s.add_argument("--bounds", help="lam_min,lam_max,omega_min,omega_max for grid plots")
    s.set_defaults(func=cmd_plot)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, UnicodeDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
