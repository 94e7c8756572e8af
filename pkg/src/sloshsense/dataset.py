"""Benchmark manifests, synthetic dataset generation and the evaluation harness.

A manifest lists recordings with their labels, the container they were taken
in, the trial group (recordings of one physical setup) and the split.  On
disk it is a tab-separated file::

    #container<TAB>id=grooved<TAB>L=0.1<TAB>shape=grooved<TAB>groove_amp=0.03<TAB>groove_period=0.03
    path<TAB>container<TAB>group<TAB>split<TAB>h<TAB>c<TAB>mu<TAB>class_id
    rec/grooved/train_000_t0.csv<TAB>grooved<TAB>train_000<TAB>train<TAB>16.0<TAB>0.0<TAB>0.04139...<TAB>

with recording paths relative to the manifest's directory and empty cells
for absent labels.

Synthetic liquids
-----------------
The generators below turn a sugar concentration ``c`` (wt%) into simulator
damping through two modelling choices (they are calibration constants of
this package, not measured values):

* kinematic viscosity grows exponentially with concentration,
  ``nu(c) = NU_WATER * exp(c / C_NU)``, from 1.1 cSt for water to
  ``NU_AT_CMAX`` at ``C_MAX``, so ``mu = log10(nu)`` is linear in ``c``;
* damping follows a boundary-layer law ``gamma ~ sqrt(nu)`` with extra bottom
  friction in shallow fills,
  ``gamma(c, h) = GAMMA_WATER * sqrt(nu(c) / NU_WATER) * (1 + H_FRICTION / h)``.

The "grooved" container modulates its effective length with fill height,
``L_eff(h) = L * (1 + a * sin(2 pi h / P))``, which makes the height map
``h(lambda, omega)`` leave the span of a quadratic model.
"""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import NumericalError, ValidationError
from .fitting import FitConfig, FitResult, fit
from .models import gpr_train, quad_fit, regress, svm_predict, svm_train, viscosity_to_mu
from .pipeline import PipelineConfig, preprocess
from .sim import MarkerSeries, SimConfig, read_markers_csv, render_markers, simulate, write_markers_csv
from .transfer import transfer_fit

NU_WATER = 1.1  # cSt
NU_AT_CMAX = 62.6  # cSt
C_MAX = 160.0  # wt%
C_NU = C_MAX / math.log(NU_AT_CMAX / NU_WATER)
GAMMA_WATER = 0.3  # 1/s, deep-fill damping of water
H_FRICTION = 0.01  # m
NOISE_FRACTION = 0.01  # marker noise std relative to peak |F_x|

TARGETS = ("h", "c", "mu")
SPLITS = ("train", "test")


# --- liquid and container models ---------------------------------------------


def viscosity_of(c: float) -> float:
    """Synthetic kinematic viscosity (cSt) of a sugar solution at ``c`` wt%."""
    return NU_WATER * math.exp(c / C_NU)


def damping_of(c: float, h: float) -> float:
    """Synthetic linear damping (1/s) at concentration ``c`` and fill ``h`` (m)."""
    return GAMMA_WATER * math.sqrt(viscosity_of(c) / NU_WATER) * (1.0 + H_FRICTION / h)


@dataclass(frozen=True)
class Container:
    id: str
    L: float
    shape: str = "smooth"
    groove_amp: float = 0.0
    groove_period: float = 0.03

    def __post_init__(self):
        if not self.id or any(ch in self.id for ch in "\t\n="):
            raise ValidationError(f"bad container id {self.id!r}")
        if not self.L > 0:
            raise ValidationError("container L must be positive")
        if not (0 <= self.groove_amp < 0.5 and self.groove_period > 0):
            raise ValidationError("groove_amp must lie in [0, 0.5) and groove_period be positive")

    def effective_length(self, h: float) -> float:
        return self.L * (1.0 + self.groove_amp * math.sin(2.0 * math.pi * h / self.groove_period))


@dataclass(frozen=True)
class LiquidLabel:
    h: float | None = None  # mm
    c: float | None = None  # wt%
    mu: float | None = None  # log10 cSt
    class_id: int | None = None

    def __post_init__(self):
        if self.h is not None and not self.h > 0:
            raise ValidationError("h must be positive")
        if self.c is not None and not self.c >= 0:
            raise ValidationError("c must be non-negative")

    def get(self, target: str) -> float | None:
        if target not in TARGETS:
            raise ValidationError(f"unknown target {target!r}")
        return getattr(self, target)


@dataclass(frozen=True)
class Entry:
    path: str
    container: str
    group: str
    split: str
    label: LiquidLabel
    series: MarkerSeries | None = field(default=None, repr=False, compare=False)


@dataclass
class Manifest:
    containers: dict[str, Container]
    entries: list[Entry]
    root: Path = Path(".")

    def __post_init__(self):
        seen = set()
        for e in self.entries:
            if e.container not in self.containers:
                raise ValidationError(f"{e.path}: unknown container {e.container!r}")
            if e.split not in SPLITS:
                raise ValidationError(f"{e.path}: split must be train or test")
            if e.path in seen:
                raise ValidationError(f"duplicate recording path {e.path}")
            seen.add(e.path)
        splits_of: dict[str, set] = {}
        for e in self.entries:
            splits_of.setdefault(e.group, set()).add(e.split)
        mixed = [g for g, s in splits_of.items() if len(s) > 1]
        if mixed:
            raise ValidationError(f"trial groups span train and test: {mixed[:3]}")

    def groups(self, split: str | None = None, container: str | None = None) -> dict[str, list[Entry]]:
        """Trial groups in first-appearance order."""
        out: dict[str, list[Entry]] = {}
        for e in self.entries:
            if (split is None or e.split == split) and (container is None or e.container == container):
                out.setdefault(e.group, []).append(e)
        return out

    def load_series(self, entry: Entry) -> MarkerSeries:
        if entry.series is not None:
            return entry.series
        return read_markers_csv(self.root / entry.path)

    def dumps(self) -> str:
        lines = []
        for c in self.containers.values():
            lines.append("\t".join(["#container", f"id={c.id}", f"L={c.L!r}", f"shape={c.shape}",
                                    f"groove_amp={c.groove_amp!r}", f"groove_period={c.groove_period!r}"]))
        lines.append("\t".join(["path", "container", "group", "split", *TARGETS, "class_id"]))
        for e in self.entries:
            cells = [e.path, e.container, e.group, e.split]
            cells += ["" if v is None else repr(float(v)) for v in (e.label.h, e.label.c, e.label.mu)]
            cells.append("" if e.label.class_id is None else str(e.label.class_id))
            lines.append("\t".join(cells))
        return "\n".join(lines) + "\n"


def write_manifest(manifest: Manifest, out_dir: str | Path, name: str = "manifest.tsv") -> Path:
    """Write the manifest and every in-memory recording under ``out_dir``."""
    out_dir = Path(out_dir)
    for e in manifest.entries:
        target = out_dir / e.path
        target.parent.mkdir(parents=True, exist_ok=True)
        write_markers_csv(target, manifest.load_series(e))
    path = out_dir / name
    path.write_text(manifest.dumps(), encoding="utf-8", newline="\n")
    return path


def _opt_float(text: str, what: str) -> float | None:
    if text == "":
        return None
    try:
        return float(text)
    except ValueError:
        raise ValidationError(f"{what}: not a number: {text!r}") from None


def parse_manifest(text: str, root: str | Path = ".", check_paths: bool = True) -> Manifest:
    root = Path(root)
    containers: dict[str, Container] = {}
    entries: list[Entry] = []
    header_seen = False
    for lineno, raw in enumerate(text.splitlines(), 1):
        if not raw.strip():
            continue
        cells = raw.split("\t")
        if cells[0] == "#container":
            kv = dict(c.split("=", 1) for c in cells[1:] if "=" in c)
            try:
                cont = Container(id=kv["id"], L=float(kv["L"]), shape=kv.get("shape", "smooth"),
                                 groove_amp=float(kv.get("groove_amp", 0.0)),
                                 groove_period=float(kv.get("groove_period", 0.03)))
            except (KeyError, ValueError) as exc:
                raise ValidationError(f"manifest line {lineno}: bad container block ({exc})") from None
            containers[cont.id] = cont
            continue
        if raw.startswith("#"):
            continue
        if not header_seen:
            if cells != ["path", "container", "group", "split", *TARGETS, "class_id"]:
                raise ValidationError(f"manifest line {lineno}: unexpected column header")
            header_seen = True
            continue
        if len(cells) != 8:
            raise ValidationError(f"manifest line {lineno}: expected 8 fields, got {len(cells)}")
        path, cont, group, split, h, c, mu, cls = cells
        where = f"manifest line {lineno}"
        label = LiquidLabel(h=_opt_float(h, where), c=_opt_float(c, where), mu=_opt_float(mu, where),
                            class_id=None if cls == "" else int(cls))
        if check_paths and not (root / path).is_file():
            raise ValidationError(f"{where}: recording {path} not found")
        entries.append(Entry(path=path, container=cont, group=group, split=split, label=label))
    if not header_seen:
        raise ValidationError("manifest has no column header")
    return Manifest(containers=containers, entries=entries, root=root)


def read_manifest(path: str | Path) -> Manifest:
    path = Path(path)
    return parse_manifest(path.read_text(encoding="utf-8"), root=path.parent)


# --- synthetic benchmark generation -------------------------------------------


def _recording(cont: Container, h_m: float, gamma: float, rng: np.random.Generator,
               duration: float = 13.0) -> MarkerSeries:
    """Simulate and render one noisy recording with random amplitude and slip."""
    cfg = SimConfig(L=cont.effective_length(h_m), h=h_m, gamma=gamma,
                    eps0=float(rng.uniform(0.002, 0.004)), duration=duration)
    trace = simulate(cfg)
    peak = float(np.max(np.abs(trace.fx)))
    slip = (float(rng.uniform(-1, 1)) * 0.002 * peak / duration**2,
            float(rng.uniform(-1, 1)) * 0.01 * peak / duration,
            float(rng.uniform(-1, 1)) * 0.02 * peak)
    cfg = cfg.with_(noise_std=NOISE_FRACTION * peak, slip=slip)
    return render_markers(trace, cfg, seed=int(rng.integers(2**31)))


def _property_entries(cont: Container, heights_mm: Sequence[float], concentrations: Sequence[float],
                      split: str, trials: int, rng: np.random.Generator) -> list[Entry]:
    out = []
    for ci, c in enumerate(concentrations):
        for hi, h_mm in enumerate(heights_mm):
            group = f"{cont.id}_{split}_c{ci:02d}_h{hi:02d}"
            h_m = h_mm / 1000.0
            label = LiquidLabel(h=float(h_mm), c=float(c), mu=viscosity_to_mu(viscosity_of(c)))
            for k in range(trials):
                series = _recording(cont, h_m, damping_of(c, h_m), rng)
                out.append(Entry(path=f"rec/{group}_t{k}.csv", container=cont.id, group=group,
                                 split=split, label=label, series=series))
    return out


TRAIN_C = tuple(float(c) for c in range(0, 161, 20))  # 9 levels
TEST_C = tuple(float(c) for c in range(10, 151, 20))  # 8 levels


def property_benchmark(containers: Iterable[Container], heights_mm: Sequence[float], seed: int = 0,
                       test_trials: int = 3, train_only: Sequence[str] = ()) -> Manifest:
    """Concentration x height grid: one trial per training setup, ``test_trials`` per test setup.

    Containers listed in ``train_only`` get no test split.
    """
    containers = list(containers)
    entries: list[Entry] = []
    for k, cont in enumerate(containers):
        rng = np.random.default_rng([seed, k])
        entries += _property_entries(cont, heights_mm, TRAIN_C, "train", 1, rng)
        if cont.id not in train_only:
            entries += _property_entries(cont, heights_mm, TEST_C, "test", test_trials, rng)
    return Manifest(containers={c.id: c for c in containers}, entries=entries)


def grooved_benchmark(seed: int = 0) -> Manifest:
    """Grooved container, 12 fills from 16 to 40 mm: 108 training setups, 96 test setups."""
    cont = Container("grooved", L=0.10, shape="grooved", groove_amp=0.03, groove_period=0.03)
    return property_benchmark([cont], np.linspace(16.0, 40.0, 12), seed)


def cylinder_benchmark(seed: int = 0) -> Manifest:
    """Smooth container, 13 fills from 12 to 35 mm: 117 training setups, 104 test setups."""
    return property_benchmark([Container("cylinder", L=0.08)], np.linspace(12.0, 35.0, 13), seed)


def transfer_benchmark(seed: int = 0, scale: float = 1.25) -> Manifest:
    """Two smooth containers, B ``scale`` times wider than A, same fills and liquids.

    A only needs training data (it hosts the base model); B has both splits.
    """
    conts = [Container("A", L=0.10), Container("B", L=0.10 * scale)]
    return property_benchmark(conts, np.linspace(16.0, 40.0, 12), seed, train_only=("A",))


LIQUID_CLASSES = {0: 0.2, 1: 2.0, 2: 8.0}  # class id -> damping gamma (1/s)


def liquids_benchmark(seed: int = 0, n_train: int = 8, n_test: int = 70,
                      container_height: float = 0.06) -> Manifest:
    """Three liquids of very different damping; fills span 1/3 to 2/3 of the container."""
    cont = Container("liquids", L=0.10)
    lo, hi = container_height / 3.0, 2.0 * container_height / 3.0
    entries: list[Entry] = []
    for cls, gamma in LIQUID_CLASSES.items():
        rng = np.random.default_rng([seed, 100 + cls])
        plan = [("train", h) for h in np.linspace(lo, hi, n_train)]
        plan += [("test", h) for h in rng.uniform(lo, hi, n_test)]
        counters = {"train": 0, "test": 0}
        for split, h_m in plan:
            k = counters[split]
            counters[split] += 1
            group = f"liquid{cls}_{split}_{k:03d}"
            label = LiquidLabel(h=float(h_m * 1000.0), class_id=cls)
            entries.append(Entry(path=f"rec/{group}.csv", container=cont.id, group=group, split=split,
                                 label=label, series=_recording(cont, float(h_m), gamma, rng)))
    return Manifest(containers={cont.id: cont}, entries=entries)


BENCHMARKS = {
    "grooved": grooved_benchmark,
    "cylinder": cylinder_benchmark,
    "transfer": transfer_benchmark,
    "liquids": liquids_benchmark,
}


def make_benchmark(name: str, seed: int = 0) -> Manifest:
    if name not in BENCHMARKS:
        raise ValidationError(f"unknown benchmark {name!r}; choose from {sorted(BENCHMARKS)}")
    return BENCHMARKS[name](seed)


# --- features -----------------------------------------------------------------


def _fit_series(args) -> FitResult:
    series, pipe_cfg, fit_cfg = args
    return fit(preprocess(series, pipe_cfg), fit_cfg)


def extract_features(manifest: Manifest, pipe_cfg: PipelineConfig = PipelineConfig(),
                     fit_cfg: FitConfig = FitConfig(), workers: int = 1) -> dict[str, FitResult]:
    """Preprocess and fit every recording; keyed by recording path.

    With ``workers > 1`` recordings are fitted in separate processes.  Each
    fit depends only on its own recording, so the result is the same for any
    number of workers.
    """
    jobs = ((manifest.load_series(e), pipe_cfg, fit_cfg) for e in manifest.entries)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_fit_series, jobs, chunksize=8))
    else:
        results = [_fit_series(job) for job in jobs]
    return {e.path: r for e, r in zip(manifest.entries, results)}


def average_trials(group: Sequence[FitResult]) -> tuple[float, float]:
    """Mean (lambda, omega) over the converged results of one setup."""
    ok = [r for r in group if r.converged]
    if not ok:
        raise NumericalError("no converged fit in trial group")
    return (float(np.mean([r.params.lam for r in ok])), float(np.mean([r.params.omega for r in ok])))


@dataclass(frozen=True)
class Item:
    group: str
    container: str
    features: tuple[float, float]
    label: LiquidLabel


def build_items(manifest: Manifest, features: dict[str, FitResult], split: str,
                container: str | None = None) -> tuple[list[Item], list[str]]:
    """Average each trial group; returns (items, dropped group ids)."""
    items, dropped = [], []
    for gid, members in manifest.groups(split, container).items():
        try:
            feat = average_trials([features[e.path] for e in members])
        except NumericalError:
            dropped.append(gid)
            continue
        items.append(Item(group=gid, container=members[0].container, features=feat, label=members[0].label))
    return items, dropped


def subsample(items: Sequence[Item], size: int | None, seed: int) -> list[Item]:
    """Uniform random subset (without replacement), kept in original order."""
    if size is None or size >= len(items):
        return list(items)
    if size < 1:
        raise ValidationError("training subset size must be positive")
    idx = np.sort(np.random.default_rng(seed).choice(len(items), size=size, replace=False))
    return [items[i] for i in idx]


# --- evaluation ---------------------------------------------------------------


@dataclass(frozen=True)
class TaskSpec:
    """What to learn: regression targets or liquid classes, on which container."""

    kind: str = "regression"  # or "classification"
    targets: tuple[str, ...] = TARGETS
    container: str | None = None
    train_size: int | None = None

    def __post_init__(self):
        if self.kind not in ("regression", "classification"):
            raise ValidationError("task kind must be regression or classification")
        for t in self.targets:
            if t not in TARGETS:
                raise ValidationError(f"unknown target {t!r}")


@dataclass
class EvalReport:
    task: str
    model: str
    seed: int
    sizes: dict
    fingerprint: str
    metrics: dict = field(default_factory=dict)  # target -> {mae, mse, range, ...}
    classes: list = field(default_factory=list)
    confusion: list = field(default_factory=list)  # rows: true class, columns: predicted
    predictions: list = field(default_factory=list)  # rows: {group, target, truth, pred}
    extra: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=1) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "EvalReport":
        try:
            return cls(**json.loads(text))
        except (TypeError, json.JSONDecodeError) as exc:
            raise ValidationError(f"not an evaluation report: {exc}") from None

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8", newline="\n")

    @classmethod
    def read(cls, path: str | Path) -> "EvalReport":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))

    @property
    def is_empty(self) -> bool:
        return not self.predictions


def fingerprint(*parts) -> str:
    h = hashlib.sha256()
    for p in parts:
        h.update(repr(p).encode("utf-8"))
        h.update(b"\0")
    return h.hexdigest()[:16]


def _xy(items: Sequence[Item], target: str) -> tuple[np.ndarray, np.ndarray]:
    values = [it.label.get(target) for it in items]
    if any(v is None for v in values):
        raise ValidationError(f"missing {target!r} labels")
    return np.array([it.features for it in items], dtype=float), np.array(values, dtype=float)


def train_regressor(kind: str, X: np.ndarray, y: np.ndarray, seed: int = 0):
    if kind == "gpr":
        return gpr_train(X, y, seed=seed)
    if kind == "quad":
        return quad_fit(X, y)
    raise ValidationError(f"unknown regression model {kind!r} (gpr or quad)")


def _regression_metrics(truth: np.ndarray, pred: np.ndarray, span: float) -> dict:
    err = pred - truth
    mae = float(np.mean(np.abs(err)))
    return {"mae": mae, "mse": float(np.mean(err * err)), "range": span,
            "mae_fraction": mae / span if span > 0 else float("nan")}


def evaluate(train: Sequence[Item], test: Sequence[Item], task: TaskSpec, model: str, seed: int,
             fp: str, dropped: Sequence[str] = ()) -> EvalReport:
    """Train on ``train`` items and score on ``test`` items."""
    if not train or not test:
        raise ValidationError("empty training or test set")
    report = EvalReport(task=task.kind, model=model, seed=seed, fingerprint=fp,
                        sizes={"n_train": len(train), "n_test": len(test), "n_dropped": len(dropped)})
    if task.kind == "classification":
        if model != "svm":
            raise ValidationError("classification uses the svm model")
        X = np.array([it.features for it in train])
        labels = [it.label.class_id for it in train]
        if any(v is None for v in labels) or any(it.label.class_id is None for it in test):
            raise ValidationError("missing class_id labels")
        svm = svm_train(X, np.array(labels))
        pred = svm_predict(svm, np.array([it.features for it in test]))
        truth = np.array([it.label.class_id for it in test])
        classes = sorted(set(labels) | set(truth.tolist()))
        index = {c: i for i, c in enumerate(classes)}
        confusion = [[0] * len(classes) for _ in classes]
        for t, p in zip(truth, pred):
            confusion[index[int(t)]][index[int(p)]] += 1
        report.classes = classes
        report.confusion = confusion
        report.metrics["class"] = {"accuracy": float(np.mean(pred == truth))}
        report.predictions = [{"group": it.group, "target": "class", "truth": int(t), "pred": int(p)}
                              for it, t, p in zip(test, truth, pred)]
        return report

    for target in task.targets:
        Xtr, ytr = _xy(train, target)
        Xte, yte = _xy(test, target)
        reg = train_regressor(model, Xtr, ytr, seed)
        pred = regress(reg, Xte)
        span = float(max(ytr.max(), yte.max()) - min(ytr.min(), yte.min()))
        report.metrics[target] = _regression_metrics(yte, pred, span)
        report.predictions += [{"group": it.group, "target": target, "truth": float(t), "pred": float(p)}
                               for it, t, p in zip(test, yte, pred)]
    return report


def run_benchmark(manifest: Manifest, task: TaskSpec, model: str = "gpr", seed: int = 0,
                  features: dict[str, FitResult] | None = None,
                  pipe_cfg: PipelineConfig = PipelineConfig(), fit_cfg: FitConfig = FitConfig()) -> EvalReport:
    """Preprocess, fit, average trials, train, predict, score.

    ``features`` may carry fits computed earlier by :func:`extract_features`
    on the same manifest, which lets sweeps reuse them.
    """
    if features is None:
        features = extract_features(manifest, pipe_cfg, fit_cfg)
    train, d1 = build_items(manifest, features, "train", task.container)
    test, d2 = build_items(manifest, features, "test", task.container)
    train = subsample(train, task.train_size, seed)
    fp = fingerprint(manifest.dumps(), task, model, seed, pipe_cfg, fit_cfg)
    return evaluate(train, test, task, model, seed, fp, dropped=d1 + d2)


def sweep(manifest: Manifest, task: TaskSpec, sizes: Sequence[int], model: str = "gpr", seed: int = 0,
          features: dict[str, FitResult] | None = None, **cfgs) -> list[EvalReport]:
    """One report per training-subset size."""
    if features is None:
        features = extract_features(manifest, cfgs.get("pipe_cfg", PipelineConfig()),
                                    cfgs.get("fit_cfg", FitConfig()))
    return [run_benchmark(manifest, replace(task, train_size=int(n)), model, seed, features, **cfgs)
            for n in sizes]


def run_transfer(manifest: Manifest, source: str, target: str, n_tune: int, seed: int = 0,
                 targets: Sequence[str] = TARGETS, features: dict[str, FitResult] | None = None,
                 pipe_cfg: PipelineConfig = PipelineConfig(), fit_cfg: FitConfig = FitConfig()) -> EvalReport:
    """Warp a GPR trained on ``source`` to ``target`` using ``n_tune`` tuning setups.

    The report's metrics score the warped model on the target's test split;
    ``extra`` records the fitted warp and the MAE of a GPR trained from
    scratch on the same tuning setups.
    """
    if features is None:
        features = extract_features(manifest, pipe_cfg, fit_cfg)
    base_items, _ = build_items(manifest, features, "train", source)
    pool, d1 = build_items(manifest, features, "train", target)
    test, d2 = build_items(manifest, features, "test", target)
    tune = subsample(pool, n_tune, seed)
    if len(tune) < 4:
        raise ValidationError("transfer needs at least 4 tuning setups")
    fp = fingerprint(manifest.dumps(), "transfer", source, target, n_tune, seed, pipe_cfg, fit_cfg)
    report = EvalReport(task="transfer", model="xfer", seed=seed, fingerprint=fp,
                        sizes={"n_base": len(base_items), "n_tune": len(tune), "n_test": len(test),
                               "n_dropped": len(d1) + len(d2)})
    for t in targets:
        Xb, yb = _xy(base_items, t)
        Xt, yt = _xy(tune, t)
        Xe, ye = _xy(test, t)
        base = gpr_train(Xb, yb, seed=seed)
        tmap = transfer_fit(base, Xt, yt, seed=seed)
        scratch = gpr_train(Xt, yt, seed=seed)
        pred = tmap.predict_mean(Xe)
        span = float(max(yb.max(), ye.max()) - min(yb.min(), ye.min()))
        report.metrics[t] = _regression_metrics(ye, pred, span)
        scratch_pred = regress(scratch, Xe)
        report.extra[t] = {
            "alpha1": tmap.alpha1, "alpha2": tmap.alpha2, "beta1": tmap.beta1, "beta2": tmap.beta2,
            "tune_mse": tmap.tune_mse, "identity_mse": tmap.identity_mse,
            "mae_scratch": float(np.mean(np.abs(scratch_pred - ye))),
            "mae_base": float(np.mean(np.abs(regress(base, Xe) - ye))),
        }
        report.predictions += [{"group": it.group, "target": t, "truth": float(a), "pred": float(b)}
                               for it, a, b in zip(test, ye, pred)]
    return report
