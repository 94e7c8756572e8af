import json

import numpy as np
import pytest

from sloshsense.dataset import (
    C_MAX, NU_AT_CMAX, NU_WATER, Container, Entry, EvalReport, Item, LiquidLabel, Manifest, TaskSpec,
    average_trials, build_items, damping_of, evaluate, extract_features, liquids_benchmark, parse_manifest,
    read_manifest, run_benchmark, subsample, sweep, viscosity_of, write_manifest,
)
from sloshsense.errors import NumericalError, ValidationError
from sloshsense.fitting import FitParams, FitResult
from sloshsense.models import gpr_train, regress, viscosity_to_mu


def result(lam, omega, converged=True):
    return FitResult(params=FitParams(lam=lam, omega=omega), loss=0.0, converged=converged, n_restarts_used=1)


def small_manifest(seed=0):
    return liquids_benchmark(seed, n_train=3, n_test=2)


# --- trial averaging -------------------------------------------------------------


def test_average_of_single_result_is_itself():
    assert average_trials([result(0.37, 18.2)]) == (0.37, 18.2)


def test_average_is_arithmetic_mean():
    lam, omega = average_trials([result(0.4, 18.0), result(0.5, 19.0), result(0.6, 20.0)])
    assert lam == pytest.approx(0.5, abs=1e-15) and omega == pytest.approx(19.0, abs=1e-12)


def test_non_converged_member_is_skipped():
    lam, omega = average_trials([result(0.4, 18.0), result(9.0, 3.0, converged=False), result(0.6, 20.0)])
    assert lam == pytest.approx(0.5) and omega == pytest.approx(19.0)


def test_all_non_converged_raises():
    with pytest.raises(NumericalError):
        average_trials([result(0.4, 18.0, converged=False)])


def test_build_items_drops_groups_without_converged_fit():
    m = small_manifest()
    feats = {e.path: result(0.1 * (i + 1), 18.0, converged=(i != 0)) for i, e in enumerate(m.entries)}
    items, dropped = build_items(m, feats, "train")
    assert dropped == [m.entries[0].group]
    assert len(items) == len(m.groups("train")) - 1


# --- synthetic liquids -----------------------------------------------------------


def test_viscosity_curve_end_points_and_log_linearity():
    assert viscosity_of(0.0) == pytest.approx(NU_WATER)
    assert viscosity_of(C_MAX) == pytest.approx(NU_AT_CMAX)
    mus = [viscosity_to_mu(viscosity_of(c)) for c in (0, 40, 80, 120, 160)]
    assert np.allclose(np.diff(mus), mus[1] - mus[0])


def test_damping_grows_with_concentration_and_shallow_fill():
    assert damping_of(80, 0.03) > damping_of(0, 0.03)
    assert damping_of(0, 0.015) > damping_of(0, 0.04)
    assert damping_of(0, 1e9) == pytest.approx(0.3)


# --- manifests -------------------------------------------------------------------


def test_manifest_round_trip(tmp_path):
    m = small_manifest()
    path = write_manifest(m, tmp_path)
    back = read_manifest(path)
    assert back.containers == m.containers
    assert back.entries == m.entries  # series are not compared
    assert back.dumps() == m.dumps()
    e = m.entries[3]
    assert np.array_equal(back.load_series(back.entries[3]).disp, m.load_series(e).disp)


def test_manifest_missing_recording_rejected(tmp_path):
    path = write_manifest(small_manifest(), tmp_path)
    (tmp_path / small_manifest().entries[0].path).unlink()
    with pytest.raises(ValidationError):
        read_manifest(path)


def test_manifest_format_is_tab_separated_with_container_block():
    text = small_manifest().dumps()
    lines = text.splitlines()
    assert lines[0].startswith("#container\tid=liquids\tL=0.1")
    assert lines[1] == "path\tcontainer\tgroup\tsplit\th\tc\tmu\tclass_id"
    assert all(len(line.split("\t")) == 8 for line in lines[2:])


@pytest.mark.parametrize("bad", [
    "path\tcontainer\tgroup\tsplit\th\tc\tmu\tclass_id\nr.csv\tX\tg\ttrain\t1\t\t\t\n",  # unknown container
    "#container\tid=A\tL=0.1\npath\tcontainer\tgroup\tsplit\th\tc\tmu\tclass_id\nr.csv\tA\tg\tval\t1\t\t\t\n",
    "#container\tid=A\tL=0.1\npath\tcontainer\tgroup\tsplit\th\tc\tmu\tclass_id\nr.csv\tA\tg\ttrain\t1\t\t\n",
    "#container\tid=A\tL=0.1\npath\tcontainer\tgroup\tsplit\th\tc\tmu\tclass_id\nr.csv\tA\tg\ttrain\tx\t\t\t\n",
    "#container\tid=A\tL=0.1\nr.csv\tA\tg\ttrain\t1\t\t\t\n",  # no header
    "#container\tid=A\npath\tcontainer\tgroup\tsplit\th\tc\tmu\tclass_id\n",  # no L
])
def test_malformed_manifests_rejected(bad):
    with pytest.raises(ValidationError):
        parse_manifest(bad, check_paths=False)


def test_manifest_invariants():
    cont = {"A": Container("A", 0.1)}
    lab = LiquidLabel(h=20.0)
    with pytest.raises(ValidationError):
        Manifest(cont, [Entry("a.csv", "A", "g", "train", lab), Entry("a.csv", "A", "h", "train", lab)])
    with pytest.raises(ValidationError):
        Manifest(cont, [Entry("a.csv", "A", "g", "train", lab), Entry("b.csv", "A", "g", "test", lab)])
    with pytest.raises(ValidationError):
        LiquidLabel(h=0.0)
    with pytest.raises(ValidationError):
        LiquidLabel(c=-1.0)


@pytest.mark.parametrize("name", ["grooved", "cylinder", "transfer", "liquids"])
def test_split_hygiene(benchmarks, name):
    m, _ = benchmarks.get(name)
    train = {e.path for e in m.entries if e.split == "train"}
    test = {e.path for e in m.entries if e.split == "test"}
    assert train and test and not (train & test)
    assert not ({e.group for e in m.entries if e.split == "train"}
                & {e.group for e in m.entries if e.split == "test"})


def test_grooved_benchmark_sizes(benchmarks):
    m, _ = benchmarks.get("grooved")
    assert len(m.groups("train")) == 108 and len(m.groups("test")) == 96
    assert all(len(g) == 3 for g in m.groups("test").values())


def test_subsample_is_uniform_and_seeded():
    items = list(range(50))
    a = subsample(items, 10, seed=1)
    assert a == subsample(items, 10, seed=1) and a == sorted(a) and len(set(a)) == 10
    assert subsample(items, 10, seed=2) != a
    assert subsample(items, None, 0) == items and subsample(items, 80, 0) == items
    with pytest.raises(ValidationError):
        subsample(items, 0, 0)


# --- evaluation ------------------------------------------------------------------


def make_items(n=20, seed=0):
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        lam, om = rng.uniform(0.1, 2), rng.uniform(14, 22)
        out.append(Item(group=f"g{i}", container="A", features=(lam, om),
                        label=LiquidLabel(h=om**2 / 10 + lam, c=40 * lam, mu=lam / 3)))
    return out


def test_identical_split_gives_training_error():
    items = make_items()
    report = evaluate(items, items, TaskSpec(targets=("h",)), "gpr", 0, "fp")
    X = np.array([it.features for it in items])
    y = np.array([it.label.h for it in items])
    train_mae = float(np.mean(np.abs(regress(gpr_train(X, y, seed=0), X) - y)))
    assert report.metrics["h"]["mae"] == train_mae


def test_missing_labels_rejected():
    items = make_items(8)
    items[0] = Item("x", "A", (0.5, 18.0), LiquidLabel(h=10.0))
    with pytest.raises(ValidationError):
        evaluate(items, items, TaskSpec(targets=("c",)), "gpr", 0, "fp")
    with pytest.raises(ValidationError):
        evaluate(items, items, TaskSpec(kind="classification", targets=()), "svm", 0, "fp")


def test_report_fields_and_metric_cross_check(benchmarks):
    m, feats = benchmarks.get("grooved")
    report = run_benchmark(m, TaskSpec(), "gpr", 0, feats)
    assert report.sizes == {"n_train": 108, "n_test": 96, "n_dropped": 0}
    assert len(report.fingerprint) == 16 and set(report.metrics) == {"h", "c", "mu"}
    for target, metrics in report.metrics.items():
        rows = [r for r in report.predictions if r["target"] == target]
        assert len(rows) == 96
        err = np.array([r["pred"] - r["truth"] for r in rows])
        assert abs(float(np.mean(np.abs(err))) - metrics["mae"]) <= 1e-12
        assert abs(float(np.mean(err * err)) - metrics["mse"]) <= 1e-12 * max(1.0, metrics["mse"])
        assert metrics["mae"] >= 0 and metrics["range"] > 0


def test_classification_report_confusion_rows_sum_to_class_counts(benchmarks):
    m, feats = benchmarks.get("liquids")
    report = run_benchmark(m, TaskSpec(kind="classification", targets=()), "svm", 0, feats)
    assert report.classes == [0, 1, 2]
    truth = [r["truth"] for r in report.predictions]
    assert [sum(row) for row in report.confusion] == [truth.count(c) for c in report.classes]
    assert report.metrics["class"]["accuracy"] == pytest.approx(
        np.trace(report.confusion) / len(truth))


def test_sweep_cardinality(benchmarks):
    m, feats = benchmarks.get("grooved")
    sizes = list(range(10, 101, 10))
    reports = sweep(m, TaskSpec(targets=("h",)), sizes, "quad", 0, features=feats)
    assert [r.sizes["n_train"] for r in reports] == sizes
    assert len({r.fingerprint for r in reports}) == len(sizes)


def test_end_to_end_reports_are_byte_identical():
    texts = [run_benchmark(small_manifest(seed=3), TaskSpec(targets=("h",)), "gpr", 7).to_json()
             for _ in range(2)]
    assert texts[0] == texts[1]
    other = run_benchmark(small_manifest(seed=3), TaskSpec(targets=("h",)), "gpr", 8).to_json()
    assert json.loads(other)["fingerprint"] != json.loads(texts[0])["fingerprint"]


def test_parallel_extraction_matches_serial():
    m = small_manifest(seed=5)
    assert extract_features(m, workers=2) == extract_features(m)


def test_report_json_round_trip(tmp_path):
    report = evaluate(make_items(), make_items(seed=1), TaskSpec(targets=("c",)), "quad", 0, "abc")
    report.write(tmp_path / "r.json")
    back = EvalReport.read(tmp_path / "r.json")
    assert back == report and back.to_json() == report.to_json()
    assert not back.is_empty and EvalReport("regression", "gpr", 0, {}, "x").is_empty
    with pytest.raises(ValidationError):
        EvalReport.from_json("{}")


def test_task_spec_validation():
    with pytest.raises(ValidationError):
        TaskSpec(kind="ranking")
    with pytest.raises(ValidationError):
        TaskSpec(targets=("rho",))
