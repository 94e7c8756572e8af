import subprocess
import sys

import pytest

from sloshsense.cli import main
from sloshsense.dataset import liquids_benchmark, write_manifest
from sloshsense.fitting import read_fit
from sloshsense.modelio import load_model
from sloshsense.models import SvmModel


@pytest.fixture(scope="module")
def manifest(tmp_path_factory):
    root = tmp_path_factory.mktemp("data")
    return write_manifest(liquids_benchmark(0, n_train=3, n_test=2), root)


def test_simulate_preprocess_fit_plot(tmp_path, capsys):
    out = str(tmp_path)
    # the peak force of the default container is about 0.18, so 0.0018 is 1 % noise
    assert main(["simulate", "--gamma", "1.0", "--noise-std", "0.0018", "--out", out, "--seed", "4"]) == 0
    assert main(["preprocess", str(tmp_path / "markers.csv"), "--out", out]) == 0
    assert main(["fit", str(tmp_path / "signal.csv"), "--out", out]) == 0
    res = read_fit(tmp_path / "fit.txt")
    assert res.params.lam == pytest.approx(0.5, rel=0.1)
    assert main(["plot", "signal", str(tmp_path / "signal.csv"), "--fit", str(tmp_path / "fit.txt"),
                 "--out", out]) == 0
    assert (tmp_path / "signal.svg").is_file() and (tmp_path / "signal.txt").is_file()
    assert "variance_ratio=" in capsys.readouterr().out


def test_train_classify_bench(manifest, tmp_path, capsys):
    out = str(tmp_path)
    assert main(["train", str(manifest), "--model", "svm", "--out", out]) == 0
    model = load_model(tmp_path / "model_class.slm")
    assert isinstance(model, SvmModel)
    capsys.readouterr()
    assert main(["classify", str(tmp_path / "model_class.slm"), "--lambda", "4.0", "--omega", "17.0"]) == 0
    assert capsys.readouterr().out.strip().endswith(",2.0")
    assert main(["bench", str(manifest), "--model", "svm", "--targets", "", "--out", out]) == 0
    assert (tmp_path / "report.json").is_file()
    assert main(["train", str(manifest), "--model", "gpr", "--target", "h", "--out", out]) == 0
    assert main(["predict", str(tmp_path / "model_h.slm"), "--lambda", "0.1", "--omega", "17.0"]) == 0


def test_validation_errors_exit_1(tmp_path, manifest):
    assert main(["fit", str(tmp_path / "missing.csv")]) == 1
    assert main(["bench", "no-such-benchmark"]) == 1
    assert main(["train", str(manifest), "--model", "gpr", "--target", "c", "--out", str(tmp_path)]) == 1
    (tmp_path / "bad.cfg").write_text("viscosity=3\n")
    assert main(["simulate", "--config", str(tmp_path / "bad.cfg"), "--out", str(tmp_path)]) == 1
    with pytest.raises(SystemExit) as exc:
        main(["simulate", "--gamma", "abc"])
    assert exc.value.code == 1


def test_numerical_failure_exits_2(tmp_path):
    out = str(tmp_path)
    assert main(["simulate", "--noise-std", "0.01", "--out", out]) == 0
    assert main(["preprocess", str(tmp_path / "markers.csv"), "--out", out]) == 0
    (tmp_path / "fit.cfg").write_text("max_iters=5\nn_restarts=1\n")
    assert main(["fit", str(tmp_path / "signal.csv"), "--config", str(tmp_path / "fit.cfg"), "--out", out]) == 2


def test_console_entry_point_help():
    proc = subprocess.run([sys.executable, "-m", "sloshsense.cli", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    for cmd in ("simulate", "preprocess", "fit", "train", "predict", "classify", "transfer", "bench", "sweep",
                "plot"):
        assert cmd in proc.stdout
