import json
import math

import numpy as np
import pytest

from cahnlayer import cli
from cahnlayer.errors import CahnLayerError, ConfigurationError, DomainError, FitError
from cahnlayer.harness import (EXPERIMENTS, ExperimentConfig, execute, fit_asymptote, run_experiment,
                               validate_ladder)

LADDER = np.array([2.0**-k for k in range(6, 13)])
TRUTH = {
    "affine_log": (lambda e: 0.25 * np.abs(np.log(e)) - 1.5, {"slope": 0.25, "intercept": -1.5}),
    "affine_inv_log": (lambda e: 0.7 + 2.0 / np.abs(np.log(e)), {"limit": 0.7, "inv_log": 2.0}),
    "eps2_log": (lambda e: -0.5 * e**2 * np.abs(np.log(e)) + 3.0 * e**2, {"c": -0.5, "c_prime": 3.0}),
    "affine_eps": (lambda e: 0.6 - 4.0 * e, {"limit": 0.6, "slope": -4.0}),
}


@pytest.mark.parametrize("model", sorted(TRUTH))
def test_fits_recover_exact_coefficients(model):
    f, coef = TRUTH[model]
    fit = fit_asymptote(LADDER, f(LADDER), model)
    for name, value in coef.items():
        assert fit.coefficients[name] == pytest.approx(value, rel=1e-12, abs=1e-12)
    assert fit.residual_norm < 1e-10
    assert np.allclose(fit.residuals, 0.0, atol=1e-12)


def test_fit_errors():
    with pytest.raises(FitError):
        fit_asymptote(LADDER[:2], [1.0, 2.0], "affine_log")
    with pytest.raises(FitError):
        fit_asymptote([1e-3, 1e-3, 1e-3], [1.0, 1.0, 1.0], "affine_eps")
    with pytest.raises(FitError):
        fit_asymptote(LADDER, LADDER, "cubic")
    with pytest.raises(FitError):
        fit_asymptote(LADDER, LADDER[:-1], "affine_eps")


def test_ladder_validation():
    assert validate_ladder([0.1, 0.01]) == (0.1, 0.01)
    for bad in ([], [0.1, 0.1], [0.01, 0.1], [0.1, -0.01]):
        with pytest.raises(ConfigurationError):
            validate_ladder(bad)


@pytest.mark.parametrize("raw", [
    {"experiment": "E9"},
    {"experiment": "E1", "ladder": []},
    {"experiment": "E1", "ladder": [1e-4, 1e-3]},
    {"experiment": "E6", "boundary": {"gamma": 1.0}},
    {"experiment": "E1", "workers": 0},
    {"experiment": "E1", "colour": "blue"},
    {"ladder": [1e-4]},
])
def test_config_rejections(raw):
    with pytest.raises(ConfigurationError):
        ExperimentConfig.from_dict(raw)


def test_ladder_table_and_hash():
    a = ExperimentConfig.from_dict({"experiment": "E6", "ladder": {"base": 2.0, "k_min": 6, "k_max": 8}})
    assert a.resolved_ladder == (2.0**-6, 2.0**-7, 2.0**-8)
    b = ExperimentConfig.from_dict({"experiment": "E6", "ladder": [2.0**-6, 2.0**-7, 2.0**-8],
                                    "workers": 3, "output": {"dir": "elsewhere"}})
    assert a.config_hash == b.config_hash
    c = ExperimentConfig.from_dict({"experiment": "E6", "ladder": [2.0**-6, 2.0**-7]})
    assert c.config_hash != a.config_hash
    assert ExperimentConfig("E1").resolved_ladder == EXPERIMENTS["E1"].ladder


def test_errors_carry_the_rung():
    with pytest.raises(DomainError) as info:
        execute(ExperimentConfig("E2", ladder=[2.0, 0.5]))
    assert info.value.epsilon == 2.0
    assert "eps=2.0" in str(info.value)


@pytest.mark.parametrize("exp", ["E1", "E2"])
def test_reports_are_byte_identical(tmp_path, exp):
    outs = []
    for k, workers in enumerate((1, 1, 4)):
        cfg = ExperimentConfig(exp, workers=workers)
        run_experiment(cfg, tmp_path / str(k))
        outs.append({p.name: p.read_bytes() for p in sorted((tmp_path / str(k)).iterdir())})
    assert outs[0] == outs[1] == outs[2]
    summ = json.loads(outs[0][f"{exp}.json"])
    assert summ["config_hash"] == ExperimentConfig(exp).config_hash
    assert set(summ) >= {"experiment", "pass", "fitted", "expected", "tolerance", "config", "versions"}
    header = outs[0][f"{exp}.csv"].decode().splitlines()[0]
    assert header == "eps,value,fitted,residual"


def test_result_lines():
    res = execute(ExperimentConfig("E1"))
    lines = res.lines()
    assert lines and all(line.startswith("E1.") for line in lines)
    assert all((": PASS" in line) or (": FAIL" in line) for line in lines)


def test_cli_list(capsys):
    assert cli.main(["list-experiments"]) == 0
    out = capsys.readouterr().out
    assert all(name in out for name in EXPERIMENTS)
    assert "[slow]" in out


def test_cli_run(tmp_path, capsys):
    cfg = tmp_path / "e1.toml"
    cfg.write_text('experiment = "E1"\nladder = [1e-4, 1e-5, 1e-6, 1e-7]\n[output]\ndir = "out"\n')
    assert cli.main(["run", str(cfg)]) == 0
    assert (tmp_path / "out" / "E1.json").exists()
    assert "E1: PASS" in capsys.readouterr().out
    assert cli.main(["run", str(cfg), "--out", str(tmp_path / "o2"), "--workers", "2"]) == 0
    assert (tmp_path / "o2" / "E1.csv").read_bytes() == (tmp_path / "out" / "E1.csv").read_bytes()


def test_cli_reports_config_errors(tmp_path, capsys):
    cfg = tmp_path / "bad.toml"
    cfg.write_text('experiment = "E1"\nladder = []\n')
    assert cli.main(["run", str(cfg)]) == 2
    assert "empty" in capsys.readouterr().err


def test_cli_export_profiles(tmp_path):
    rec = tmp_path / "rec.csv"
    assert cli.main(["export-profile", "--eps", "0.01", "-o", str(rec)]) == 0
    data = np.loadtxt(rec, delimiter=",", skiprows=1)
    assert data[0, 1] == -1.0 and data[-1, 1] == 1.0
    pot = tmp_path / "pot.toml"
    pot.write_text('[potential]\nkind = "polynomial"\ncoeffs = [1, 0, -2, 0, 1]\na = -1\nb = 1\nc = 0\n')
    mini = tmp_path / "min.csv"
    assert cli.main(["export-profile", "--potential-file", str(pot), "--eps", "0.03125", "--minimizer",
                     "--grid-size", "32", "-o", str(mini)]) == 0
    v = np.loadtxt(mini, delimiter=",", skiprows=1)[:, 1]
    assert np.all(np.diff(v) >= 0)
    assert cli.main(["export-profile", "--eps", "0.5", "--T", "0.1", "-o", str(rec)]) == 2
