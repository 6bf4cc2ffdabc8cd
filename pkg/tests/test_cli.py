import json

import pandas as pd
import pytest

from qbld.errors import ConfigError
from qbld.main import main
from qbld.schemas import load_config, load_effects


@pytest.fixture
def simulated(tmp_path, write_config):
    cfg = write_config()
    panel = tmp_path / "panel.csv"
    assert main(["simulate", "--config", str(cfg), "--out", str(panel)]) == 0
    return cfg, panel


@pytest.fixture
def fitted(tmp_path, simulated):
    cfg, panel = simulated
    out = tmp_path / "fit"
    assert main(["fit", "--config", str(cfg), "--data", str(panel), "--out", str(out)]) == 0
    return cfg, panel, out


def test_simulate_writes_panel_truth_and_manifest(simulated):
    _, panel = simulated
    frame = pd.read_csv(panel)
    assert len(frame) == 30 * 4
    assert list(frame.columns) == ["id", "time", "y", "x2", "x3", "s2"]
    truth = json.loads(panel.with_suffix(".truth.json").read_text())
    assert truth["beta"] == [-5.0, 6.0, 4.0]
    manifest = json.loads(panel.with_suffix(".manifest.json").read_text())
    assert manifest["command"] == "simulate"
    assert manifest["seed"] == 7
    assert set(manifest["outputs"]) == {"panel", "truth"}
    assert len(manifest["config_hash"]) == 64


def test_simulate_is_byte_identical(tmp_path, write_config):
    cfg = write_config()
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["simulate", "--config", str(cfg), "--out", str(a)]) == 0
    assert main(["simulate", "--config", str(cfg), "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    c = tmp_path / "c.csv"
    assert main(["simulate", "--config", str(cfg), "--seed", "8", "--out", str(c)]) == 0
    assert a.read_bytes() != c.read_bytes()


def test_invalid_quantile_exits_2(tmp_path, write_config, capsys):
    cfg = write_config(p=1.0)
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "x.csv")]) == 2
    assert "p" in capsys.readouterr().err
    assert not (tmp_path / "x.csv").exists()


def test_fit_outputs(fitted):
    _, _, out = fitted
    for name in ("draws.csv", "summary.json", "metrics.json", "manifest.json"):
        assert (out / name).is_file()
    draws = pd.read_csv(out / "draws.csv")
    assert len(draws) == 40
    assert {"beta[const]", "beta[x2]", "beta[x3]", "phi2", "alpha[1][const]"} <= set(draws.columns)
    metrics = json.loads((out / "metrics.json").read_text())
    assert metrics["dof"] == 4
    assert metrics["N_obs"] == 120
    assert metrics["caic"] == pytest.approx(-2 * metrics["loglik"] + 8)
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["algorithm"] == "blocked"
    assert manifest["extra"]["G"] == 40
    assert all(len(entry["sha256"]) == 64 for entry in manifest["outputs"].values())


def test_fit_is_byte_identical(tmp_path, simulated):
    cfg, panel = simulated
    for name in ("r1", "r2"):
        assert main(["fit", "--config", str(cfg), "--data", str(panel), "--out", str(tmp_path / name)]) == 0
    assert (tmp_path / "r1" / "draws.csv").read_bytes() == (tmp_path / "r2" / "draws.csv").read_bytes()


def test_fit_config_errors(tmp_path, simulated, write_config):
    _, panel = simulated
    bad = write_config("bad.json", draws=50, burn_in=50)
    assert main(["fit", "--config", str(bad), "--data", str(panel), "--out", str(tmp_path / "f")]) == 2
    assert not (tmp_path / "f" / "draws.csv").exists()
    unknown = write_config("unknown.json", sampler="gibbs")
    assert main(["fit", "--config", str(unknown), "--data", str(panel), "--out", str(tmp_path / "g")]) == 2


def test_fit_missing_data_exits_3(tmp_path, write_config):
    cfg = write_config()
    assert main(["fit", "--config", str(cfg), "--data", str(tmp_path / "nope.csv"),
                 "--out", str(tmp_path / "f")]) == 3


def test_effects(tmp_path, fitted):
    cfg, panel, out = fitted
    spec = tmp_path / "effects.json"
    spec.write_text(json.dumps([
        {"name": "null", "column": "x2", "from_value": 0.5, "to_value": 0.5},
        {"column": "x2", "kind": "indicator"},
    ]))
    assert main(["effects", "--config", str(cfg), "--draws", str(out), "--data", str(panel),
                 "--effects", str(spec)]) == 0
    report = json.loads((out / "effects.json").read_text())
    null, flip = report["effects"]
    assert null["contrast"] == "null"
    assert null["mean"] == 0.0
    assert flip["contrast"] == "x2: 0 -> 1"
    assert 0.0 < report["baseline_probability"] < 1.0


def test_effects_missing_draws_exits_3(tmp_path, simulated):
    cfg, panel = simulated
    spec = tmp_path / "effects.json"
    spec.write_text(json.dumps([{"column": "x2", "kind": "indicator"}]))
    assert main(["effects", "--config", str(cfg), "--draws", str(tmp_path / "missing"), "--data", str(panel),
                 "--effects", str(spec)]) == 3


def test_effects_without_alpha_exits_5(tmp_path, simulated, write_config):
    _, panel = simulated
    cfg = write_config("noalpha.json", store_alpha=False)
    out = tmp_path / "fit"
    assert main(["fit", "--config", str(cfg), "--data", str(panel), "--out", str(out)]) == 0
    assert not (out / "metrics.json").exists()
    spec = tmp_path / "effects.json"
    spec.write_text(json.dumps({"effects": [{"column": "x2", "kind": "indicator"}]}))
    args = ["effects", "--config", str(cfg), "--draws", str(out), "--data", str(panel), "--effects", str(spec)]
    assert main(args) == 5
    fallback = write_config("prior.json", store_alpha=False, alpha_from_prior=True)
    args[2] = str(fallback)
    assert main(args) == 0


def test_summarize_rewrites_summary(fitted):
    cfg, panel, out = fitted
    (out / "summary.json").unlink()
    assert main(["summarize", "--config", str(cfg), "--draws", str(out), "--data", str(panel)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert "beta[x2]" in summary


def test_compare(tmp_path, simulated, write_config):
    _, panel = simulated
    cfg = write_config("cmp.json", draws=400, burn_in=100)
    out = tmp_path / "cmp"
    assert main(["compare", "--config", str(cfg), "--data", str(panel), "--out", str(out)]) == 0
    table = json.loads((out / "comparison.json").read_text())
    assert set(table) == {"beta[const]", "beta[x2]", "beta[x3]", "phi2"}
    assert (out / "blocked" / "draws.csv").is_file()
    assert (out / "nonblocked" / "draws.csv").is_file()


def test_load_config_forms(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"p": 0.25, "prior": {"B0_diag_or_full": [1.0, 2.0], "c1": 4}}))
    cfg = load_config(path, seed=11)
    assert cfg.seed == 11
    pri = cfg.prior.to_priors(2)
    assert pri.B0.tolist() == [[1.0, 0.0], [0.0, 2.0]]
    assert pri.c1 == 4
    with pytest.raises(ConfigError, match="prior.B0"):
        cfg.prior.to_priors(3)
    path.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(path)


def test_load_effects_validation(tmp_path):
    path = tmp_path / "e.json"
    path.write_text(json.dumps([{"column": "x", "kind": "pair", "from_value": 1.0}]))
    with pytest.raises(ConfigError):
        load_effects(path)
    path.write_text(json.dumps([{"column": "x", "kind": "delta", "delta": 0.5}]))
    assert load_effects(path).effects[0].label == "x: +0.5"


def test_malformed_draws_exits_2(fitted, capsys):
    cfg, panel, out = fitted
    (out / "draws.csv").write_text('draw,beta[const]\n0,"1.5\n')
    assert main(["summarize", "--config", str(cfg), "--draws", str(out), "--data", str(panel)]) == 2
    assert "draws" in capsys.readouterr().err
