import csv
import io
import json
from pathlib import Path

import numpy as np
import pytest

from ssdc.cli import main
from ssdc.data import read_libsvm
from ssdc.errors import ConfigurationError
from ssdc.harness import (
    CSV_HEADER,
    ExperimentConfig,
    build_problem,
    load_config,
    parse_config_text,
    pool_size,
    proxgrad_run,
    run_experiment,
    trace_csv,
    tune,
)

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

BASE = """
name = tiny
problem.loss = logistic
problem.regularizer = mcp
problem.lam = 0.01
problem.theta = 2
synthetic.n = 80
synthetic.d = 4
algorithm.K = 4
algorithm.seeds = 0, 1
runtime.workers = 1
"""
VARIANTS = {
    "spg": "variant.spg.solver = spg\n",
    "svrg": "variant.svrg.solver = svrg\n",
    "proxgrad": "variant.proxgrad.budget_passes = 3\n",
}


def _text(*names, extra=""):
    names = names or tuple(VARIANTS)
    return BASE + f"variants = {', '.join(names)}\n" + "".join(VARIANTS[n] for n in names) + extra


TINY = _text()


def _cfg(text=TINY, **extra):
    raw = parse_config_text(text)
    raw.update(extra)
    return ExperimentConfig.from_mapping(raw)


def test_parse_config_comments_and_errors():
    assert parse_config_text("a = 1  # note\n\n# only comment\nb=x") == {"a": "1", "b": "x"}
    with pytest.raises(ConfigurationError, match="line 2"):
        parse_config_text("a = 1\nnot a pair")
    with pytest.raises(ConfigurationError, match="duplicate"):
        parse_config_text("a = 1\na = 2")


def test_config_validation_messages():
    with pytest.raises(ConfigurationError, match="unknown config key"):
        _cfg(**{"algorithm.Kay": "3"})
    with pytest.raises(ConfigurationError, match="algorithm.K"):
        _cfg(**{"algorithm.K": "-1"})
    with pytest.raises(ConfigurationError, match="problem.loss"):
        _cfg(**{"problem.loss": "cauchy"})
    with pytest.raises(ConfigurationError, match="not listed"):
        _cfg(**{"variant.other.solver": "spg"})
    with pytest.raises(ConfigurationError, match="theta"):
        _cfg(**{"problem.regularizer": "scad", "problem.theta": "2"})


def test_config_typed_values():
    cfg = _cfg(**{"algorithm.max_grad_evals": "1e3"})
    assert cfg["algorithm.max_grad_evals"] == 1000
    assert cfg["algorithm.seeds"] == [0, 1]
    assert cfg.variants["proxgrad"]["method"] == "proxgrad"
    assert cfg.variants["spg"]["method"] == "ssdc"


def test_shipped_configs_parse():
    for path in sorted(CONFIGS.glob("*.cfg")):
        cfg = load_config(path)
        assert cfg["variants"]


def test_run_experiment_outputs(tmp_path):
    res = run_experiment(_cfg(), out_dir=tmp_path)
    rows = list(csv.reader(io.StringIO(res.csv_path.read_text())))
    assert rows[0] == CSV_HEADER
    variants = {r[0] for r in rows[1:]}
    assert variants == {"spg", "svrg", "proxgrad"}
    summary = json.loads(res.json_path.read_text())
    assert len(summary["runs"]) == 6 and all(r["status"] == "ok" for r in summary["runs"])
    assert all(len(r["x_tau_sha256"]) == 64 for r in summary["runs"])


def test_run_experiment_is_reproducible(tmp_path):
    a = run_experiment(_cfg(), out_dir=tmp_path / "a")
    b = run_experiment(_cfg(), out_dir=tmp_path / "b")
    assert a.csv_path.read_bytes() == b.csv_path.read_bytes()


def test_parallel_matches_serial(tmp_path):
    a = run_experiment(_cfg(), write=False, workers=1)
    b = run_experiment(_cfg(), write=False, workers=2)
    assert a.csv_text == b.csv_text


def test_failed_run_is_recorded(tmp_path):
    cfg = _cfg(**{"variant.spg.gamma.gamma0": "1e-12", "variant.spg.T": "50"})
    res = run_experiment(cfg, out_dir=tmp_path)
    failed = [r for r in res.summary["runs"] if r["status"] == "failed"]
    assert failed and all(r["variant"] == "spg" for r in failed)
    assert "spg,0,-1,0,nan," in res.csv_text
    assert not res.all_failed


def test_trace_csv_none_row():
    assert trace_csv([("v", 3, None)]).splitlines()[1] == "v,3,-1,0,nan,"


def test_pool_size_env(monkeypatch):
    monkeypatch.setenv("SSDC_THREADS", "3")
    assert pool_size() == 3
    monkeypatch.setenv("SSDC_THREADS", "zero")
    with pytest.raises(ConfigurationError):
        pool_size()


def test_proxgrad_budget_counts_passes():
    prob, info = build_problem(_cfg())
    rep = proxgrad_run(prob, max_grad_evals=5 * info["n"])
    assert rep.records[-1].stage == 5 and rep.grad_evals == 5 * info["n"]


def test_tune_picks_grid_minimum():
    cfg = _cfg(_text("proxgrad"), **{"tune.proxgrad.eta0": "1e-3, 1, 1e12"})
    rep = tune(cfg, seed=0, workers=1)["proxgrad"]
    objs = [row["objective"] for row in rep["table"]]
    assert rep["objective"] == min(objs)
    assert rep["table"][2]["objective"] == float("inf")  # diverges


# ---- CLI ---------------------------------------------------------------------

def _write_cfg(tmp_path, text=TINY):
    p = tmp_path / "tiny.cfg"
    p.write_text(text, encoding="utf-8")
    return p


def test_cli_run(tmp_path, capsys):
    cfg = _write_cfg(tmp_path)
    assert main(["run", str(cfg), "--out-dir", str(tmp_path / "o"), "--seed", "1", "--quiet"]) == 0
    text = (tmp_path / "o" / "tiny.csv").read_text()
    assert all(line.split(",")[1] == "1" for line in text.splitlines()[1:])


def test_cli_reports_config_errors(tmp_path, capsys):
    cfg = _write_cfg(tmp_path, TINY + "bogus.key = 1\n")
    assert main(["run", str(cfg)]) == 2
    assert "bogus.key" in capsys.readouterr().err


def test_cli_all_failed_exit_code(tmp_path):
    text = _text("spg", extra="variant.spg.gamma.gamma0 = 1e-12\nvariant.spg.T = 50\n")
    assert main(["run", str(_write_cfg(tmp_path, text)), "--out-dir", str(tmp_path), "--quiet"]) == 1


def test_cli_gen_data(tmp_path):
    spec = tmp_path / "spec.txt"
    spec.write_text("n = 30\nd = 5\ntask = regression\nscale = true\n", encoding="utf-8")
    out = tmp_path / "d.svm"
    assert main(["gen-data", str(spec), str(out), "--seed", "4", "--quiet"]) == 0
    data = read_libsvm(out)
    assert data.n == 30 and data.task == "regression"
    assert np.all(np.abs(data.features) <= 1.0)
    spec.write_text("n = 30\nwidth = 5\n", encoding="utf-8")
    assert main(["gen-data", str(spec), str(out)]) == 2


def test_cli_eval_crit(tmp_path, capsys):
    cfg = _write_cfg(tmp_path)
    it = tmp_path / "x.json"
    it.write_text(json.dumps({"x_tau": [0.0, 0.0, 0.0, 0.0]}), encoding="utf-8")
    assert main(["eval-crit", str(cfg), str(it), "--gamma", "2.0"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["gamma"] == 2.0 and out["g_gamma_norm"] > 0 and out["certified"]
    it.write_text("0 0 0", encoding="utf-8")
    assert main(["eval-crit", str(cfg), str(it)]) == 2


def test_cli_tune(tmp_path, capsys):
    text = _text("proxgrad", extra="tune.proxgrad.eta0 = 0.1, 1\n")
    cfg = _write_cfg(tmp_path, text)
    assert main(["tune", str(cfg), "--out-dir", str(tmp_path), "--quiet"]) == 0
    report = json.loads((tmp_path / "tiny_tune.json").read_text())
    assert report["proxgrad"]["best"]["eta0"] in (0.1, 1.0)


def test_cli_trace_stride(tmp_path):
    cfg = _write_cfg(tmp_path)
    assert main(["run", str(cfg), "--trace-stride", "0"]) == 2
    assert main(["run", str(cfg), "--out-dir", str(tmp_path / "s"), "--trace-stride", "2",
                 "--quiet"]) == 0
    stages = [int(l.split(",")[2]) for l in (tmp_path / "s" / "tiny.csv").read_text().splitlines()[1:]
              if l.startswith("spg,0")]
    assert stages == [0, 2, 4]


def test_cli_eval_crit_from_run_summary(tmp_path, capsys):
    cfg = _write_cfg(tmp_path)
    assert main(["run", str(cfg), "--out-dir", str(tmp_path), "--quiet"]) == 0
    summary = tmp_path / "tiny.json"
    capsys.readouterr()
    assert main(["eval-crit", str(cfg), str(summary), "--run", "svrg:1", "--gamma", "1.0"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["g_gamma_norm"] >= 0 and out["certified"]
    assert main(["eval-crit", str(cfg), str(summary)]) == 2
    assert main(["eval-crit", str(cfg), str(summary), "--run", "svrg:9"]) == 2
