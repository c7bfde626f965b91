import os

import numpy as np
import pytest

from dbfgs.cli import main as cli_main
from dbfgs.harness import (
    ConfigError,
    ExperimentConfig,
    histogram_exchanges,
    parse_config,
    read_trace_csv,
    reproduce_paper_suite,
    run_experiment,
)
from dbfgs.sync_runtime import Trace

BASE_CONFIG = """
[topology]
n = 8
d = 2

[problem]
kind = "quadratic"
p = 4
eta = 1.0

[mode]
kind = "dual"

[dbfgs]
gamma = 0.01
big_gamma = 0.001

[run]
iterations = 30
seeds = [0, 1]
error_threshold = 0.5

[methods]
dbfgs = 0.05
dd = 0.002
"""


def test_parse_and_round_trip():
    cfg = parse_config(BASE_CONFIG)
    assert cfg.n == 8 and cfg.d == 2 and cfg.mode == "dual"
    assert cfg.methods == (("dbfgs", 0.05), ("dd", 0.002))
    assert cfg.seeds == (0, 1)
    again = parse_config(cfg.to_text())
    assert again == cfg
    assert again.config_hash() == cfg.config_hash()


def test_parse_async_section():
    text = BASE_CONFIG.replace("dd = 0.002", "dd = 0.002\n\n[async]\n"
                               "mu_clk = 1.0\nsigma_clk = 0.1")
    cfg = parse_config(text)
    assert cfg.regime == "async" and cfg.mu_clk == 1.0
    assert cfg.delta_msg == 0.0
    assert parse_config(cfg.to_text()) == cfg


@pytest.mark.parametrize("mutation,match", [
    (("eta = 1.0", "eta = 1.0\nfoo = 3"), "problem.foo"),
    (("[run]", "[nonsense]\nx = 1\n\n[run]"), "nonsense"),
    (("dbfgs = 0.05\ndd = 0.002", ""), "methods"),
    (("dd = 0.002", "newton = 0.1"), "methods.newton"),
    (("seeds = [0, 1]", "seeds = []"), "run.seeds"),
    (("kind = \"dual\"", "kind = \"dual\"\nalpha = 0.1"), "mode.alpha"),
    (("n = 8", ""), "topology.n"),
])
def test_parse_rejections(mutation, match):
    old, new = mutation
    with pytest.raises(ConfigError, match=match):
        parse_config(BASE_CONFIG.replace(old, new))


def test_async_regime_rejects_sync_only_methods():
    text = BASE_CONFIG.replace("dd = 0.002", "admm = 0.002\n\n[async]\n"
                               "mu_clk = 1.0\nsigma_clk = 0.1")
    with pytest.raises(ConfigError, match="methods.admm"):
        parse_config(text)


def test_primal_requires_alpha():
    text = BASE_CONFIG.replace('kind = "dual"', 'kind = "primal"')
    text = text.replace("dd = 0.002", "dgd = 0.5")
    with pytest.raises(ConfigError, match="mode.alpha"):
        parse_config(text)


def test_run_experiment_writes_deterministic_csv(tmp_path):
    cfg = parse_config(BASE_CONFIG)
    out1, out2 = tmp_path / "a", tmp_path / "b"
    res1 = run_experiment(cfg, str(out1))
    res2 = run_experiment(cfg, str(out2))
    assert len(res1) == 4  # 2 methods x 2 seeds
    for r1, r2 in zip(res1, res2):
        with open(r1.csv_path) as f1, open(r2.csv_path) as f2:
            assert f1.read() == f2.read()
    names = sorted(os.listdir(out1))
    assert any(n.startswith("summary_") for n in names)


def test_csv_round_trip(tmp_path):
    cfg = parse_config(BASE_CONFIG)
    res = run_experiment(cfg, str(tmp_path))
    again = read_trace_csv(res[0].csv_path)
    assert again.method == res[0].trace.method
    assert again.error == res[0].trace.error
    assert again.exchanges == res[0].trace.exchanges


def test_csv_row_count_equals_iterations(tmp_path):
    cfg = parse_config(BASE_CONFIG)
    res = run_experiment(cfg, str(tmp_path))
    for r in res:
        with open(r.csv_path) as fh:
            rows = fh.read().strip().splitlines()
        assert len(rows) == 1 + len(r.trace.iters)
        assert len(r.trace.iters) == 30  # no stop threshold hit


def fake_trace(method, seed, errors, cost):
    tr = Trace(method=method, mode="dual", seed=seed)
    for k, e in enumerate(errors, start=1):
        tr.append(k, e, 1.0, k * cost)
    return tr


def test_histogram_counts_and_censoring():
    traces = [
        fake_trace("dbfgs", 0, [1.0, 0.5, 0.05, 0.001], 2),
        fake_trace("dbfgs", 1, [1.0, 0.02, 0.001, 0.0001], 2),
        fake_trace("dd", 0, [1.0, 0.9, 0.8, 0.7], 1),
    ]
    hist = histogram_exchanges(traces, 0.05)
    assert sorted(hist.counts["dbfgs"]) == [4, 6]
    assert hist.censored == {"dd": 1}
    assert hist.median("dbfgs") == 5.0
    assert hist.median("dd") is None


def test_histogram_order_independence():
    rng = np.random.default_rng(0)
    traces = [fake_trace("dbfgs", s, list(np.sort(rng.uniform(0, 1, 50))[::-1]), 2)
              for s in range(9)]
    forward = histogram_exchanges(traces, 0.2).median("dbfgs")
    backward = histogram_exchanges(traces[::-1], 0.2).median("dbfgs")
    assert forward == backward


def test_reproduce_unknown_profile():
    with pytest.raises(ConfigError, match="unknown profile"):
        reproduce_paper_suite("fig9")


def test_reproduce_smoke_structure():
    ok, results = reproduce_paper_suite("fig2", seeds=range(2))
    assert {r.name for r in results} == {"fig2.dbfgs_error_at_200",
                                         "fig2.ordering"}
    assert all(isinstance(r.passed, bool) for r in results)
    assert isinstance(ok, bool)


# ---------------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------------


def test_cli_run_and_histogram(tmp_path, capsys):
    cfg_path = tmp_path / "exp.cfg"
    cfg_path.write_text(BASE_CONFIG)
    outdir = tmp_path / "out"
    rc = cli_main(["run", str(cfg_path), "--outdir", str(outdir)])
    assert rc == 0
    csvs = [str(outdir / n) for n in os.listdir(outdir) if n.endswith(".csv")]
    assert len(csvs) == 4
    rc = cli_main(["histogram", str(outdir / "*.csv"), "--threshold", "0.5"])
    assert rc == 0
    out = capsys.readouterr().out
    assert "threshold 0.5" in out


def test_cli_histogram_no_match_is_usage_error(tmp_path):
    rc = cli_main(["histogram", str(tmp_path / "none*.csv"),
                   "--threshold", "0.5"])
    assert rc == 2


def test_cli_bad_config_exit_code(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("[topology]\nn = 8\n")
    rc = cli_main(["run", str(bad)])
    assert rc == 2


def test_cli_unknown_profile_is_usage_error():
    with pytest.raises(SystemExit) as err:
        cli_main(["reproduce", "fig9"])
    assert err.value.code == 2
