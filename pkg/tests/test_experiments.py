import json
import math

import numpy as np
import pytest

from irslink import cli
from irslink.config import parse_config
from irslink.errors import ConfigError, NumericalError, ParameterError
from irslink.experiments import (
    Table,
    cmd_channel_stats,
    cmd_ddpg_sweep,
    cmd_ddpg_train,
    cmd_outage_sweep,
    gap_trend,
    render_table,
)

SMALL_DDPG = """
ddpg:
  n_samples: 3
  n_episodes: 12
  n_steps: 20
  capacity: 100
  batch: 16
  target_refresh: 10
  hidden: 16
"""


def _cfg(extra=""):
    return parse_config("seed: 42\nsweep:\n  mc_samples: 20000\n  stats_samples: 20000\n" + extra)


def _read(path):
    return path.read_bytes()


def _data_rows(text):
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    return lines[0].split(","), [ln.split(",") for ln in lines[1:]]


def test_render_table_layout():
    t = Table("demo", ("a", "b", "c"), [(1, 0.1, "x,y")], {"grid": "0 1"})
    assert render_table(t) == '# schema: demo v1\n# grid: 0 1\na,b,c\n1,0.1,"x,y"\n'


def test_channel_stats_columns_and_targets():
    table = cmd_channel_stats(_cfg(), n=50_000)
    header = table.columns
    assert header == ("quantity", "hop", "i", "k", "estimate", "std_err", "target")
    rows = {(r[0], r[1], r[2], r[3]): r for r in table.rows}
    assert rows[("complex_corr", 1, 1, 2)][6] == pytest.approx(0.95 * 0.9)
    assert rows[("mean_square", 2, 3, 3)][6] == pytest.approx(1.0)
    for r in table.rows:
        assert abs(r[4] - r[6]) < 5 * r[5] + 1e-9


def test_channel_stats_independent_profile():
    table = cmd_channel_stats(_cfg("system:\n  lambdas1: [0, 0, 0, 0]\n  lambdas2: [0, 0, 0, 0]\n"), n=50_000)
    for r in table.rows:
        if r[0] != "mean_square":
            assert r[6] == 0.0 and abs(r[4]) < 0.03


def test_channel_stats_workers_do_not_change_output():
    cfg = _cfg()
    assert render_table(cmd_channel_stats(cfg, n=20_000)) == render_table(cmd_channel_stats(cfg, n=20_000, workers=2))


def test_outage_sweep_high_power_has_no_outage():
    cfg = parse_config("sweep:\n  p_s_dbm: [60]\n  mc_samples: 100000\n")
    table = cmd_outage_sweep(cfg, "mc")
    (row,) = table.rows
    assert row[2] == pytest.approx(math.sqrt(10) * 1e-3)
    assert row[3] == 0.0


def test_independent_profile_has_lower_outage():
    grid = "sweep:\n  p_s_dbm: [0, 6, 12]\n  mc_samples: 200000\n"
    corr = cmd_outage_sweep(parse_config(grid), "mc")
    indep = cmd_outage_sweep(
        parse_config(grid + "system:\n  lambdas1: [0, 0, 0, 0]\n  lambdas2: [0, 0, 0, 0]\n"), "mc"
    )
    for c, i in zip(corr.rows, indep.rows):
        assert i[3] < c[3]


def test_outage_sweep_both_methods_agree():
    cfg = parse_config("sweep:\n  p_s_dbm: [10, 16]\n  mc_samples: 200000\n")
    table = cmd_outage_sweep(cfg, "both")
    assert table.column("method") == ["mc", "quad", "mc", "quad"]
    for mc, quad in zip(table.rows[::2], table.rows[1::2]):
        assert quad[6] == "ok"
        assert abs(mc[3] - quad[3]) <= 3 * mc[4]


def test_outage_sweep_rejects_unknown_method():
    with pytest.raises(ParameterError):
        cmd_outage_sweep(_cfg(), "exact")


def test_derived_threshold_lowers_outage_with_distortion():
    base = "system:\n  gamma0_db: derive\nsweep:\n  p_s_dbm: [0]\n  mc_samples: 100000\n"
    lossless = cmd_outage_sweep(parse_config(base), "mc").rows[0]
    lossy = cmd_outage_sweep(parse_config(base + "  distortion: 0.4\n"), "mc").rows[0]
    assert lossless[1] == pytest.approx(10 * math.log10(3))
    assert lossy[2] < lossless[2]
    assert lossy[3] < lossless[3]


def test_ddpg_train_table():
    out = cmd_ddpg_train(parse_config(SMALL_DDPG))
    assert out.episodes.columns == ("episode", "final_step_reward", "optimal_gain", "ratio")
    assert len(out.episodes.rows) == 12
    assert all(r[3] <= 1 + 1e-12 for r in out.episodes.rows)


def test_ddpg_sweep_dominance_and_trend():
    cfg = parse_config(SMALL_DDPG + "sweep:\n  p_s_dbm: [-10, 0, 10, 20]\n")
    out = cmd_ddpg_sweep(cfg)
    assert len(out.sweep.rows) == 4 * len(cfg.system.distortions)
    for row in out.sweep.rows:
        assert row[4] >= row[5]
        assert row[9].startswith("ok")
    assert sum(r.bound_violations() for r in out.results) == 0
    assert set(out.kendall_tau) == set(cfg.system.distortions)
    assert len(out.trace.rows) == 3 * 12


def test_cold_start_parallel_matches_sequential():
    cfg = parse_config(SMALL_DDPG + "  warm_start: false\n")
    a = cmd_ddpg_sweep(cfg, workers=1)
    b = cmd_ddpg_sweep(cfg, workers=2)
    assert render_table(a.trace) == render_table(b.trace)


def test_gap_trend_constant_gap_is_nan():
    t = Table("x", ("distortion", "p_s_dbm", "gap"), [(0.0, 0.0, 0.1), (0.0, 1.0, 0.1)])
    assert math.isnan(gap_trend(t)[0.0])
    t.rows.append((0.0, 2.0, 0.3))
    assert gap_trend(t)[0.0] > 0


# -- command line ----------------------------------------------------------


def _write_cfg(tmp_path, text):
    path = tmp_path / "cfg.yaml"
    path.write_text(text)
    return str(path)


@pytest.mark.parametrize(
    "command,files,cfg_text",
    [
        ("channel-stats", ["channel_stats.csv"], "sweep:\n  stats_samples: 20000\n"),
        ("outage-sweep", ["outage_sweep.csv"], "sweep:\n  p_s_dbm: [4, 8]\n  mc_samples: 20000\n"),
        ("ddpg-train", ["ddpg_train.csv", "actor_target.bin", "critic_target.bin"], SMALL_DDPG),
        ("ddpg-sweep", ["ddpg_sweep.csv", "ddpg_realizations.csv", "ddpg_trace.csv"], SMALL_DDPG),
    ],
)
def test_cli_repeat_runs_are_byte_identical(tmp_path, capsys, command, files, cfg_text):
    cfg = _write_cfg(tmp_path, cfg_text)
    for run in ("a", "b"):
        argv = [command, "--config", cfg, "--seed", "9", "--out", str(tmp_path / run)]
        if command == "outage-sweep":
            argv += ["--method", "both"]
        assert cli.main(argv) == 0
    for name in files:
        first = _read(tmp_path / "a" / name)
        assert first == _read(tmp_path / "b" / name)
        if name.endswith(".csv"):
            assert first.startswith(b"# schema: ")
    capsys.readouterr()


def test_cli_seed_changes_output(tmp_path, capsys):
    cfg = _write_cfg(tmp_path, "sweep:\n  stats_samples: 20000\n")
    for seed in ("1", "2"):
        assert cli.main(["channel-stats", "--config", cfg, "--seed", seed, "--out", str(tmp_path / seed)]) == 0
    assert _read(tmp_path / "1" / "channel_stats.csv") != _read(tmp_path / "2" / "channel_stats.csv")
    capsys.readouterr()


def test_cli_config_error_is_json(tmp_path, capsys):
    cfg = _write_cfg(tmp_path, "system:\n  m: 4\n  colour: blue\n")
    assert cli.main(["channel-stats", "--config", cfg, "--out", str(tmp_path)]) == 2
    err = json.loads(capsys.readouterr().err)
    assert err == {"error": "ConfigError", "message": err["message"], "field": "system.colour", "line": 3}


def test_cli_usage_error_is_json(capsys):
    assert cli.main(["no-such-command"]) == 2
    assert json.loads(capsys.readouterr().err)["error"] == "ParameterError"
    assert cli.main(["outage-sweep", "--workers", "0"]) == 2
    capsys.readouterr()


def test_cli_missing_config_file(tmp_path, capsys):
    assert cli.main(["channel-stats", "--config", str(tmp_path / "absent.yaml")]) == 2
    assert json.loads(capsys.readouterr().err)["error"] == "FileNotFoundError"


def test_error_payload_exit_codes():
    assert cli._error_payload(NumericalError("no convergence", 1e-2))[0] == 3
    assert cli._error_payload(NumericalError("no convergence", 1e-2))[1]["achieved_tol"] == 1e-2
    assert cli._error_payload(ConfigError("bad", "seed", 1))[0] == 2
    assert cli._error_payload(RuntimeError("boom"))[0] == 1
