import csv
import io
import math
import subprocess
import sys

import pytest

from simo_fbl.cli import (
    CSV_COLUMNS,
    EXIT_CONFIG,
    EXIT_OK,
    EXIT_VERIFY,
    PRESETS,
    ConfigError,
    RunConfig,
    build_parser,
    config_from_args,
    crossing,
    evaluate_point,
    main,
    run_sweep,
)
from simo_fbl.bounds import BoundKind, outage_capacity


def _cfg(preset, **kw):
    return RunConfig(**{**PRESETS[preset], "preset": preset, **kw})


def _rows(text):
    return list(csv.DictReader(io.StringIO(text)))


@pytest.mark.parametrize("preset", sorted(PRESETS))
def test_presets_build(preset):
    cfg = config_from_args(build_parser().parse_args(["sweep", "--preset", preset]))
    assert cfg.grid()[0] == cfg.n_min and cfg.grid()[-1] == cfg.n_max


def test_overrides_and_awgn_flag():
    args = build_parser().parse_args(["sweep", "--awgn", "--epsilon", "0.01", "--tau", "auto",
                                      "--bound", "outage-capacity, normal-awgn"])
    cfg = config_from_args(args)
    assert cfg.k_db is None and cfg.epsilon == 0.01 and cfg.tau == "auto"
    assert cfg.kinds == (BoundKind.OUTAGE, BoundKind.AWGN)


def test_grid_step():
    assert _cfg("small", n_step=30).grid() == [10, 40, 70, 100]


@pytest.mark.parametrize("kw", [dict(epsilon=1.5), dict(num_rx=0), dict(n_min=1), dict(n_max=5),
                                dict(bounds=("nope",)), dict(tau=0.5), dict(tau="x"),
                                dict(angle_mode="fast"), dict(quad_nodes=0)])
def test_config_errors(kw):
    with pytest.raises(ConfigError):
        _cfg("small", **kw)


@pytest.mark.parametrize("argv", [["sweep", "--epsilon", "2"], ["sweep", "--rx", "3", "--n-min", "3"],
                                  ["verify", "--bound", "converse"]])
def test_config_error_exit_code(argv, capsys):
    assert main(argv) == EXIT_CONFIG
    assert "config error" in capsys.readouterr().err


def test_parse_error_exits_two():
    with pytest.raises(SystemExit) as e:
        main(["sweep", "--tau", "fast"])
    assert e.value.code == 2


def test_crossing():
    assert crossing([1, 2, 3], [0.0, 0.5, 1.0], 0.75) == (2.5, True)
    assert crossing([1, 2], [0.9, 1.0], 0.5) == (1.0, False)
    assert crossing([1, 2, 3], [None, 0.2, 0.4], 0.9) == (None, False)


def test_small_sweep_csv(tmp_path):
    out = tmp_path / "small.csv"
    text, summary = run_sweep(_cfg("small", output_path=str(out), tau=0.01))
    assert out.read_text() == text
    rows = _rows(text)
    assert tuple(rows[0].keys()) == CSV_COLUMNS
    assert len(rows) == 5 * 4
    # negative achievability rates are flagged rather than dropped
    assert {r["status"] for r in rows} <= {"ok", "vacuous"}
    assert all(r["runtime_ms"] == "" for r in rows)
    c = summary["c_eps_bits"]
    by = {(int(r["n"]), r["bound"]): float(r["rate_bits"]) for r in rows}
    for n in (10, 18, 32, 56, 100):
        assert by[n, "achievability-nocsi"] <= by[n, "achievability-csir"] < c
        assert by[n, "achievability-csir"] <= by[n, "converse-csirt"]


def test_small_sweep_records_infeasible_tau():
    text, _ = run_sweep(_cfg("small", bounds=("achievability-csir",)))
    status = {int(r["n"]): r["status"] for r in _rows(text)}
    # tau = 1/n reaches epsilon = 0.1 at n = 10
    assert status[10].startswith("infeasible")
    assert status[100] == "ok"


def test_sweep_deterministic_across_workers():
    a, _ = run_sweep(_cfg("small", tau=0.01, workers=1))
    b, _ = run_sweep(_cfg("small", tau=0.01, workers=3))
    assert a == b


def test_timing_fills_runtime():
    row = evaluate_point(_cfg("small", timing=True), BoundKind.CONVERSE, 40)
    assert float(row["runtime_ms"]) >= 0


def test_tau_auto_not_worse_than_fixed():
    cfg_auto, cfg_fixed = _cfg("small", tau="auto"), _cfg("small", tau=0.01)
    a = float(evaluate_point(cfg_auto, BoundKind.CSIR, 40)["rate_bits"])
    f = float(evaluate_point(cfg_fixed, BoundKind.CSIR, 40)["rate_bits"])
    assert a >= f - 1e-9


def test_fig1_outage_row():
    row = evaluate_point(_cfg("fig1"), BoundKind.OUTAGE, 50)
    assert float(row["rate_bits"]) == pytest.approx(1.0, abs=0.005)


def test_awgn_reference_crossing():
    _, summary = run_sweep(_cfg("awgn-ref", n_step=5, n_min=1300, n_max=1500))
    assert summary["c_eps_bits"] == pytest.approx(1.0, abs=1e-12)
    n, interp = summary["crossings"]["normal-awgn"]
    assert interp and abs(n - 1420) <= 30


def test_main_sweep_stdout_and_summary(capsys):
    assert main(["sweep", "--preset", "small", "--bound", "outage-capacity,converse-csirt"]) == EXIT_OK
    cap = capsys.readouterr()
    assert cap.out.startswith(",".join(CSV_COLUMNS))
    assert "# C_eps_bits=" in cap.err and "# n90[converse-csirt]=" in cap.err


def test_verify_small_passes(capsys):
    assert main(["verify", "--preset", "small", "--mc-samples", "50000"]) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "check,measured,tolerance,result"
    assert all(line.endswith(",pass") for line in lines[1:])


def test_verify_zero_threshold_fails():
    assert main(["verify", "--preset", "small", "--mc-samples", "20000", "--z-threshold", "0"]) == EXIT_VERIFY


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "simo_fbl", "sweep", "--preset", "small",
                           "--bound", "outage-capacity"], capture_output=True, text=True, timeout=300)
    assert proc.returncode == 0
    rows = _rows(proc.stdout)
    assert len(rows) == 5
    ref = outage_capacity(_cfg("small").channel(), 0.1)
    assert math.isclose(float(rows[0]["rate_bits"]), ref, rel_tol=1e-9)
