import json
import math
from pathlib import Path

import numpy as np
import pytest

from levosc.cli import EXIT_ANALYSIS, EXIT_CONFIG, EXIT_OK, _fit_items, main
from levosc.isolation import CRYOSTAT_STAGES, stage_isolation_db
from levosc.physics import SPIN_MOMENTS, OscillatorMode, SpinMechanicsSetup, cooperativity, spin_coupling
from levosc.report import fmt, format_power10, read_kv, read_table, write_kv, write_table
from levosc.timeseries import TimeSeries

GOLDEN = Path(__file__).parent / "golden"


def _run(*argv):
    return main([str(a) for a in argv])


def _cfg_file(tmp_path, data, name="case.cfg"):
    p = tmp_path / name
    p.write_text(json.dumps(data))
    return p


# -- simulate -------------------------------------------------------------------


def test_simulate_matches_golden_summary(tmp_path):
    assert _run("simulate", "--config", "mode1_ringdown", "--out", tmp_path) == EXIT_OK
    golden = (GOLDEN / "mode1_ringdown_summary.txt").read_text(encoding="utf-8")
    assert (tmp_path / "summary.txt").read_text(encoding="utf-8") == golden
    _, values = read_kv(tmp_path / "summary.txt")
    ts = TimeSeries.from_csv(tmp_path / "trace.csv")
    assert len(ts) == int(values["n_samples"])
    assert ts.metadata["seed"] == 1


def test_simulate_seed_flag_is_deterministic(tmp_path):
    digests = []
    for sub, seed in (("a", 7), ("b", 7), ("c", 8)):
        assert _run("simulate", "--config", "mode2_8p4hz", "--seed", seed, "--out", tmp_path / sub) == EXIT_OK
        digests.append(read_kv(tmp_path / sub / "summary.txt")[1]["trace_digest"])
    assert digests[0] == digests[1] != digests[2]
    assert (tmp_path / "a" / "trace.csv").read_bytes() == (tmp_path / "b" / "trace.csv").read_bytes()


def test_simulate_missing_mass_exits_2(tmp_path, capsys):
    cfg = _cfg_file(tmp_path, {"mode": {"f0_hz": 11.7}, "simulation": {"duration_s": 1.0}})
    assert _run("simulate", "--config", cfg, "--out", tmp_path) == EXIT_CONFIG
    assert "mass_kg" in capsys.readouterr().err
    assert not (tmp_path / "trace.csv").exists()


def test_simulate_bad_json_reports_line(tmp_path, capsys):
    p = tmp_path / "broken.cfg"
    p.write_text('{\n "mode": {"f0_hz": 11.7\n}\n')
    assert _run("simulate", "--config", p) == EXIT_CONFIG
    assert "line" in capsys.readouterr().err


def test_simulate_cold_damping_summary(tmp_path):
    assert _run("simulate", "--config", "cold_damping", "--out", tmp_path) == EXIT_OK
    _, v = read_kv(tmp_path / "summary.txt")
    assert v["feedback_mode"] == "cool"
    assert float(v["mode_temperature_expected_k"]) == pytest.approx(0.3, rel=1e-5)


# -- fit ------------------------------------------------------------------------


def _synthetic_ringdown(path, gamma=2 * math.pi * 0.59e-3, f0=11.7, fs=100.0, T=1500.0):
    t = np.arange(int(T * fs) + 1) / fs
    x = 3e-6 * np.exp(-gamma * t / 2) * np.cos(2 * np.pi * f0 * t)
    TimeSeries(0.0, 1 / fs, x, {"seed": 0}).to_csv(path)


def test_fit_synthetic_ringdown_reports_q(tmp_path, capsys):
    trace = tmp_path / "ring.csv"
    _synthetic_ringdown(trace)
    assert _run("fit", trace, "--f0", 11.7, "--bin-width", 10, "--out", tmp_path) == EXIT_OK
    line = capsys.readouterr().out
    assert "gamma/2pi = 0.00059" in line and "±" in line
    header, v = read_kv(tmp_path / "fit_report.txt")
    assert header["seed"] == "0"
    g2pi = float(v["gamma_over_2pi_hz"])
    assert g2pi == pytest.approx(0.59e-3, rel=1e-3)
    assert float(v["Q"]) == pytest.approx(11.7 / g2pi, rel=1e-5)
    _, cols = read_table(tmp_path / "residuals.csv")
    assert set(cols) == {"t_s", "X2_mean_m2", "X2_stderr_m2", "model_m2", "residual_m2", "used"}


@pytest.mark.parametrize("f0,g2pi,Q,display", [
    (11.7, 0.59e-6, 1.983e7, "2.0×10⁷"),
    (8.4, 2.6e-6, 3.23e6, "3.2×10⁶"),
    (8.7, 2.6e-6, 3.35e6, "3.3×10⁶"),
])
def test_q_column_from_linewidth(f0, g2pi, Q, display):
    gamma = 2 * math.pi * g2pi
    items = dict(_fit_items("decay", "m", f0, gamma, 0.1 * gamma, []))
    assert items["Q"] == pytest.approx(Q, rel=2e-3)
    assert items["Q"] == pytest.approx(f0 / g2pi, rel=1e-12)
    assert items["Q_display"] == display
    assert items["Q_ci95"] == pytest.approx(0.1 * items["Q"])


def test_format_power10():
    assert format_power10(1.98e7) == "2.0×10⁷"
    assert format_power10(2.698e5, sig=3) == "2.70×10⁵"
    assert format_power10(4.1e-11) == "4.1×10⁻¹¹"
    assert format_power10(math.inf) == "inf"


def test_fit_failure_exits_3(tmp_path, capsys):
    trace = tmp_path / "zeros.csv"
    TimeSeries(0.0, 0.01, np.zeros(100000)).to_csv(trace)
    with pytest.warns(RuntimeWarning, match="non-positive"):
        code = _run("fit", trace, "--f0", 11.7, "--bin-width", 10, "--out", tmp_path)
    assert code == EXIT_ANALYSIS
    assert "decay fit failed" in capsys.readouterr().err
    rng = np.random.default_rng(0)
    TimeSeries(0.0, 0.01, rng.standard_normal(200000)).to_csv(trace)
    assert _run("fit", trace, "--f0", 11.7, "--method", "psd", "--out", tmp_path) == EXIT_ANALYSIS
    assert "no resonance" in capsys.readouterr().err


def test_fit_unreadable_trace_exits_2(tmp_path):
    assert _run("fit", tmp_path / "missing.csv", "--f0", 11.7) == EXIT_CONFIG
    bad = tmp_path / "bad.csv"
    bad.write_text("time,pos\n0,1\n")
    assert _run("fit", bad, "--f0", 11.7) == EXIT_CONFIG
    ok = tmp_path / "ok.csv"
    _synthetic_ringdown(ok, T=200.0)
    assert _run("fit", ok) == EXIT_CONFIG  # no carrier frequency anywhere
    assert _run("fit", ok, "--f0", 11.7, "--bandwidth", -1) == EXIT_CONFIG


# -- protocol -------------------------------------------------------------------


def test_protocol_mode1(tmp_path, capsys):
    assert _run("protocol", "--config", "mode1_ringdown", "--out", tmp_path) == EXIT_OK
    _, s = read_kv(tmp_path / "summary.txt")
    assert float(s["achieved_X0_over_x_rms"]) >= 10
    _, f = read_kv(tmp_path / "fit_report.txt")
    g, ci = float(f["gamma_s-1"]), float(f["gamma_ci95_s-1"])
    injected = 2 * math.pi * 0.59e-3
    assert abs(g - injected) <= max(0.05 * injected, ci)
    ring = TimeSeries.from_csv(tmp_path / "ringdown.csv")
    assert ring.metadata["phase"] == "ringdown"
    assert "mode1:" in capsys.readouterr().out


def test_protocol_needs_excite_feedback(tmp_path):
    assert _run("protocol", "--config", "cold_damping", "--out", tmp_path) == EXIT_CONFIG


def test_protocol_timeout_exits_3(tmp_path):
    data = json.loads(Path(__file__).parents[1].joinpath("src/levosc/configs/mode1_ringdown.cfg").read_text())
    data["feedback"]["gain_n"] = 0.0
    data["protocol"]["max_excite_time_s"] = 20
    assert _run("protocol", "--config", _cfg_file(tmp_path, data), "--out", tmp_path) == EXIT_ANALYSIS


# -- sensitivity ----------------------------------------------------------------


def test_sensitivity_defaults(tmp_path):
    assert _run("sensitivity", "--out", tmp_path) == EXIT_OK
    header, c = read_table(tmp_path / "curves.csv")
    assert header["axis"] == "mass_kg"
    m, T = c["mass_kg"], c["temperature_k"]
    assert np.all(np.diff(m) >= 0)
    row = np.isclose(m, 1e-9, rtol=1e-4, atol=0) & (T == 3.0)
    assert row.sum() == 1
    assert c["sqrt_saa_g_per_rthz"][row][0] == pytest.approx(8.0e-11, rel=0.01)
    assert np.all(c["electron_force_n"] == 9.27401e-20)
    assert np.all(c["proton_force_n"] == 1.41061e-22)
    hot = c["sqrt_sff_n_per_rthz"][T == 3.0]
    cold = c["sqrt_sff_n_per_rthz"][T == 0.01]
    assert np.allclose(hot / cold, math.sqrt(300), rtol=2e-5)


def test_sensitivity_empty_range_exits_2(tmp_path, capsys):
    cfg = _cfg_file(tmp_path, {"sweep": {"start": 1e-9, "stop": 1e-12}})
    assert _run("sensitivity", "--config", cfg, "--out", tmp_path) == EXIT_CONFIG
    assert "empty range" in capsys.readouterr().err


def test_sensitivity_temperature_axis(tmp_path):
    cfg = _cfg_file(tmp_path, {"sphere": {"mass_kg": 1e-12},
                               "sweep": {"axis": "temperature_k", "start": 0.01, "stop": 3.0, "points": 5}})
    assert _run("sensitivity", "--config", cfg, "--out", tmp_path) == EXIT_OK
    _, c = read_table(tmp_path / "curves.csv")
    assert np.all(c["mass_kg"] == 1e-12)
    assert np.all(np.diff(c["temperature_k"]) > 0)


# -- isolation and spin ---------------------------------------------------------


def test_isolation_default_table(tmp_path, capsys):
    assert _run("isolation", "--out", tmp_path) == EXIT_OK
    _, c = read_table(tmp_path / "isolation.csv")
    assert list(c["stage"]) == ["1", "2", "3", "total"]
    assert np.allclose(c["isolation_db"].astype(float), [30.0, 19.3, 6.1, 55.4], atol=0.05)
    # the table carries the wrapped values at output precision
    assert fmt(stage_isolation_db(CRYOSTAT_STAGES[0], 8.0)) == fmt(float(c["isolation_db"][0]))
    assert "stage total: 55.4 dB" in capsys.readouterr().out


def test_isolation_errors_exit_2(tmp_path):
    cfg = _cfg_file(tmp_path, {"isolation": {"stages": []}})
    assert _run("isolation", "--config", cfg, "--out", tmp_path) == EXIT_CONFIG
    resonant = _cfg_file(tmp_path, {"isolation": {"frequency_hz": 2.0,
                                                  "stages": [{"load_mass_kg": 1.0, "char_frequency_hz": 2.0}]}})
    assert _run("isolation", "--config", resonant, "--out", tmp_path) == EXIT_CONFIG


def test_spin_default_setup(tmp_path, capsys):
    assert _run("spin", "--out", tmp_path) == EXIT_OK
    _, v = read_kv(tmp_path / "spin.txt")
    assert float(v["lambda_over_2pi_hz"]) == pytest.approx(5.7e3, rel=0.01)
    assert float(v["cooperativity"]) == pytest.approx(1.7e8, rel=0.02)
    assert v["criterion_satisfied"] == "true"
    setup = SpinMechanicsSetup(1e4, OscillatorMode.from_linewidth(100.0, 0.59e-6), 1e-16, 0.01,
                               SPIN_MOMENTS["electron"], 1.0)
    assert v["lambda_over_2pi_hz"] == fmt(spin_coupling(setup).lambda_over_2pi)
    assert v["cooperativity"] == fmt(cooperativity(setup))
    assert "C = 1.7×10⁸" in capsys.readouterr().out


# -- round trips ----------------------------------------------------------------


def test_outputs_parse_back_losslessly(tmp_path):
    assert _run("protocol", "--config", "mode2_8p7hz", "--out", tmp_path) == EXIT_OK
    assert _run("sensitivity", "--out", tmp_path) == EXIT_OK
    assert _run("isolation", "--out", tmp_path) == EXIT_OK
    assert _run("spin", "--out", tmp_path) == EXIT_OK
    for name in ("curves.csv", "isolation.csv", "residuals.csv"):
        path = tmp_path / name
        header, cols = read_table(path)
        names = list(cols)
        rows = zip(*[cols[n] for n in names])
        text = write_table(None, header.items(), names, rows)
        assert text == path.read_text(encoding="utf-8"), name
    for name in ("summary.txt", "fit_report.txt", "spin.txt"):
        header, values = read_kv(tmp_path / name)
        assert write_kv(None, header.items(), values) == (tmp_path / name).read_text(encoding="utf-8")
    for name in ("excite.csv", "ringdown.csv"):
        ts = TimeSeries.from_csv(tmp_path / name)
        out = tmp_path / ("copy_" + name)
        ts.to_csv(out)
        assert out.read_bytes() == (tmp_path / name).read_bytes()


def test_version_and_usage(capsys):
    with pytest.raises(SystemExit) as err:
        main(["--version"])
    assert err.value.code == 0
    with pytest.raises(SystemExit) as err:
        main(["simulate", "--seed", "-1"])
    assert err.value.code == 2
