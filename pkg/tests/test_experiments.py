import json
import math

import numpy as np
import pytest

from pinchisac.experiments import (ConfigError, EmptyResultError, ScenarioConfig, TrialResult,
                                   case_config, dbm_to_watts, draw_entities, emit, monte_carlo,
                                   read_csv, run_sweep, schema_path, to_csv, trial_entities)


def test_dbm_conversion_exact():
    assert abs(dbm_to_watts(-60.0) - 1e-9) <= 1e-15 * 1e-9
    assert abs(dbm_to_watts(-80.0) - 1e-11) <= 1e-15 * 1e-11
    assert dbm_to_watts(30.0) == 1.0


def test_defaults():
    cfg = ScenarioConfig()
    assert (cfg.length_m, cfg.width_m, cfg.height_m) == (40.0, 20.0, 3.0)
    assert (cfg.n_tx, cfg.n_rx, cfg.p_max_watts, cfg.gamma_req) == (4, 4, 10.0, 4.0)
    assert cfg.sigma_u2_watts == pytest.approx(1e-9, rel=1e-15)
    assert cfg.sigma_s2_watts == pytest.approx(1e-11, rel=1e-15)
    assert (cfg.wavelength_m, cfg.n_eff, cfg.alpha_abs, cfg.trials) == (0.05, 1.4, 1.0, 200)


def test_parse_text():
    cfg = ScenarioConfig.from_text("""
        # noise in dBm, power in watts
        p_max_watts = 5
        sigma_u_dbm = -70   # trailing comment
        n_tx = 2
        tx_y_m = 5, 15
        algorithms = pinching, midpoint
        sweep_axis = gamma
        sweep_values = 0, 1.5, 3
    """)
    assert cfg.p_max_watts == 5.0 and cfg.n_tx == 2 and cfg.tx_y_m == (5.0, 15.0)
    assert cfg.sigma_u2_watts == pytest.approx(1e-10, rel=1e-15)
    assert cfg.algorithms == ("pinching", "midpoint")
    assert cfg.sweep_values == (0.0, 1.5, 3.0)


@pytest.mark.parametrize("text", [
    "unknown_key = 1", "n_tx = two", "no equals sign", "gamma_req = -1", "pfa = 1.5",
    "algorithms = telepathy", "sweep_values = 3, 1", "placement = fixed\nuser_x_m = 99",
    "n_tx = 3\ntx_y_m = 1, 2",
])
def test_config_errors(text):
    with pytest.raises(ConfigError):
        ScenarioConfig.from_text(text)


def test_missing_file():
    with pytest.raises(ConfigError, match="cannot read"):
        ScenarioConfig.from_file("/nonexistent/scenario.cfg")


def test_case_coordinates():
    cfg = case_config(1)
    assert cfg.user == (4.0, 8.0) and cfg.target == (-4.0, 12.0)
    assert cfg.tx_y_m == pytest.approx((20 / 3, 40 / 3))
    assert case_config(3).user == pytest.approx((12.0, 8.0))
    with pytest.raises(ConfigError):
        case_config(4)


def test_random_entities_separated_and_seeded():
    cfg = ScenarioConfig(min_separation_m=8.0, seed=4)
    draws = trial_entities(cfg, 300)
    for u, t in draws:
        assert math.hypot(u[0] - t[0], u[1] - t[1]) >= 8.0
        assert -20 <= u[0] <= 20 and 0 <= u[1] <= 20
    assert draws == trial_entities(cfg, 300)
    assert draws[:50] == trial_entities(cfg, 50)
    assert draws != trial_entities(cfg.replace(seed=5), 300)
    rng = np.random.default_rng(0)
    assert draw_entities(rng, cfg) != draw_entities(rng, cfg)


def test_infeasible_trial_rate_is_zero():
    r = TrialResult(0, "midpoint", 0, 0, 1, 1, 3.2, 2.0, False, 0.0, 0, [])
    assert r.rate == 0.0 and r.radar_snr == 0.0


FAST = ScenarioConfig(algorithms=("pinching", "conventional", "target-oriented"), seed=11)


def _aggregate(res):
    return [(s.algorithm, s.mean_rate, s.std_error, s.feasible_fraction) for s in res.summary]


def test_monte_carlo_deterministic_and_parallel_invariant():
    a = monte_carlo(FAST, trials=3)
    b = monte_carlo(FAST, trials=3)
    c = monte_carlo(FAST, trials=3, threads=2)
    assert _aggregate(a) == _aggregate(b) == _aggregate(c)
    assert len(a.trials) == 9
    assert all(r.rate == 0.0 for r in a.trials if not r.feasible)
    rates = [r.rate for r in a.trials if r.algorithm == "pinching"]
    s = a.by_algorithm()["pinching"]
    assert s.mean_rate == float(np.mean(rates))
    assert s.std_error == pytest.approx(np.std(rates, ddof=1) / np.sqrt(3))
    with pytest.raises(ConfigError):
        monte_carlo(FAST, trials=0)


def test_sweep_rows_and_validation():
    res = run_sweep("gamma", [0.0, 3.0, 6.0], FAST, trials=2)
    assert len(res.summary) == 9
    assert [s.sweep_value for s in res.summary[::3]] == [0.0, 3.0, 6.0]
    curve = res.curve("pinching")
    assert np.all(np.diff(curve) <= 0)
    for trial in range(2):
        per = [r.rate for r in res.trials if r.trial == trial and r.algorithm == "pinching"]
        assert all(b <= a for a, b in zip(per, per[1:]))
    with pytest.raises(ConfigError):
        run_sweep("gamma", [3.0, 1.0], FAST, trials=1)
    with pytest.raises(ConfigError):
        run_sweep("m", [2.5], FAST, trials=1)
    with pytest.raises(ConfigError):
        run_sweep("height", [1.0], FAST, trials=1)


def _rows():
    return [TrialResult(0, "pinching", 0.1, 1 / 3, -2.5, 7.0, 13.123456789012345, 4.0, True,
                        0.25, 7, [1 / 7, -2.0, 1e-300, 19.999999999999996]),
            TrialResult(1, "midpoint", 5.0, 5.0, -5.0, 5.0, 0.0, 0.0, False, 0.0, 0, []),
            TrialResult(2, "exhaustive", 0.0, 0.0, 1.0, 1.0, 2.0, 1.0, True, 0.0, 0, [0.5],
                        "gamma", 2.5)]


def test_csv_round_trip_bit_exact(tmp_path):
    rows = _rows()
    path = tmp_path / "out.csv"
    emit(rows, "csv", str(path))
    raw = path.read_bytes()
    assert b"\r" not in raw and raw.decode("utf-8").splitlines()[0].startswith("trial,algorithm")
    back = read_csv(str(path))
    for a, b in zip(rows, back):
        for name in ("trial", "algorithm", "user_x", "user_y", "target_x", "target_y", "rate",
                     "radar_snr", "feasible", "solve_time", "sca_iterations", "x",
                     "sweep_axis"):
            assert getattr(a, name) == getattr(b, name)
        assert (math.isnan(a.sweep_value) and math.isnan(b.sweep_value)) or (
            a.sweep_value == b.sweep_value)


def test_json_matches_schema(tmp_path):
    jsonschema = pytest.importorskip("jsonschema")
    path = tmp_path / "out.json"
    emit(_rows(), "json", str(path))
    payload = json.loads(path.read_text())
    with open(schema_path()) as fh:
        schema = json.load(fh)
    jsonschema.validate(payload, schema)
    bad = dict(payload[1], rate=1.0)
    with pytest.raises(jsonschema.ValidationError):
        jsonschema.validate([bad], schema)


def test_emit_guards(tmp_path):
    with pytest.raises(EmptyResultError):
        to_csv([])
    with pytest.raises(EmptyResultError):
        emit([], "json", str(tmp_path / "x.json"))
    with pytest.raises(ValueError):
        emit(_rows(), "xml", str(tmp_path / "x.xml"))
    target = tmp_path / "missing" / "x.csv"
    with pytest.raises(OSError, match="missing"):
        emit(_rows(), "csv", str(target))
