import math

import numpy as np
import pytest

from ofdma_rra import harness
from ofdma_rra.channel import ChannelConfig
from ofdma_rra.exact import LpSolution, exhaustive_oracle
from ofdma_rra.harness import (
    SCENARIO_HEADER,
    BoundChainViolation,
    CalibrationError,
    ScenarioConfig,
    calibrate_feasible_power,
    convergence_statistic,
    emit_reports,
    parse_config,
    run_drop,
    run_scenario,
    scenario_grid,
)
from ofdma_rra.rate_model import RadioParams, achieved_rate, normalized_cnr

FAST = dict(N=12, K1=2, K2=2, R_min=4.0, frames_per_drop=2, min_drops=2, max_drops=2,
            ip_time_limit=5.0)


def test_config_validation():
    with pytest.raises(ValueError):
        ScenarioConfig(min_drops=5, max_drops=4)
    with pytest.raises(ValueError):
        ScenarioConfig(sigma_norm=0)
    with pytest.raises(ValueError):
        ScenarioConfig(power_ratio=0.5)
    with pytest.raises(ValueError):
        ScenarioConfig(algorithms=("heur1", "magic"))
    with pytest.raises(ValueError):
        ScenarioConfig(K1=2, R_min=(1.0, 2.0, 3.0))


def test_config_normalisation():
    cfg = ScenarioConfig(K1=3, R_min=5.0, frames_per_drop=7, algorithms=("ip", "heur1"))
    assert list(cfg.targets) == [5.0] * 3
    assert cfg.channel.frames_per_drop == 7
    assert cfg.algorithms == ("heur1", "ip")


def test_parse_config():
    text = """
    # desk scenario
    N = 16
    K1 = 2, 3
    power_ratio = 2.0, 4.0
    R_min = 6
    algorithms = heur1, random
    channel.num_taps = 3
    radio.error_rate = 1e-5
    """
    kw = parse_config(text)
    assert kw["N"] == 16 and kw["K1"] == (2, 3) and kw["power_ratio"] == (2.0, 4.0)
    assert kw["channel"] == ChannelConfig(num_taps=3)
    assert kw["radio"] == RadioParams(error_rate=1e-5)
    grid = scenario_grid(kw)
    assert [(c.K1, c.power_ratio) for c in grid] == [(2, 2.0), (2, 4.0), (3, 2.0), (3, 4.0)]
    assert all(c.algorithms == ("heur1", "random") for c in grid)


@pytest.mark.parametrize("text", ["bogus = 1", "channel.bogus = 1", "N = 3\nN = 4", "N 3", "weird.N = 3"])
def test_parse_config_rejects(text):
    with pytest.raises(ValueError):
        parse_config(text)


def test_per_user_targets_in_config():
    (cfg,) = scenario_grid(parse_config("K1 = 2\nR_min = 3, 5\n"))
    assert list(cfg.targets) == [3.0, 5.0]


def test_published_scale_defaults():
    grid = scenario_grid({"seed": 3}, paper_scale=True)
    assert len(grid) == 4 * 5
    cfg = grid[0]
    assert (cfg.N, cfg.K2, cfg.frames_per_drop, cfg.min_drops, cfg.max_drops) == (100, 5, 100, 25, 1000)
    assert cfg.sigma_norm == 0.02 and cfg.targets[0] == 36.0 and cfg.seed == 3


# --- calibration ---


def _flat_gain_for_rate(rate, power, n_sub, radio):
    """Gain that gives exactly ``rate`` per subchannel at total power ``power``."""
    snr = 2.0**rate - 1.0
    return snr / (power / n_sub) * radio.noise_floor


def test_calibration_single_user_closed_form():
    radio = RadioParams()
    n, p_star = 8, 5.0
    g = _flat_gain_for_rate(2.5, p_star, n, radio)
    gains = np.full((n, 1), g)
    rate = achieved_rate(p_star / n, normalized_cnr(g, radio), radio.max_order)
    p = calibrate_feasible_power(gains, [n * rate], radio)
    assert p == pytest.approx(p_star, rel=2e-3)
    assert p >= p_star * (1 - 1e-9)


def test_calibration_scales_inversely_with_gain():
    radio = RadioParams()
    rng = np.random.default_rng(0)
    gains = rng.exponential(1e-15, (10, 2))
    targets = [3.0, 3.0]
    p1 = calibrate_feasible_power(gains, targets, radio)
    p4 = calibrate_feasible_power(4 * gains, targets, radio)
    assert p4 == pytest.approx(p1 / 4, rel=3e-3)


def test_calibration_monotone_feasibility():
    radio = RadioParams()
    rng = np.random.default_rng(1)
    gains = rng.exponential(1e-14, (10, 3))
    targets = np.array([4.0, 4.0, 4.0])
    p = calibrate_feasible_power(gains, targets, radio)
    for factor in (1.0, 1.5, 3.0, 10.0):
        assert harness._cbr_feasible(gains, p * factor, targets, radio, None)
    assert not harness._cbr_feasible(gains, p / 1.01, targets, radio, None)


def test_calibration_bracket_failure():
    radio = RadioParams()
    with pytest.raises(CalibrationError):
        # more than N * c_max bits can never be delivered
        calibrate_feasible_power(np.ones((2, 1)), [13.0], radio)


def test_calibration_widens_bracket():
    radio = RadioParams()
    gains = np.full((4, 1), 1e-22)
    p = calibrate_feasible_power(gains, [4.0], radio, bracket=(1e-3, 1e-2))
    assert harness._cbr_feasible(gains, p, np.array([4.0]), radio, None)


# --- drops and scenarios ---


def test_seed_derivation():
    assert harness.drop_seed(1, 0) == harness.drop_seed(1, 0)
    assert harness.drop_seed(1, 0) != harness.drop_seed(1, 1)
    assert harness.drop_seed(1, 0) != harness.drop_seed(2, 0)


def test_run_drop_single_algorithm():
    cfg = ScenarioConfig(**FAST, algorithms=("random",))
    res = run_drop(cfg, 0)
    assert set(res.frame_values) == {"random"}
    assert res.frame_values["random"].shape == (2,)


def test_run_drop_deterministic():
    cfg = ScenarioConfig(**FAST)
    a, b = run_drop(cfg, 3), run_drop(cfg, 3)
    for alg in cfg.algorithms:
        assert np.array_equal(a.frame_values[alg], b.frame_values[alg], equal_nan=True)
    assert a.p_feas == b.p_feas and a.violations == 0


def test_run_drop_ip_matches_oracle():
    cfg = ScenarioConfig(N=6, K1=1, K2=2, R_min=3.0, frames_per_drop=1, min_drops=1, max_drops=1,
                         algorithms=("ip",))
    for d in range(5):
        res = run_drop(cfg, d)
        _, _, insts = harness.frame_instances(cfg, d)
        assert res.frame_values["ip"][0] == exhaustive_oracle(insts[0])[1]


def test_forced_drop_count():
    cfg = ScenarioConfig(**{**FAST, "min_drops": 3, "max_drops": 3}, algorithms=("heur1", "random"))
    stats = run_scenario(cfg)
    assert stats.drops_executed == 3
    assert stats.converged == all(s <= cfg.sigma_norm for s in stats.statistic.values())


def test_zero_variance_channel_converges_at_min_drops(monkeypatch):
    cfg = ScenarioConfig(**{**FAST, "min_drops": 4, "max_drops": 50}, algorithms=("heur1", "heur2", "lp"))
    gains = np.random.default_rng(0).exponential(1e-14, (cfg.frames_per_drop, cfg.N, cfg.n_users))
    monkeypatch.setattr(harness, "generate_drop_gains", lambda *a, **k: gains)
    stats = run_scenario(cfg)
    assert stats.drops_executed == 4 and stats.converged
    assert all(s == 0.0 for s in stats.statistic.values())


def test_bound_chain_violation_is_fatal(monkeypatch):
    cfg = ScenarioConfig(**FAST, algorithms=("heur1", "lp"))
    monkeypatch.setattr(harness, "solve_lp", lambda inst: LpSolution(0.0, None, "optimal"))
    with pytest.raises(BoundChainViolation):
        run_scenario(cfg)


def test_convergence_statistic():
    assert convergence_statistic([5.0]) == math.inf
    assert convergence_statistic([2.0, 2.0, 2.0]) == 0.0
    x = np.array([1.0, 2.0, 3.0, 4.0])
    expected = x.std(ddof=1) / 2 / x.mean()
    assert convergence_statistic(x) == pytest.approx(expected)
    assert convergence_statistic([1.0, np.nan, 3.0]) == pytest.approx(np.std([1, 3], ddof=1) / np.sqrt(2) / 2)


def test_pairwise_ratio_skips_missing_frames():
    d = harness.DropResult(0, 1.0, 2.0, {"a": np.array([1.0, np.nan, 3.0]), "b": np.array([2.0, 5.0, 3.0])},
                           {"a": 1, "b": 0})
    assert harness.pairwise_ratio([d], "a", "b") == pytest.approx(4.0 / 5.0)


# --- reports ---


def test_empty_reports(tmp_path):
    paths = emit_reports([], tmp_path)
    assert [p.name for p in paths] == ["scenario_stats.csv", "sumrate_vs_load.csv",
                                       "sumrate_vs_power.csv", "swap_effect.csv"]
    for p in paths:
        assert len(p.read_text().splitlines()) == 1
    assert paths[0].read_text().strip() == ",".join(SCENARIO_HEADER)


def test_single_scenario_single_algorithm(tmp_path):
    cfg = ScenarioConfig(**FAST, algorithms=("heur1",))
    paths = emit_reports([run_scenario(cfg)], tmp_path)
    lines = paths[0].read_text().splitlines()
    assert len(lines) == 2
    row = dict(zip(lines[0].split(","), lines[1].split(",")))
    assert row["K1"] == "2" and row["mean_ip"] == "nan" and row["drops"] == "2"
    assert float(row["mean_heur1"]) > 0


def test_reports_deterministic_and_swap_gain(tmp_path):
    cfg = ScenarioConfig(**FAST, algorithms=("heur1", "heur1-noswap"))
    a = emit_reports([run_scenario(cfg)], tmp_path / "a")
    b = emit_reports([run_scenario(cfg)], tmp_path / "b")
    for x, y in zip(a, b):
        assert x.read_bytes() == y.read_bytes()
    gain = float(a[3].read_text().splitlines()[1].split(",")[-1])
    assert gain >= 0.0
