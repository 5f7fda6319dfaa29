import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, optimize

from ofdma_rra.rate_model import (
    RadioParams,
    achieved_rate,
    build_rate_matrix,
    dbm_to_watts,
    gaussian_tail,
    normalized_cnr,
    q_inverse,
    snr_gap,
)


def tail_by_quadrature(x):
    f = lambda t: math.exp(-t * t / 2) / math.sqrt(2 * math.pi)  # noqa: E731
    return integrate.quad(f, x, np.inf, epsabs=0, epsrel=1e-13)[0]


def q_inverse_by_quadrature(p):
    return optimize.brentq(lambda x: math.log(tail_by_quadrature(x)) - math.log(p), -1, 9, xtol=1e-14)


@pytest.mark.parametrize("p", [0.4, 0.158655, 0.05, 1e-3, 2.5e-7, 1e-12])
def test_q_inverse_matches_quadrature(p):
    assert q_inverse(p) == pytest.approx(q_inverse_by_quadrature(p), rel=1e-9)


def test_q_inverse_known_points():
    assert abs(q_inverse(0.5 - 1e-12)) < 1e-9
    assert q_inverse(0.158655) == pytest.approx(1.0, abs=1e-5)
    # value frozen from an independent quadrature + root-finding run
    assert q_inverse(2.5e-7) == pytest.approx(5.026312836056685, rel=1e-9)


@pytest.mark.parametrize("p", [0.0, 0.5, 0.7, -1e-3, float("nan")])
def test_q_inverse_domain(p):
    with pytest.raises(ValueError):
        q_inverse(p)


@given(st.floats(1e-15, 0.499), st.floats(1e-15, 0.499))
def test_q_inverse_strictly_decreasing(a, b):
    lo, hi = min(a, b), max(a, b)
    assert q_inverse(lo) >= q_inverse(hi)
    # strict once the inputs differ by more than float resolution of the output
    if hi > lo * (1 + 1e-6):
        assert q_inverse(lo) > q_inverse(hi)


@given(st.floats(1e-14, 0.49))
def test_q_inverse_roundtrip(p):
    assert gaussian_tail(q_inverse(p)) == pytest.approx(p, rel=1e-9)


def test_snr_gap_values():
    assert snr_gap(1e-6) == pytest.approx(8.421273575302733, rel=1e-9)
    assert snr_gap(1e-6) == pytest.approx(8.4, abs=0.05)
    assert snr_gap(0.2) == pytest.approx(0.901847818031805, rel=1e-9)
    assert snr_gap(1e-6) > snr_gap(1e-3)


def test_snr_gap_is_a_penalty_below_one_tenth():
    for pe in np.geomspace(1e-12, 0.0999, 40):
        assert snr_gap(pe) > 1.0


def test_radio_params_validation():
    with pytest.raises(ValueError):
        RadioParams(error_rate=0.6)
    with pytest.raises(ValueError):
        RadioParams(subchannel_bandwidth=0)
    with pytest.raises(ValueError):
        RadioParams(max_order=0)


def test_noise_floor_in_watts():
    p = RadioParams()
    assert dbm_to_watts(30.0) == pytest.approx(1.0)
    assert p.noise_density == pytest.approx(10 ** (-17.4) * 1e-3 * 1e3 / 1e3)
    assert p.noise_floor == pytest.approx(p.noise_density * 200e3)


def test_normalized_cnr_identities():
    p = RadioParams()
    unit = p.gap * p.noise_density * p.subchannel_bandwidth
    assert normalized_cnr(0.0, p) == 0.0
    assert normalized_cnr(unit, p) == pytest.approx(1.0)
    assert normalized_cnr(2e-13, p) == pytest.approx(2 * normalized_cnr(1e-13, p))
    with pytest.raises(ValueError):
        normalized_cnr(-1.0, p)


def test_achieved_rate_examples():
    assert achieved_rate(1.0, 1.0, 6) == pytest.approx(1.0)
    assert achieved_rate(1.0, 1000.0, 6) == 6.0
    assert achieved_rate(0.0, 5.0, 6) == 0.0
    # exactly at the cap
    assert achieved_rate(1.0, 2.0**6 - 1, 6) == 6.0


def test_build_rate_matrix():
    p = RadioParams()
    unit = p.gap * p.noise_density * p.subchannel_bandwidth
    assert build_rate_matrix([[unit]], 1.0, p)[0, 0] == pytest.approx(1.0)
    assert np.all(build_rate_matrix(np.zeros((3, 2)), 5.0, p) == 0)
    g = np.array([[unit, 4 * unit], [0.5 * unit, 1e6 * unit]])
    r = build_rate_matrix(g, 2.0, p)
    assert r.shape == (2, 2)
    # per-subchannel power is P_bs / N
    assert r[0, 0] == pytest.approx(1.0)
    assert r[1, 1] == 6.0
    assert np.all(build_rate_matrix(g, 4.0, p) >= r)
    with pytest.raises(ValueError):
        build_rate_matrix(np.zeros((0, 2)), 1.0, p)


def test_rate_properties_on_1e5_samples():
    rng = np.random.default_rng(7)
    n = 100_000
    power = 10 ** rng.uniform(-6, 3, n)
    gamma = 10 ** rng.uniform(-6, 6, n)
    c_max = rng.integers(1, 11, n)
    r = achieved_rate(power, gamma, c_max)
    assert np.all(r >= 0) and np.all(r <= c_max)
    assert np.all(achieved_rate(power * (1 + rng.random(n)), gamma, c_max) >= r)
    assert np.all(achieved_rate(power, gamma * (1 + rng.random(n)), c_max) >= r)
    assert np.all((r == 0) == (power * gamma == 0))


@given(st.floats(0, 1e4), st.floats(0, 1e8), st.integers(1, 12))
def test_rate_bounded(p, g, c):
    r = achieved_rate(p, g, c)
    assert 0.0 <= r <= c
    assert (r == 0) == (p * g == 0)


@given(st.floats(0, 1e3), st.floats(0, 1e3), st.floats(0, 1e6), st.integers(1, 10))
def test_rate_monotone_in_power(p1, p2, g, c):
    lo, hi = sorted((p1, p2))
    assert achieved_rate(lo, g, c) <= achieved_rate(hi, g, c)
