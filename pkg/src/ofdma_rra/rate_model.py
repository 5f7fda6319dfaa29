"""PHY abstraction: channel gain -> achievable bits per OFDMA symbol.

The achievable rate on a subchannel is the gap-approximated capacity

    r = min(log2(1 + P_n * gamma), c_max),  gamma = |h|^2 / (Gamma * N0 * df)

with the SNR gap ``Gamma = (1/3) * Qinv(P_e / 4)**2`` for a target error rate.
Rates stay real valued; no rounding to a modulation codebook.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_SQRT2 = math.sqrt(2.0)
_SQRT2PI = math.sqrt(2.0 * math.pi)


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


@dataclass(frozen=True)
class RadioParams:
    """Link budget constants shared by every subchannel.

    ``noise_density_dbm_hz`` is kept in dBm/Hz as configured; use
    :attr:`noise_density` for the linear W/Hz value.
    """

    noise_density_dbm_hz: float = -174.0
    subchannel_bandwidth: float = 200e3
    error_rate: float = 1e-6
    max_order: int = 6

    def __post_init__(self):
        if not 0.0 < self.error_rate < 0.5:
            raise ValueError(f"error_rate must lie in (0, 0.5), got {self.error_rate}")
        if self.subchannel_bandwidth <= 0:
            raise ValueError("subchannel_bandwidth must be positive")
        if int(self.max_order) != self.max_order or self.max_order < 1:
            raise ValueError("max_order must be a positive integer")

    @property
    def noise_density(self) -> float:
        """Noise power spectral density in W/Hz."""
        return dbm_to_watts(self.noise_density_dbm_hz)

    @property
    def gap(self) -> float:
        return snr_gap(self.error_rate)

    @property
    def noise_floor(self) -> float:
        """Gap-scaled noise power ``Gamma * N0 * df`` in watts."""
        return self.gap * self.noise_density * self.subchannel_bandwidth


def gaussian_tail(x: float) -> float:
    """Standard normal upper tail ``Q(x)``."""
    return 0.5 * math.erfc(x / _SQRT2)


def q_inverse(p: float, rtol: float = 1e-12) -> float:
    """Inverse of the Gaussian tail on (0, 0.5).

    Bisection on :func:`gaussian_tail` to bracket the root, then Newton
    polishing. The result satisfies ``|Q(x) - p| <= 1e-9 * p``.
    """
    if not 0.0 < p < 0.5:
        raise ValueError(f"q_inverse is defined on (0, 0.5), got {p!r}")
    lo, hi = 0.0, 1.0
    while gaussian_tail(hi) > p:
        lo, hi = hi, 2.0 * hi
    # bisect until the bracket is narrow enough for Newton to converge safely
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if gaussian_tail(mid) > p:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-6 * max(1.0, hi):
            break
    x = 0.5 * (lo + hi)
    for _ in range(50):
        density = math.exp(-0.5 * x * x) / _SQRT2PI
        if density == 0.0:
            break
        step = (gaussian_tail(x) - p) / density
        x_new = min(max(x + step, lo), hi)
        if abs(x_new - x) <= rtol * max(1.0, abs(x)):
            x = x_new
            break
        x = x_new
    return x


def snr_gap(error_rate: float) -> float:
    """SNR gap ``(1/3) * Qinv(P_e / 4)**2`` for a target error probability."""
    if not 0.0 < error_rate < 0.5:
        raise ValueError(f"error_rate must lie in (0, 0.5), got {error_rate!r}")
    return q_inverse(error_rate / 4.0) ** 2 / 3.0


def normalized_cnr(gain_sq, params: RadioParams):
    """Channel power gain divided by the gap-scaled noise power."""
    gain_sq = np.asarray(gain_sq, dtype=float)
    if np.any(gain_sq < 0):
        raise ValueError("channel power gains must be non-negative")
    gamma = gain_sq / params.noise_floor
    return float(gamma) if gamma.ndim == 0 else gamma


def achieved_rate(power, cnr, c_max):
    """Capped gap-capacity in bits/symbol; broadcasts over arrays."""
    power = np.asarray(power, dtype=float)
    if np.any(power < 0):
        raise ValueError("power must be non-negative")
    # log1p keeps tiny SNRs from rounding to a zero rate
    snr = power * np.asarray(cnr, dtype=float)
    rate = np.minimum(np.log1p(snr) / np.log(2.0), np.asarray(c_max, dtype=float))
    return float(rate) if rate.ndim == 0 else rate


def build_rate_matrix(gains, total_power: float, params: RadioParams) -> np.ndarray:
    """N x K rate matrix under uniform power loading ``P_n = P_bs / N``."""
    gains = np.asarray(gains, dtype=float)
    if gains.ndim != 2 or gains.size == 0:
        raise ValueError(f"gains must be a non-empty 2-D array, got shape {gains.shape}")
    if total_power < 0:
        raise ValueError("total_power must be non-negative")
    n_sub = gains.shape[0]
    return np.asarray(
        achieved_rate(total_power / n_sub, normalized_cnr(gains, params), params.max_order)
    ).reshape(gains.shape)
