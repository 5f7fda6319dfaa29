"""Per-drop channel gains: log-distance path loss, log-normal shadowing and
frequency-selective Rayleigh fading that evolves across frames.

Large-scale terms are frozen for the drop; the small-scale part of each user
is an ``num_taps``-tap complex Gaussian impulse response (equal tap powers,
unit total power) mapped onto the ``N`` subchannels by a DFT and advanced
frame to frame by a first-order autoregression with coefficient ``rho_t``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

EXCLUSION_RADIUS = 10.0  # metres

# stream identifiers for SeedSequence derivation
_PLACEMENT_STREAM = 0
_FADING_STREAM = 1


@dataclass(frozen=True)
class ChannelConfig:
    carrier_frequency: float = 2.5e9
    cell_radius: float = 2000.0
    pathloss_exponent: float = 3.5
    pathloss_ref_db: float = 38.0
    shadowing_sigma_db: float = 8.0
    num_taps: int = 6
    doppler_correlation: float = 0.95
    frames_per_drop: int = 100

    def __post_init__(self):
        if self.cell_radius <= EXCLUSION_RADIUS:
            raise ValueError(f"cell_radius must exceed {EXCLUSION_RADIUS} m")
        if self.num_taps < 1:
            raise ValueError("num_taps must be >= 1")
        if not 0.0 <= self.doppler_correlation < 1.0:
            raise ValueError("doppler_correlation must lie in [0, 1)")
        if self.frames_per_drop < 1:
            raise ValueError("frames_per_drop must be >= 1")
        if self.shadowing_sigma_db < 0:
            raise ValueError("shadowing_sigma_db must be non-negative")


@dataclass(frozen=True)
class UserPlacement:
    distances: np.ndarray  # metres
    shadowing_db: np.ndarray

    @property
    def n_users(self) -> int:
        return len(self.distances)


def _rng(seed, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), stream]))


def place_users(n_users: int, cfg: ChannelConfig, seed: int) -> UserPlacement:
    """Uniform placement over the disc (annulus outside the exclusion radius)."""
    if n_users < 1:
        raise ValueError("need at least one user")
    rng = _rng(seed, _PLACEMENT_STREAM)
    r0, r1 = EXCLUSION_RADIUS, cfg.cell_radius
    # inverse CDF of the radial density 2d / (r1^2 - r0^2)
    u = rng.random(n_users)
    distances = np.sqrt(r0 * r0 + u * (r1 * r1 - r0 * r0))
    shadowing = rng.normal(0.0, cfg.shadowing_sigma_db, n_users)
    return UserPlacement(distances=distances, shadowing_db=shadowing)


def pathloss_db(distance, cfg: ChannelConfig):
    return cfg.pathloss_ref_db + 10.0 * cfg.pathloss_exponent * np.log10(distance)


def large_scale_gain(placement: UserPlacement, cfg: ChannelConfig) -> np.ndarray:
    """Linear power gain per user from path loss and shadowing."""
    return 10.0 ** ((placement.shadowing_db - pathloss_db(placement.distances, cfg)) / 10.0)


def fading_frames(n_sub: int, n_users: int, cfg: ChannelConfig, rng: np.random.Generator) -> np.ndarray:
    """Unit-mean fading power, shape ``(frames, n_sub, n_users)``."""
    taps = cfg.num_taps
    rho = cfg.doppler_correlation
    innov = np.sqrt(1.0 - rho * rho)
    scale = np.sqrt(0.5 / taps)

    def draw():
        return scale * (rng.standard_normal((taps, n_users)) + 1j * rng.standard_normal((taps, n_users)))

    # DFT of the tap vector onto the subchannel grid
    basis = np.exp(-2j * np.pi * np.outer(np.arange(n_sub), np.arange(taps)) / n_sub)
    out = np.empty((cfg.frames_per_drop, n_sub, n_users))
    h = draw()
    for t in range(cfg.frames_per_drop):
        if t:
            h = rho * h + innov * draw()
        out[t] = np.abs(basis @ h) ** 2
    return out


def generate_drop_gains(placement: UserPlacement, n_sub: int, cfg: ChannelConfig, seed: int) -> np.ndarray:
    """Channel power gains for every frame of a drop, shape ``(frames, N, K)``."""
    if n_sub < 1:
        raise ValueError("need at least one subchannel")
    fading = fading_frames(n_sub, placement.n_users, cfg, _rng(seed, _FADING_STREAM))
    return fading * large_scale_gain(placement, cfg)[None, None, :]
