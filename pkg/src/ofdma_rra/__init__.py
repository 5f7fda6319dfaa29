"""Subchannel allocation for a multi-service OFDMA downlink under uniform power loading.

Modules
-------
rate_model   SNR-gap rate mapping and rate matrices
channel      per-drop channel gains (path loss, shadowing, multipath fading)
core         problem instance, allocation, objective, CSV formats
heuristics   HEUR1, HEUR2 and the semi-random baseline
exact        LP bound, branch-and-bound optimum, exhaustive oracle
harness      Monte-Carlo evaluation protocol and reports
cli          command-line entry point
"""

from .core import Allocation, Evaluation, Instance, evaluate
from .exact import exhaustive_oracle, solve_ilp, solve_lp
from .heuristics import Heur1Options, heur1, heur2, random_baseline
from .rate_model import RadioParams, achieved_rate, build_rate_matrix, snr_gap

__all__ = [
    "Allocation",
    "Evaluation",
    "Heur1Options",
    "Instance",
    "RadioParams",
    "achieved_rate",
    "build_rate_matrix",
    "evaluate",
    "exhaustive_oracle",
    "heur1",
    "heur2",
    "random_baseline",
    "snr_gap",
    "solve_ilp",
    "solve_lp",
]

__version__ = "0.1.0"
