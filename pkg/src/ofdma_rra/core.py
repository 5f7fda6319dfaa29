"""Problem instance, allocation record and the shared objective semantics.

CBR constraints are read in covering form, ``lhs_k >= R_min_k``, with any
surplus credited at exactly ``R_min_k``. Every solver in the package shares
this reading, so their objectives are directly comparable.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

UNASSIGNED = -1
# absolute slack on every "lhs >= R_min" test, shared by all solvers
FEAS_TOL = 1e-9


class ExclusivityError(ValueError):
    """An allocation assigns a subchannel to a nonexistent user."""


@dataclass(frozen=True, eq=False)
class Instance:
    """One allocation problem.

    Parameters
    ----------
    rates : (N, K) array
        Achievable bits/symbol of every (subchannel, user) pair.
    cbr_users : sequence of int
        Column indices of the constant-bit-rate users.
    cbr_targets : sequence of float
        ``R_min`` for each CBR user, same order as ``cbr_users``.
    be_users : sequence of int, optional
        Best-effort users; defaults to every column not in ``cbr_users``.
    """

    rates: np.ndarray
    cbr_users: tuple
    cbr_targets: np.ndarray
    be_users: tuple = None

    def __post_init__(self):
        rates = np.array(self.rates, dtype=float)
        if rates.ndim != 2 or rates.shape[0] < 1 or rates.shape[1] < 1:
            raise ValueError(f"rates must be a non-empty N x K matrix, got shape {rates.shape}")
        if not np.all(np.isfinite(rates)) or np.any(rates < 0):
            raise ValueError("rates must be finite and non-negative")
        n_users = rates.shape[1]
        cbr = tuple(int(k) for k in self.cbr_users)
        if self.be_users is None:
            be = tuple(k for k in range(n_users) if k not in cbr)
        else:
            be = tuple(int(k) for k in self.be_users)
        if sorted(cbr + be) != list(range(n_users)):
            raise ValueError("cbr_users and be_users must partition the user columns")
        targets = np.array(self.cbr_targets, dtype=float).reshape(-1)
        if len(targets) != len(cbr):
            raise ValueError("need one R_min per CBR user")
        if np.any(targets <= 0) or not np.all(np.isfinite(targets)):
            raise ValueError("CBR targets must be positive and finite")
        rates.setflags(write=False)
        targets.setflags(write=False)
        object.__setattr__(self, "rates", rates)
        object.__setattr__(self, "cbr_users", cbr)
        object.__setattr__(self, "be_users", be)
        object.__setattr__(self, "cbr_targets", targets)

    @classmethod
    def from_rates(cls, rates, cbr_targets: Sequence[float]) -> "Instance":
        """Conventional layout: the first ``len(cbr_targets)`` columns are CBR."""
        k1 = len(np.atleast_1d(cbr_targets))
        return cls(rates, tuple(range(k1)), cbr_targets)

    @property
    def n_subchannels(self) -> int:
        return self.rates.shape[0]

    @property
    def n_users(self) -> int:
        return self.rates.shape[1]

    @property
    def targets(self) -> np.ndarray:
        """``R_min`` indexed by user column; zero for BE users."""
        b = np.zeros(self.n_users)
        b[list(self.cbr_users)] = self.cbr_targets
        return b

    def is_cbr(self, k: int) -> bool:
        return k in self.cbr_users

    def best_be(self, n: int) -> int:
        """Best-rate BE user on subchannel ``n`` (lowest index on ties)."""
        if not self.be_users:
            return UNASSIGNED
        be = self.be_users
        row = self.rates[n, list(be)]
        return be[int(np.argmax(row))]

    def best_be_rates(self) -> np.ndarray:
        """Per-subchannel best BE rate (zeros when there are no BE users)."""
        if not self.be_users:
            return np.zeros(self.n_subchannels)
        return self.rates[:, list(self.be_users)].max(axis=1)

    def cbr_only(self) -> "Instance":
        """Same problem with the BE columns dropped."""
        cols = list(self.cbr_users)
        return Instance(self.rates[:, cols], tuple(range(len(cols))), self.cbr_targets, ())


@dataclass
class Allocation:
    """Exclusive subchannel -> user map; ``UNASSIGNED`` marks a free subchannel.

    ``infeasible`` is set by procedures that gave up before meeting every CBR
    target (an outage); ``owner`` then holds whatever partial state they reached.
    """

    owner: np.ndarray
    infeasible: bool = False

    def __post_init__(self):
        self.owner = np.array(self.owner, dtype=int).reshape(-1)

    @classmethod
    def empty(cls, n_sub: int) -> "Allocation":
        return cls(np.full(n_sub, UNASSIGNED, dtype=int))

    def copy(self) -> "Allocation":
        return Allocation(self.owner.copy(), self.infeasible)

    def subchannels_of(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.owner == k)

    def __eq__(self, other):
        if not isinstance(other, Allocation):
            return NotImplemented
        return self.infeasible == other.infeasible and np.array_equal(self.owner, other.owner)


@dataclass(frozen=True)
class Evaluation:
    lhs: np.ndarray  # delivered rate per CBR user, order of instance.cbr_users
    feasible: bool
    objective: float
    raw_sum: float


def check_exclusive(instance: Instance, alloc: Allocation) -> None:
    owner = alloc.owner
    if owner.shape != (instance.n_subchannels,):
        raise ExclusivityError(
            f"allocation covers {owner.shape[0]} subchannels, instance has {instance.n_subchannels}"
        )
    bad = (owner < UNASSIGNED) | (owner >= instance.n_users)
    if np.any(bad):
        raise ExclusivityError(f"invalid owners at subchannels {np.flatnonzero(bad).tolist()}")


def user_loads(instance: Instance, owner: np.ndarray) -> np.ndarray:
    """Delivered rate of every user (length K)."""
    assigned = owner >= 0
    lhs = np.zeros(instance.n_users)
    np.add.at(lhs, owner[assigned], instance.rates[np.flatnonzero(assigned), owner[assigned]])
    return lhs


def evaluate(instance: Instance, alloc: Allocation) -> Evaluation:
    """Feasibility and objective of an allocation.

    Feasible allocations score ``sum(R_min) + BE sum-rate``. Infeasible ones
    score the BE sum-rate plus ``sum(min(lhs_k, R_min_k))`` and are flagged.
    """
    check_exclusive(instance, alloc)
    owner = alloc.owner
    rates = instance.rates
    assigned = np.flatnonzero(owner >= 0)
    per_sub = np.zeros(instance.n_subchannels)
    per_sub[assigned] = rates[assigned, owner[assigned]]
    raw_sum = float(per_sub.sum())

    lhs = user_loads(instance, owner)[list(instance.cbr_users)]
    targets = instance.cbr_targets
    feasible = bool(np.all(lhs >= targets - FEAS_TOL))
    be_mask = np.isin(owner, instance.be_users) if instance.be_users else np.zeros(len(owner), bool)
    be_sum = float(per_sub[be_mask].sum())
    if feasible:
        objective = float(targets.sum()) + be_sum
    else:
        objective = float(np.minimum(lhs, targets).sum()) + be_sum
    return Evaluation(lhs=lhs, feasible=feasible, objective=objective, raw_sum=raw_sum)


def comparison_objective(instance: Instance, alloc: Allocation) -> float:
    """Scalar used in every cross-scheme table."""
    return evaluate(instance, alloc).objective


def objective_upper_bound(instance: Instance) -> float:
    """``sum(R_min) + sum_n max_{k in BE} r(n, k)``; no allocation can beat it."""
    return float(instance.cbr_targets.sum() + instance.best_be_rates().sum())


# --- CSV formats -----------------------------------------------------------
# Instance: "N,K,K1" / R_min of the K1 CBR users / N rows of K rates.
# CBR users occupy columns 1..K1. Allocation: N rows "subchannel,owner",
# both 1-based, owner 0 for an unassigned subchannel.


def _fmt(x: float) -> str:
    return f"{x:.9g}"


def format_instance(instance: Instance) -> str:
    if instance.cbr_users != tuple(range(len(instance.cbr_users))):
        raise ValueError("the CSV layout requires CBR users in the leading columns")
    n, k = instance.rates.shape
    lines = [f"{n},{k},{len(instance.cbr_users)}", ",".join(_fmt(b) for b in instance.cbr_targets)]
    lines.extend(",".join(_fmt(v) for v in row) for row in instance.rates)
    return "\n".join(lines) + "\n"


def parse_instance(text: str) -> Instance:
    rows = [line.strip() for line in text.splitlines()]
    if len(rows) < 2:
        raise ValueError("instance CSV needs a header and an R_min line")
    n, k, k1 = (int(v) for v in rows[0].split(","))
    # the R_min line is present but empty when K1 = 0
    targets = [float(v) for v in rows[1].split(",")] if rows[1] else []
    if len(targets) != k1:
        raise ValueError(f"expected {k1} R_min values, got {len(targets)}")
    body = [row for row in rows[2:] if row]
    if len(body) != n:
        raise ValueError(f"expected {n} rate rows, got {len(body)}")
    rates = np.array([[float(v) for v in row.split(",")] for row in body])
    if rates.shape != (n, k):
        raise ValueError(f"rate block has shape {rates.shape}, header says ({n}, {k})")
    return Instance.from_rates(rates, targets)


def write_instance(instance: Instance, path) -> None:
    Path(path).write_text(format_instance(instance))


def read_instance(path) -> Instance:
    return parse_instance(Path(path).read_text())


def format_allocation(alloc: Allocation) -> str:
    buf = io.StringIO()
    for n, k in enumerate(alloc.owner):
        buf.write(f"{n + 1},{int(k) + 1}\n")
    return buf.getvalue()


def parse_allocation(text: str) -> Allocation:
    pairs = [tuple(int(v) for v in line.split(",")) for line in text.splitlines() if line.strip()]
    owner = np.full(len(pairs), UNASSIGNED, dtype=int)
    for sub, k in pairs:
        owner[sub - 1] = k - 1
    return Allocation(owner)
