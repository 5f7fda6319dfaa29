"""Polynomial-time subchannel allocation heuristics.

``heur1`` builds a feasible CBR allocation first (worst-average-rate user
takes its best remaining subchannel), hands the rest to the best BE user,
then improves by pairwise interchanges and releases redundant CBR
subchannels. ``heur2`` starts from the unconstrained best-user allocation
and moves subchannels to unsatisfied CBR users by the cheapest
loss-per-gained-bit ratio. ``random_baseline`` is the semi-random reference.

All ties break toward the lowest subchannel index, then the lowest user.
Procedures that cannot meet every CBR target return an allocation with
``infeasible=True`` instead of raising.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import FEAS_TOL, UNASSIGNED, Allocation, Instance, user_loads


@dataclass
class OpCounter:
    """Tally of elementary comparisons/cell evaluations, for complexity checks."""

    comparisons: int = 0

    def add(self, n) -> None:
        self.comparisons += int(n)


@dataclass(frozen=True)
class Heur1Options:
    enable_swap: bool = True
    swap_rounds: int = 1

    def __post_init__(self):
        if self.swap_rounds < 1:
            raise ValueError("swap_rounds must be >= 1")


def _count(counter, n):
    if counter is not None:
        counter.add(n)


def _assign_leftovers_to_best_be(instance: Instance, owner: np.ndarray, counter=None) -> None:
    free = np.flatnonzero(owner == UNASSIGNED)
    if not instance.be_users or free.size == 0:
        return
    be = np.asarray(instance.be_users)
    owner[free] = be[np.argmax(instance.rates[np.ix_(free, be)], axis=1)]
    _count(counter, free.size * be.size)


# --- HEUR1 ----------------------------------------------------------------


def _cbr_feasible_fill(instance: Instance, owner: np.ndarray, counter=None) -> bool:
    """Give subchannels to CBR users until all are satisfied.

    Each round picks the unsatisfied user with the smallest mean rate over
    the free pool, then that user's best free subchannel. Returns ``False``
    when the pool runs dry first.
    """
    rates = instance.rates
    cbr = np.asarray(instance.cbr_users, dtype=int)
    if cbr.size == 0:
        return True
    targets = instance.cbr_targets
    lhs = np.zeros(cbr.size)
    pool = owner == UNASSIGNED
    while True:
        unsat = np.flatnonzero(lhs < targets - FEAS_TOL)
        if unsat.size == 0:
            return True
        free = np.flatnonzero(pool)
        if free.size == 0:
            return False
        # mean over the current pool, recomputed each round
        means = rates[np.ix_(free, cbr[unsat])].mean(axis=0)
        j = unsat[int(np.argmin(means))]
        k = cbr[j]
        n = free[int(np.argmax(rates[free, k]))]
        _count(counter, free.size * unsat.size + unsat.size + free.size)
        owner[n] = k
        pool[n] = False
        lhs[j] += rates[n, k]


def _swap_sweep(instance: Instance, owner: np.ndarray, counter=None) -> int:
    """One sweep of pairwise interchanges over all users; returns swaps made."""
    rates = instance.rates
    n_users = instance.n_users
    is_cbr = np.zeros(n_users, bool)
    is_cbr[list(instance.cbr_users)] = True
    b = instance.targets
    lhs = user_loads(instance, owner)
    swaps = 0

    for k in range(n_users):
        for n in np.flatnonzero(owner == k):
            if owner[n] != k:
                continue
            swapped = False
            for k2 in range(n_users):
                if k2 == k or swapped:
                    continue
                cand = np.flatnonzero(owner == k2)
                if cand.size == 0:
                    continue
                _count(counter, cand.size)
                r_n_k, r_n_k2 = rates[n, k], rates[n, k2]
                r_c_k, r_c_k2 = rates[cand, k], rates[cand, k2]
                # k gains n' and gives up n; k2 gains n and gives up n'
                k_ok = lhs[k] + r_c_k - r_n_k >= b[k] - FEAS_TOL
                k2_ok = lhs[k2] + r_n_k2 - r_c_k2 >= b[k2] - FEAS_TOL
                if is_cbr[k] and is_cbr[k2]:
                    fire = ((r_c_k > r_n_k) & k2_ok) | ((r_n_k2 > r_c_k2) & k_ok)
                elif not is_cbr[k] and not is_cbr[k2]:
                    fire = (r_c_k - r_n_k + r_n_k2 - r_c_k2) > 0
                elif is_cbr[k]:
                    fire = (r_n_k2 > r_c_k2) & k_ok
                else:
                    fire = (r_c_k > r_n_k) & k2_ok
                for idx in np.flatnonzero(fire):
                    n2 = cand[idx]
                    new_k = lhs[k] + rates[n2, k] - r_n_k
                    new_k2 = lhs[k2] + r_n_k2 - rates[n2, k2]
                    # CBR<->CBR guard: each firing condition alone checks only one side
                    if is_cbr[k] and is_cbr[k2] and (new_k < b[k] - FEAS_TOL or new_k2 < b[k2] - FEAS_TOL):
                        continue
                    owner[n], owner[n2] = k2, k
                    lhs[k], lhs[k2] = new_k, new_k2
                    swaps += 1
                    swapped = True
                    break
    return swaps


def swap_pass(instance: Instance, alloc: Allocation, rounds: int = 1, counter=None) -> Allocation:
    """Interchange improvement on a feasible allocation.

    Users are visited in index order. For user ``k`` each subchannel it held
    at the start of its turn is compared, in ascending order of other user
    and then subchannel, with every subchannel of every other user; the first
    interchange whose class-pair condition holds is applied at once.
    """
    owner = alloc.owner.copy()
    for _ in range(rounds):
        if _swap_sweep(instance, owner, counter) == 0:
            break
    return Allocation(owner, alloc.infeasible)


def release_redundant(instance: Instance, alloc: Allocation, counter=None) -> Allocation:
    """Hand CBR subchannels that are not needed for ``R_min`` to the best BE user."""
    owner = alloc.owner.copy()
    if not instance.be_users:
        return Allocation(owner, alloc.infeasible)
    rates = instance.rates
    for k, target in zip(instance.cbr_users, instance.cbr_targets):
        held = np.flatnonzero(owner == k)
        lhs = rates[held, k].sum()
        for n in held:
            _count(counter, len(instance.be_users))
            if lhs - rates[n, k] >= target - FEAS_TOL:
                lhs -= rates[n, k]
                owner[n] = instance.best_be(n)
    return Allocation(owner, alloc.infeasible)


def heur1(instance: Instance, opts: Heur1Options = Heur1Options(), counter=None) -> Allocation:
    """Feasible-first construction followed by swaps and release."""
    owner = np.full(instance.n_subchannels, UNASSIGNED, dtype=int)
    if not _cbr_feasible_fill(instance, owner, counter):
        return Allocation(owner, infeasible=True)
    _assign_leftovers_to_best_be(instance, owner, counter)
    alloc = Allocation(owner)
    if opts.enable_swap:
        alloc = swap_pass(instance, alloc, opts.swap_rounds, counter)
    return release_redundant(instance, alloc, counter)


# --- HEUR2 ----------------------------------------------------------------


def realloc_cost(owner_rate, cand_rate):
    """Sum-rate lost per bit gained when moving a subchannel to a new user."""
    return (owner_rate - cand_rate) / cand_rate


def heur2(instance: Instance, counter=None, max_iter: int | None = None) -> Allocation:
    """Unconstrained best-user allocation repaired toward CBR feasibility."""
    rates = instance.rates
    n_sub, n_users = rates.shape
    owner = np.argmax(rates, axis=1).astype(int)
    _count(counter, n_sub * n_users)
    cbr = np.asarray(instance.cbr_users, dtype=int)
    is_cbr = np.zeros(n_users, bool)
    is_cbr[cbr] = True
    b = instance.targets
    lhs = user_loads(instance, owner)
    max_iter = max_iter if max_iter is not None else 4 * n_sub * max(n_users, 1)

    for _ in range(max_iter):
        unsat = cbr[lhs[cbr] < b[cbr] - FEAS_TOL]
        if unsat.size == 0:
            break
        # donors: satisfied CBR users and BE users holding a nonzero rate
        donor = np.where(is_cbr, lhs >= b - FEAS_TOL, lhs > 0)
        pool = np.flatnonzero(donor[owner])
        if pool.size == 0:
            return Allocation(owner, infeasible=True)
        own = owner[pool]
        own_rate = rates[pool, own]
        spare = np.where(is_cbr[own], lhs[own] - own_rate >= b[own] - FEAS_TOL, True)
        cand = rates[np.ix_(pool, unsat)]
        ok = spare[:, None] & (cand > 0)
        with np.errstate(divide="ignore", invalid="ignore"):
            cost = np.where(ok, realloc_cost(own_rate[:, None], cand), np.inf)
        _count(counter, cost.size)
        if not np.isfinite(cost).any():
            return Allocation(owner, infeasible=True)
        # pool is ascending and argmin is row-major: lowest subchannel, then user
        i, j = np.unravel_index(int(np.argmin(cost)), cost.shape)
        n, k_old, k_new = pool[i], own[i], unsat[j]
        owner[n] = k_new
        lhs[k_old] -= rates[n, k_old]
        lhs[k_new] += rates[n, k_new]
    else:
        return Allocation(owner, infeasible=True)
    return release_redundant(instance, Allocation(owner), counter)


# --- RANDOM baseline ------------------------------------------------------


def random_baseline(instance: Instance, seed) -> Allocation:
    """CBR users in turn take their best free subchannels; BE gets the rest at random."""
    rates = instance.rates
    owner = np.full(instance.n_subchannels, UNASSIGNED, dtype=int)
    for k, target in zip(instance.cbr_users, instance.cbr_targets):
        lhs = 0.0
        while lhs < target - FEAS_TOL:
            free = np.flatnonzero(owner == UNASSIGNED)
            if free.size == 0:
                return Allocation(owner, infeasible=True)
            n = free[int(np.argmax(rates[free, k]))]
            owner[n] = k
            lhs += rates[n, k]
    free = np.flatnonzero(owner == UNASSIGNED)
    if instance.be_users and free.size:
        rng = np.random.default_rng(seed)
        owner[free] = np.asarray(instance.be_users)[rng.integers(len(instance.be_users), size=free.size)]
    return Allocation(owner)
