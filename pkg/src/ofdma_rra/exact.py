"""Exact optimum and LP upper bound for the subchannel allocation program.

Only the best BE user of a subchannel can matter to the objective, so the
solvers work on a collapsed problem: every subchannel goes either to one CBR
user or to "BE" (worth the best BE rate on it). The LP relaxation then reads

    min  sum_{n,j} m_n x_nj
    s.t. sum_j x_nj + y_n = 1          for every free subchannel n
         sum_n r_nj x_nj - s_j = R_j   for every CBR user j still short
         x, y, s >= 0

where ``m_n`` is the best BE rate and ``x_nj`` the share of ``n`` given to
CBR user ``j``. The bound is ``sum(R_min) + sum_n m_n - (LP minimum)``.
Branch-and-bound fixes the owner of a whole subchannel per branch.
"""

from __future__ import annotations

import heapq
import itertools
import time
from dataclasses import dataclass

import numpy as np
from numba import njit

from .core import FEAS_TOL, UNASSIGNED, Allocation, Instance, evaluate
from .heuristics import heur1
from .simplex import OPTIMAL, simplex

OPTIMAL_STATUS = "optimal"
INFEASIBLE_STATUS = "infeasible"

ORACLE_LIMIT = 10**7

_BE = -1  # collapsed "give it to the best BE user" option
_FREE = -2


class OracleSizeError(ValueError):
    pass


@dataclass
class LpSolution:
    value: float
    rho: np.ndarray | None
    status: str

    @property
    def feasible(self) -> bool:
        return self.status == OPTIMAL_STATUS


@dataclass
class BnbReport:
    allocation: Allocation | None
    value: float
    node_count: int
    proven_optimal: bool
    time_limit_hit: bool
    seconds: float = 0.0
    root_bound: float = float("nan")

    @property
    def infeasible(self) -> bool:
        return self.allocation is None and not self.time_limit_hit

    @property
    def found(self) -> bool:
        return self.allocation is not None


@njit(cache=True)
def _node_matrix(r, need, cost, strengthen):
    """Equality-form LP of a node.

    Columns: one share per usable (free subchannel, short user) cell, then a
    BE slack per subchannel, a surplus per demand row and, with
    ``strengthen``, a surplus per cardinality row. Returns ``A, b, c`` and the
    (subchannel, user) index of every share column.
    """
    nf, na = r.shape
    nx = 0
    for i in range(nf):
        for a in range(na):
            if r[i, a] > 0:
                nx += 1
    ci = np.empty(nx, np.int64)
    ca = np.empty(nx, np.int64)
    k = 0
    for i in range(nf):
        for a in range(na):
            if r[i, a] > 0:
                ci[k] = i
                ca[k] = a
                k += 1
    counts = np.zeros(na, np.int64)
    n_card = 0
    if strengthen:
        # fewest subchannels that can cover each residual demand
        for a in range(na):
            col = np.sort(r[:, a])[::-1]
            acc = 0.0
            cnt = 0
            for v in col:
                if acc >= need[a] - 1e-9:
                    break
                acc += v
                cnt += 1
            if cnt > 1:
                counts[a] = cnt
                n_card += 1
    n_rows = nf + na + n_card
    A = np.zeros((n_rows, nx + nf + na + n_card))
    b = np.empty(n_rows)
    c = np.zeros(nx + nf + na + n_card)
    pos = np.full(na, -1, np.int64)
    p = 0
    for a in range(na):
        if counts[a] > 1:
            pos[a] = p
            p += 1
    for k in range(nx):
        A[ci[k], k] = 1.0
        A[nf + ca[k], k] = r[ci[k], ca[k]]
        if pos[ca[k]] >= 0:
            A[nf + na + pos[ca[k]], k] = 1.0
        c[k] = cost[ci[k]]
    for i in range(nf):
        A[i, nx + i] = 1.0
        b[i] = 1.0
    for a in range(na):
        A[nf + a, nx + nf + a] = -1.0
        b[nf + a] = need[a]
        if pos[a] >= 0:
            A[nf + na + pos[a], nx + nf + na + pos[a]] = -1.0
            b[nf + na + pos[a]] = counts[a]
    return A, b, c, ci, ca


class _Collapsed:
    """Instance view with BE users merged into a single best-rate column."""

    def __init__(self, instance: Instance):
        self.instance = instance
        self.cbr = np.asarray(instance.cbr_users, dtype=int)
        self.r = instance.rates[:, self.cbr]  # N x K1
        self.targets = instance.cbr_targets
        self.m = instance.best_be_rates()
        self.credit = float(self.targets.sum())
        self.n_sub = instance.n_subchannels

    def residual(self, fix: np.ndarray) -> np.ndarray:
        held = np.flatnonzero(fix >= 0)
        got = np.bincount(fix[held], weights=self.r[held, fix[held]], minlength=len(self.cbr))
        return self.targets - got

    def node_lp(self, fix: np.ndarray, strengthen: bool = True, forbid: np.ndarray | None = None):
        """Solve the LP over the subchannels still free under ``fix``.

        With ``strengthen`` the rates are capped at each user's residual
        demand and every short user must take at least as many subchannels as
        its best free ones need to cover that residual. Both hold for every
        0/1 completion of ``fix``; ``strengthen=False`` gives the plain
        relaxation. ``forbid`` is an ``(N, K1)`` mask of cells excluded in
        this subtree.

        Returns ``(bound, shares, reduced)``: ``shares`` is a ``(free, K1)``
        array of CBR shares and ``reduced`` the LP reduced cost of each cell
        (``inf`` where the cell is not in the LP). All three are ``None`` if
        the node is infeasible.
        """
        free = np.flatnonzero(fix == _FREE)
        fixed_be = self.m[fix == _BE].sum()
        res = self.residual(fix)
        active = np.flatnonzero(res > FEAS_TOL)
        shares = np.zeros((free.size, len(self.cbr)))
        reduced = np.full(shares.shape, np.inf)
        base = self.credit + fixed_be + self.m[free].sum()
        if active.size == 0:
            return base, shares, reduced
        if free.size == 0:
            return None, None, None
        r = self.r[np.ix_(free, active)]
        if forbid is not None:
            r = np.where(forbid[np.ix_(free, active)], 0.0, r)
        need = res[active]
        if strengthen:
            r = np.minimum(r, need[None, :])
        # even all free subchannels are not enough
        if np.any(r.sum(axis=0) < need - FEAS_TOL):
            return None, None, None
        A, b, c, ci, ca = _node_matrix(np.ascontiguousarray(r), need, self.m[free], strengthen)
        sol = simplex(c, A, b)
        if sol.status != OPTIMAL:
            return None, None, None
        nx = ci.size
        shares[ci, active[ca]] = sol.x[:nx]
        reduced[ci, active[ca]] = sol.reduced[:nx]
        return base - sol.fun, shares, reduced

    def round_shares(self, fix: np.ndarray, shares: np.ndarray):
        """Integer point near an LP solution, or ``None``.

        Majority shares are rounded up, short users are topped up with the
        subchannel that costs the least BE rate per useful bit, and surplus
        CBR subchannels are handed back to BE (costliest first).
        """
        full = fix.copy()
        free = np.flatnonzero(fix == _FREE)
        if free.size:
            j = shares.argmax(axis=1)
            full[free] = np.where(shares[np.arange(free.size), j] >= 0.5, j, _BE)
        lhs = np.array([self.r[full == j, j].sum() for j in range(len(self.cbr))])
        for j in np.argsort(lhs - self.targets, kind="stable"):
            while lhs[j] < self.targets[j] - FEAS_TOL:
                open_ = np.flatnonzero(full == _BE)
                gain = np.minimum(self.r[open_, j], self.targets[j] - lhs[j])
                ok = gain > 0
                if not ok.any():
                    return None
                cost = np.where(ok, self.m[open_] / np.where(ok, gain, 1.0), np.inf)
                n = open_[int(np.argmin(cost))]
                full[n] = j
                lhs[j] += self.r[n, j]
        for n in np.argsort(-self.m, kind="stable"):
            j = full[n]
            if j >= 0 and lhs[j] - self.r[n, j] >= self.targets[j] - FEAS_TOL:
                full[n] = _BE
                lhs[j] -= self.r[n, j]
        return full

    def owner_from(self, fix: np.ndarray) -> np.ndarray:
        owner = np.full(self.n_sub, UNASSIGNED, dtype=int)
        for n, f in enumerate(fix):
            if f >= 0:
                owner[n] = self.cbr[f]
            else:
                owner[n] = self.instance.best_be(n)
        return owner


def solve_lp(instance: Instance) -> LpSolution:
    """LP relaxation (shared subchannels allowed) of the allocation program."""
    col = _Collapsed(instance)
    fix = np.full(col.n_sub, _FREE)
    bound, shares, _ = col.node_lp(fix, strengthen=False)
    if bound is None:
        return LpSolution(float("nan"), None, INFEASIBLE_STATUS)
    rho = np.zeros(instance.rates.shape)
    rho[:, col.cbr] = shares
    rest = 1.0 - shares.sum(axis=1)
    if instance.be_users:
        best = [instance.best_be(n) for n in range(col.n_sub)]
        rho[np.arange(col.n_sub), best] += rest
    return LpSolution(float(bound), rho, OPTIMAL_STATUS)


def _most_fractional(shares: np.ndarray, tol: float = 1e-9):
    """Subchannel whose largest share is furthest from integral, or None."""
    if shares.shape[0] == 0:
        return None
    be_share = 1.0 - shares.sum(axis=1)
    full = np.column_stack([shares, be_share])
    frac = np.minimum(full, 1.0 - full).max(axis=1)
    i = int(np.argmax(frac))
    return None if frac[i] <= tol else i


def solve_ilp(instance: Instance, time_limit: float | None = None, gap_tol: float = 0.0,
              incumbent: Allocation | None = None) -> BnbReport:
    """Best-bound branch-and-bound on the binary program.

    Parameters
    ----------
    instance : Instance
    time_limit : float, optional
        Wall-clock budget in seconds; ``None`` runs to completion.
    gap_tol : float
        Relative optimality gap at which a node is pruned; 0 proves optimality.
    incumbent : Allocation, optional
        Warm start; defaults to the ``heur1`` allocation when it is feasible.

    Returns
    -------
    BnbReport
        ``proven_optimal`` is set only when the tree was exhausted with
        ``gap_tol == 0``. ``allocation`` is ``None`` when no feasible integer
        point was found.
    """
    if gap_tol < 0:
        raise ValueError("gap_tol must be non-negative")
    start = time.perf_counter()
    col = _Collapsed(instance)

    best_alloc, best_val = None, -np.inf
    warm = incumbent if incumbent is not None else heur1(instance)
    if not warm.infeasible:
        ev = evaluate(instance, warm)
        if ev.feasible:
            best_alloc, best_val = warm.copy(), ev.objective

    def offer(cand):
        nonlocal best_alloc, best_val
        ev = evaluate(instance, cand)
        if ev.feasible and ev.objective > best_val:
            best_alloc, best_val = cand, ev.objective

    def prunable(bound):
        if best_alloc is None:
            return False
        return bool(prunable_mask(bound))

    def prunable_mask(bounds):
        limit = best_val * (1.0 + gap_tol) + 1e-9 * max(1.0, abs(best_val))
        return bounds <= limit

    counter = itertools.count()
    heap = []
    nodes = 0
    root_fix = np.full(col.n_sub, _FREE)
    root_forbid = np.zeros(col.r.shape, bool)
    root_bound, root_shares, root_red = col.node_lp(root_fix)
    nodes += 1
    if root_bound is not None:
        heapq.heappush(heap, (-root_bound, 0, next(counter), root_fix, root_shares, root_red, root_forbid))

    timed_out = False
    dive = None  # best child of the last branching, explored next (plunging)
    while heap or dive is not None:
        if time_limit is not None and time.perf_counter() - start > time_limit:
            timed_out = True
            break
        if dive is not None:
            item, dive = dive, None
        else:
            item = heapq.heappop(heap)
        neg_bound, neg_depth, _, fix, shares, red, forbid = item
        bound = -neg_bound
        if prunable(bound):
            continue
        free = np.flatnonzero(fix == _FREE)
        rounded = col.round_shares(fix, shares)
        if rounded is not None:
            offer(Allocation(col.owner_from(rounded)))
            if prunable(bound):
                continue
        i = _most_fractional(shares)
        if i is None:
            # integral LP vertex: read off the allocation
            full = fix.copy()
            assigned = shares.argmax(axis=1)
            taken = shares.max(axis=1) > 0.5
            full[free] = np.where(taken, assigned, _BE)
            offer(Allocation(col.owner_from(full)))
            continue
        if best_alloc is not None:
            # reduced-cost fixing: a cell whose reduced cost alone drops the
            # bound to the incumbent cannot appear in a better completion
            drop = np.isfinite(red) & prunable_mask(bound - red)
            if drop.any():
                forbid = forbid.copy()
                forbid[free] |= drop
        n = free[i]
        res = col.residual(fix)
        options = [_BE] + [j for j in range(len(col.cbr))
                           if col.r[n, j] > 0 and res[j] > FEAS_TOL and not forbid[n, j]]
        children = []
        for opt in options:
            child = fix.copy()
            child[n] = opt
            cb, cs, cr = col.node_lp(child, forbid=forbid)
            nodes += 1
            if cb is None or prunable(cb):
                continue
            children.append((-cb, neg_depth - 1, next(counter), child, cs, cr, forbid))
        if children:
            children.sort(key=lambda c: (c[0], c[2]))
            dive = children[0]
            for c in children[1:]:
                heapq.heappush(heap, c)

    exhausted = not heap and dive is None and not timed_out
    return BnbReport(
        allocation=best_alloc,
        value=float(best_val) if best_alloc is not None else float("nan"),
        node_count=nodes,
        proven_optimal=exhausted and gap_tol == 0 and best_alloc is not None,
        time_limit_hit=timed_out,
        seconds=time.perf_counter() - start,
        root_bound=float(root_bound) if root_bound is not None else float("nan"),
    )


def exhaustive_oracle(instance: Instance, chunk: int = 1 << 16):
    """Enumerate every owner vector; returns ``(allocation, value)``.

    Infeasible instances yield an allocation flagged ``infeasible`` and a NaN
    value. Refuses instances with more than ``10**7`` candidate vectors.
    """
    n_sub, n_users = instance.rates.shape
    total = n_users ** n_sub
    if total > ORACLE_LIMIT:
        raise OracleSizeError(f"K^N = {total} exceeds the enumeration limit {ORACLE_LIMIT}")
    rates = instance.rates
    cbr = list(instance.cbr_users)
    targets = instance.cbr_targets
    is_be = np.zeros(n_users, bool)
    is_be[list(instance.be_users)] = True
    powers = n_users ** np.arange(n_sub - 1, -1, -1)
    cols = np.arange(n_sub)

    best_val, best_code = -np.inf, -1
    for lo in range(0, total, chunk):
        codes = np.arange(lo, min(lo + chunk, total))
        owners = (codes[:, None] // powers[None, :]) % n_users
        per_sub = rates[cols[None, :], owners]
        feasible = np.ones(len(codes), bool)
        for k, t in zip(cbr, targets):
            lhs = np.where(owners == k, per_sub, 0.0).sum(axis=1)
            feasible &= lhs >= t - FEAS_TOL
        if not feasible.any():
            continue
        value = np.where(is_be[owners], per_sub, 0.0).sum(axis=1)
        value[~feasible] = -np.inf
        i = int(np.argmax(value))
        if value[i] > best_val:
            best_val, best_code = value[i], codes[i]
    if best_code < 0:
        return Allocation(np.full(n_sub, UNASSIGNED), infeasible=True), float("nan")
    owner = (best_code // powers) % n_users
    alloc = Allocation(owner)
    return alloc, evaluate(instance, alloc).objective
