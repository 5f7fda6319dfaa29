"""Monte-Carlo evaluation: drops of frames, feasible-power calibration,
convergence-controlled repetition and the CSV reports.

A drop fixes user positions and shadowing; its frames share large-scale
conditions while the fading evolves. The base-station power of a drop is
``power_ratio`` times the smallest power at which the CBR users alone can be
served on the drop's first frame.

Seeds: drop ``d`` of a scenario with seed ``s`` draws its placement and fading
from ``SeedSequence([s, d])``; the RANDOM baseline on frame ``t`` of that
drop uses ``SeedSequence([s, d, t, 2])``. Drops are therefore independent of
execution order.
"""

from __future__ import annotations

import dataclasses
import itertools
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .channel import ChannelConfig, generate_drop_gains, place_users
from .core import Instance, evaluate
from .exact import solve_ilp, solve_lp
from .heuristics import Heur1Options, heur1, heur2, random_baseline
from .rate_model import RadioParams, build_rate_matrix

log = logging.getLogger(__name__)

ALGORITHMS = ("heur1", "heur1-noswap", "heur2", "random", "ip", "lp")
HEURISTICS = ("heur1", "heur1-noswap", "heur2", "random")

CALIBRATION_RTOL = 1e-3
DEFAULT_BRACKET = (1e-3, 1e6)  # watts
BRACKET_CAP = 1e12  # widest upper end tried before declaring an outage
BOUND_RTOL = 1e-9

_RANDOM_STREAM = 2


class BoundChainViolation(AssertionError):
    """LP >= IP >= heuristic failed on some frame: a solver bug."""


class CalibrationError(RuntimeError):
    pass


@dataclass(frozen=True)
class ScenarioConfig:
    """One grid point of the evaluation.

    ``R_min`` is either one value shared by all CBR users or one per user.
    ``channel.frames_per_drop`` is overridden by ``frames_per_drop``.
    ``calibration_time_limit`` bounds each feasibility probe of the power
    calibration; a probe that runs out is read as infeasible, which can only
    raise the calibrated power.
    """

    N: int = 32
    K1: int = 4
    K2: int = 3
    R_min: float | tuple = 12.0
    power_ratio: float = 2.0
    frames_per_drop: int = 4
    min_drops: int = 25
    max_drops: int = 1000
    sigma_norm: float = 0.02
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    radio: RadioParams = field(default_factory=RadioParams)
    seed: int = 0
    algorithms: tuple = ALGORITHMS
    ip_time_limit: float = 60.0
    calibration_time_limit: float = 0.5

    def __post_init__(self):
        if self.N < 1 or self.K1 < 0 or self.K2 < 0 or self.K1 + self.K2 < 1:
            raise ValueError("need N >= 1 and at least one user")
        if self.frames_per_drop < 1:
            raise ValueError("frames_per_drop must be >= 1")
        if not 1 <= self.min_drops <= self.max_drops:
            raise ValueError("need 1 <= min_drops <= max_drops")
        if not self.sigma_norm > 0:
            raise ValueError("sigma_norm must be positive")
        if not self.power_ratio >= 1:
            raise ValueError("power_ratio must be >= 1")
        for name in ("ip_time_limit", "calibration_time_limit"):
            v = getattr(self, name)
            if v is not None and v <= 0:
                raise ValueError(f"{name} must be positive")
        algs = tuple(self.algorithms)
        unknown = set(algs) - set(ALGORITHMS)
        if unknown:
            raise ValueError(f"unknown algorithms {sorted(unknown)}; choose from {ALGORITHMS}")
        if not algs:
            raise ValueError("select at least one algorithm")
        # canonical order keeps reports independent of how the list was written
        object.__setattr__(self, "algorithms", tuple(a for a in ALGORITHMS if a in algs))
        targets = np.atleast_1d(np.asarray(self.R_min, dtype=float))
        if targets.size == 1:
            targets = np.full(self.K1, float(targets[0]))
        if targets.size != self.K1:
            raise ValueError(f"R_min needs 1 or K1={self.K1} values, got {targets.size}")
        if np.any(targets <= 0):
            raise ValueError("R_min must be positive")
        if self.channel.frames_per_drop != self.frames_per_drop:
            object.__setattr__(
                self, "channel", dataclasses.replace(self.channel, frames_per_drop=self.frames_per_drop)
            )

    @property
    def targets(self) -> np.ndarray:
        b = np.atleast_1d(np.asarray(self.R_min, dtype=float))
        return np.full(self.K1, b[0]) if b.size == 1 else b

    @property
    def n_users(self) -> int:
        return self.K1 + self.K2


@dataclass
class DropResult:
    """Outcome of one drop.

    ``frame_values[alg]`` holds the objective per frame, NaN on outage (and
    for ``ip`` also on a time-limited frame, see ``ip_timeouts``).
    """

    drop_index: int
    p_feas: float
    p_bs: float
    frame_values: dict
    outages: dict
    ip_timeouts: int = 0
    violations: int = 0
    runtimes: dict = field(default_factory=dict)
    calibration_failed: bool = False

    @property
    def means(self) -> dict:
        out = {}
        for alg, v in self.frame_values.items():
            ok = v[np.isfinite(v)]
            out[alg] = float(ok.mean()) if ok.size else float("nan")
        return out


@dataclass
class ScenarioStats:
    config: ScenarioConfig
    drops: list
    converged: bool
    means: dict  # mean of drop means per algorithm
    variances: dict  # sample variance of drop means
    statistic: dict  # standard error / |mean| per algorithm
    ratios: dict  # pairwise ratios, e.g. "heur1/ip"
    outages: dict
    ip_timeouts: int

    @property
    def drops_executed(self) -> int:
        return len(self.drops)


# --- calibration ------------------------------------------------------------


def _cbr_feasible(gains_cbr, power, targets, radio, time_limit) -> bool:
    rates = build_rate_matrix(gains_cbr, power, radio)
    inst = Instance(rates, tuple(range(len(targets))), targets, ())
    # a quick upper screen before the solver
    if np.any(rates.sum(axis=0) < targets):
        return False
    return solve_ilp(inst, time_limit=time_limit).found


def calibrate_feasible_power(gains_cbr, targets, radio: RadioParams = RadioParams(),
                             bracket=DEFAULT_BRACKET, rtol: float = CALIBRATION_RTOL,
                             time_limit: float | None = None, cap: float = BRACKET_CAP) -> float:
    """Smallest power (W) at which the CBR users alone are feasible, to ``rtol``.

    Geometric bisection on a single ``(N, K1)`` gain matrix. The upper end is
    widened tenfold until feasible or past ``cap`` (then ``CalibrationError``).
    A probe whose solver hits ``time_limit`` without a point counts as infeasible.
    """
    gains_cbr = np.asarray(gains_cbr, dtype=float)
    targets = np.asarray(targets, dtype=float)
    if targets.size == 0:
        return 0.0
    lo, hi = (float(v) for v in bracket)
    if not 0 < lo < hi:
        raise ValueError("bracket must satisfy 0 < lo < hi")

    def feasible(p):
        return _cbr_feasible(gains_cbr, p, targets, radio, time_limit)

    while not feasible(hi):
        lo, hi = hi, hi * 10.0
        if hi > cap:
            raise CalibrationError(f"CBR users infeasible up to {cap:g} W")
    if feasible(lo):
        # the whole bracket is feasible; walk down
        while feasible(lo):
            hi, lo = lo, lo / 10.0
            if lo < 1e-30:
                return hi
    while hi / lo > 1.0 + rtol:
        mid = math.sqrt(lo * hi)
        if feasible(mid):
            hi = mid
        else:
            lo = mid
        assert lo < hi
    return hi


# --- drops and scenarios ----------------------------------------------------


def drop_seed(scenario_seed: int, drop_index: int) -> int:
    """Integer seed for a drop, derived from ``SeedSequence([seed, drop])``."""
    return int(np.random.SeedSequence([int(scenario_seed), int(drop_index)]).generate_state(1)[0])


def frame_instances(cfg: ScenarioConfig, drop_index: int):
    """``(p_feas, p_bs, instances)`` for one drop, or raises ``CalibrationError``."""
    seed = drop_seed(cfg.seed, drop_index)
    placement = place_users(cfg.n_users, cfg.channel, seed)
    gains = generate_drop_gains(placement, cfg.N, cfg.channel, seed)
    targets = cfg.targets
    p_feas = calibrate_feasible_power(gains[0][:, : cfg.K1], targets, cfg.radio,
                                      time_limit=cfg.calibration_time_limit)
    p_bs = cfg.power_ratio * p_feas if cfg.K1 else cfg.power_ratio
    insts = [Instance.from_rates(build_rate_matrix(g, p_bs, cfg.radio), targets) for g in gains]
    return p_feas, p_bs, insts


def _heuristic_value(inst, alloc):
    if alloc.infeasible:
        return float("nan")
    ev = evaluate(inst, alloc)
    return ev.objective if ev.feasible else float("nan")


def _leq(a, b) -> bool:
    """a <= b up to the bound-chain tolerance."""
    return a <= b + BOUND_RTOL * max(1.0, abs(b))


def run_drop(cfg: ScenarioConfig, drop_index: int) -> DropResult:
    algs = cfg.algorithms
    frames = cfg.frames_per_drop
    values = {a: np.full(frames, np.nan) for a in algs}
    outages = {a: 0 for a in algs}
    runtimes = {a: 0.0 for a in algs}
    try:
        p_feas, p_bs, insts = frame_instances(cfg, drop_index)
    except CalibrationError as exc:
        log.warning("drop %d: %s; counted as outage", drop_index, exc)
        return DropResult(drop_index, float("nan"), float("nan"), values,
                          {a: frames for a in algs}, runtimes=runtimes, calibration_failed=True)

    timeouts = 0
    violations = 0
    for t, inst in enumerate(insts):
        h1 = None
        ip_timed_out = False
        for alg in algs:
            t0 = time.perf_counter()
            if alg == "heur1":
                h1 = heur1(inst)
                v = _heuristic_value(inst, h1)
            elif alg == "heur1-noswap":
                v = _heuristic_value(inst, heur1(inst, Heur1Options(enable_swap=False)))
            elif alg == "heur2":
                v = _heuristic_value(inst, heur2(inst))
            elif alg == "random":
                rs = np.random.SeedSequence([int(cfg.seed), drop_index, t, _RANDOM_STREAM])
                v = _heuristic_value(inst, random_baseline(inst, rs))
            elif alg == "ip":
                rep = solve_ilp(inst, time_limit=cfg.ip_time_limit, incumbent=h1)
                ip_timed_out = rep.time_limit_hit
                if ip_timed_out:
                    timeouts += 1
                    v = float("nan")
                else:
                    v = rep.value if rep.found else float("nan")
            else:
                lp = solve_lp(inst)
                v = lp.value if lp.feasible else float("nan")
            runtimes[alg] += time.perf_counter() - t0
            values[alg][t] = v
            if not np.isfinite(v) and not (alg == "ip" and ip_timed_out):
                outages[alg] += 1

        # bound chain on this frame: lp >= ip >= every heuristic
        row = {a: values[a][t] for a in algs}
        for lower, upper in itertools.product(algs, ("ip", "lp")):
            if lower == upper or lower == "lp" or upper not in row:
                continue
            if np.isfinite(row[lower]) and np.isfinite(row[upper]) and not _leq(row[lower], row[upper]):
                violations += 1
                log.error("drop %d frame %d: %s=%r exceeds %s=%r",
                          drop_index, t, lower, row[lower], upper, row[upper])
    return DropResult(drop_index, p_feas, p_bs, values, outages, timeouts, violations, runtimes)


def convergence_statistic(drop_means) -> float:
    """Standard error of the drop means divided by their absolute mean."""
    x = np.asarray([v for v in drop_means if np.isfinite(v)], dtype=float)
    if x.size < 2:
        return float("inf")
    se = x.std(ddof=1) / math.sqrt(x.size)
    mean = abs(x.mean())
    if se == 0.0:
        return 0.0
    return se / mean if mean > 0 else float("inf")


def pairwise_ratio(drops, num: str, den: str) -> float:
    """sum(num)/sum(den) over frames where both schemes have a value."""
    a, b = [], []
    for d in drops:
        if num not in d.frame_values or den not in d.frame_values:
            return float("nan")
        x, y = d.frame_values[num], d.frame_values[den]
        ok = np.isfinite(x) & np.isfinite(y)
        a.append(x[ok])
        b.append(y[ok])
    if not a:
        return float("nan")
    a, b = np.concatenate(a), np.concatenate(b)
    if a.size == 0 or b.sum() == 0:
        return float("nan")
    return float(a.sum() / b.sum())


RATIO_PAIRS = (("heur1", "ip"), ("heur2", "ip"), ("ip", "lp"), ("heur1", "random"),
               ("heur2", "random"), ("heur1", "heur1-noswap"))


def summarize(cfg: ScenarioConfig, drops: list, converged: bool) -> ScenarioStats:
    drops = sorted(drops, key=lambda d: d.drop_index)
    means, variances, stat, outages = {}, {}, {}, {}
    for alg in cfg.algorithms:
        dm = np.array([d.means[alg] for d in drops])
        ok = dm[np.isfinite(dm)]
        means[alg] = float(ok.mean()) if ok.size else float("nan")
        variances[alg] = float(ok.var(ddof=1)) if ok.size > 1 else float("nan")
        stat[alg] = convergence_statistic(dm)
        outages[alg] = sum(d.outages[alg] for d in drops)
    ratios = {f"{a}/{b}": pairwise_ratio(drops, a, b) for a, b in RATIO_PAIRS
              if a in cfg.algorithms and b in cfg.algorithms}
    return ScenarioStats(cfg, drops, converged, means, variances, stat, ratios, outages,
                         sum(d.ip_timeouts for d in drops))


def run_scenario(cfg: ScenarioConfig, progress=None) -> ScenarioStats:
    """Run drops until every algorithm's statistic is below ``sigma_norm``
    (after at least ``min_drops``) or ``max_drops`` is reached."""
    drops = []
    converged = False
    for d in range(cfg.max_drops):
        res = run_drop(cfg, d)
        if res.violations:
            raise BoundChainViolation(f"drop {d}: {res.violations} bound-chain violations")
        drops.append(res)
        if progress is not None:
            progress(cfg, res)
        if len(drops) >= cfg.min_drops:
            stats = [convergence_statistic([x.means[a] for x in drops]) for a in cfg.algorithms]
            if all(s <= cfg.sigma_norm for s in stats):
                converged = True
                break
    return summarize(cfg, drops, converged)


# --- config files -----------------------------------------------------------

_NESTED = {"channel": ChannelConfig, "radio": RadioParams}
GRID_KEYS = ("K1", "power_ratio")


def _convert(text: str, kind):
    kind = str(kind)
    if "tuple" in kind or kind == "algorithms":
        return tuple(v.strip() for v in text.split(",") if v.strip())
    if kind.startswith("int"):
        return int(text)
    if kind.startswith("float | tuple"):
        vals = [float(v) for v in text.split(",")]
        return vals[0] if len(vals) == 1 else tuple(vals)
    if kind.startswith("float"):
        if text.lower() == "none":
            return None
        return float(text)
    raise TypeError(f"unsupported field type {kind}")


def parse_config(text: str) -> dict:
    """Parse ``key = value`` lines into raw keyword arguments.

    ``#`` starts a comment. Nested fields use ``channel.<name>`` and
    ``radio.<name>``. ``K1`` and ``power_ratio`` accept comma-separated lists,
    which ``scenario_grid`` expands. Unknown or repeated keys raise ``ValueError``.
    """
    fields = {f.name: f for f in dataclasses.fields(ScenarioConfig)}
    out, nested = {}, {k: {} for k in _NESTED}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        try:
            if "." in key:
                group, name = key.split(".", 1)
                if group not in _NESTED:
                    raise ValueError(f"unknown key {key!r}")
                sub = {f.name: f for f in dataclasses.fields(_NESTED[group])}
                if name not in sub:
                    raise ValueError(f"unknown key {key!r}")
                if name in nested[group]:
                    raise ValueError(f"repeated key {key!r}")
                nested[group][name] = _convert(value, sub[name].type)
                continue
            if key not in fields or key in _NESTED:
                raise ValueError(f"unknown key {key!r}")
            if key in out:
                raise ValueError(f"repeated key {key!r}")
            if key in GRID_KEYS:
                conv = int if key == "K1" else float
                vals = tuple(conv(v) for v in value.split(","))
                out[key] = vals[0] if len(vals) == 1 else vals
            elif key == "algorithms":
                out[key] = _convert(value, "tuple")
            else:
                out[key] = _convert(value, fields[key].type)
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
    for group, cls in _NESTED.items():
        if nested[group]:
            out[group] = cls(**nested[group])
    return out


PAPER_SCALE = dict(N=100, K1=(6, 8, 10, 12), K2=5, R_min=36.0,
                   power_ratio=(2.0, 2.5, 3.0, 3.5, 4.0), frames_per_drop=100,
                   min_drops=25, max_drops=1000, sigma_norm=0.02, ip_time_limit=60.0)


def scenario_grid(kwargs: dict, paper_scale: bool = False) -> list:
    """Expand list-valued ``K1``/``power_ratio`` into one config per pair.

    With ``paper_scale`` the published grid and parameters are the defaults;
    keys given explicitly still win.
    """
    base = dict(PAPER_SCALE) if paper_scale else {}
    base.update(kwargs)
    k1s = base.pop("K1", ScenarioConfig.K1)
    ratios = base.pop("power_ratio", ScenarioConfig.power_ratio)
    k1s = k1s if isinstance(k1s, tuple) else (k1s,)
    ratios = ratios if isinstance(ratios, tuple) else (ratios,)
    return [ScenarioConfig(K1=k1, power_ratio=p, **base) for k1, p in itertools.product(k1s, ratios)]


def load_config(path, paper_scale: bool = False) -> list:
    return scenario_grid(parse_config(Path(path).read_text()), paper_scale)


# --- reports ----------------------------------------------------------------

REPORT_ALGS = ALGORITHMS
_COL = [a.replace("-", "_") for a in REPORT_ALGS]
SCENARIO_HEADER = (["K1", "power_ratio"] + [f"mean_{a}" for a in _COL]
                   + ["heur1_over_ip", "heur2_over_ip", "ip_over_lp", "drops", "converged",
                      "ip_timeouts"] + [f"outages_{a}" for a in _COL])
LOAD_HEADER = ["power_ratio", "K1"] + [f"sumrate_{a}" for a in _COL]
POWER_HEADER = ["K1", "power_ratio"] + [f"sumrate_{a}" for a in _COL]
SWAP_HEADER = ["K1", "power_ratio", "sumrate_heur1", "sumrate_heur1_noswap", "gain_percent"]


def _g(x) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return "nan"
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.9g}"


def _write(path: Path, header, rows) -> None:
    lines = [",".join(header)] + [",".join(_g(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")


def swap_gain(stats: ScenarioStats) -> float:
    """Percent gain of heur1 over heur1-noswap, paired frames."""
    r = stats.ratios.get("heur1/heur1-noswap", float("nan"))
    return (r - 1.0) * 100.0


def emit_reports(stats_list, out_dir) -> list:
    """Write the four CSV reports; returns their paths.

    scenario_stats.csv   one row per scenario: means, ratios, drops, flags
    sumrate_vs_load.csv  mean sum-rate per algorithm, sorted by power_ratio then K1
    sumrate_vs_power.csv the same, sorted by K1 then power_ratio
    swap_effect.csv      heur1 vs heur1-noswap and the gain in percent
    Algorithms not run in a scenario appear as ``nan``.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stats_list = list(stats_list)
    key = lambda s: (s.config.K1, s.config.power_ratio)  # noqa: E731
    rows = []
    for s in sorted(stats_list, key=key):
        m = [s.means.get(a, float("nan")) for a in REPORT_ALGS]
        o = [s.outages.get(a, float("nan")) for a in REPORT_ALGS]
        rows.append([s.config.K1, s.config.power_ratio] + m
                    + [s.ratios.get("heur1/ip", float("nan")), s.ratios.get("heur2/ip", float("nan")),
                       s.ratios.get("ip/lp", float("nan")), s.drops_executed, s.converged, s.ip_timeouts] + o)
    paths = [out / "scenario_stats.csv", out / "sumrate_vs_load.csv",
             out / "sumrate_vs_power.csv", out / "swap_effect.csv"]
    _write(paths[0], SCENARIO_HEADER, rows)
    by_load = sorted(stats_list, key=lambda s: (s.config.power_ratio, s.config.K1))
    _write(paths[1], LOAD_HEADER, [[s.config.power_ratio, s.config.K1]
                                   + [s.means.get(a, float("nan")) for a in REPORT_ALGS] for s in by_load])
    _write(paths[2], POWER_HEADER, [[s.config.K1, s.config.power_ratio]
                                    + [s.means.get(a, float("nan")) for a in REPORT_ALGS]
                                    for s in sorted(stats_list, key=key)])
    _write(paths[3], SWAP_HEADER, [[s.config.K1, s.config.power_ratio, s.means.get("heur1", float("nan")),
                                    s.means.get("heur1-noswap", float("nan")), swap_gain(s)]
                                   for s in sorted(stats_list, key=key)])
    return paths
