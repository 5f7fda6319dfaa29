"""Command-line interface.

    ofdma-rra gen      --config FILE --out INSTANCE.csv [--drop D] [--frame T]
    ofdma-rra solve    --instance FILE --alg NAME [--seed S] [--time-limit T] [--out FILE]
    ofdma-rra simulate --config FILE --out-dir DIR [--paper-scale]

``solve`` writes the allocation CSV (to ``--out`` or stdout) and then prints
one report line ``value,nodes,proven,seconds``. For ``lp`` the CSV holds the
fractional shares instead, one row per subchannel. Exit status is 0 on
success, 3 when the instance is infeasible for the chosen algorithm and 2 on
usage errors.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import harness
from .core import evaluate, format_allocation, read_instance, write_instance
from .exact import exhaustive_oracle, solve_ilp, solve_lp
from .heuristics import Heur1Options, heur1, heur2, random_baseline

SOLVE_ALGS = ("heur1", "heur1-noswap", "heur2", "random", "ip", "lp", "oracle")
EXIT_INFEASIBLE = 3


def _single_config(path, paper_scale=False) -> harness.ScenarioConfig:
    grid = harness.load_config(path, paper_scale)
    if len(grid) != 1:
        raise ValueError(f"{path} describes {len(grid)} scenarios; gen needs exactly one")
    return grid[0]


def cmd_gen(args) -> int:
    cfg = _single_config(args.config)
    if not 0 <= args.frame < cfg.frames_per_drop:
        raise ValueError(f"--frame must lie in [0, {cfg.frames_per_drop})")
    _, p_bs, insts = harness.frame_instances(cfg, args.drop)
    write_instance(insts[args.frame], args.out)
    print(f"wrote {args.out} (N={cfg.N}, K={cfg.n_users}, P_bs={p_bs:.9g} W)")
    return 0


def _report(value, nodes, proven, seconds) -> str:
    v = "nan" if value is None or not np.isfinite(value) else f"{value:.9g}"
    return f"{v},{nodes},{int(bool(proven))},{seconds:.9g}"


def cmd_solve(args) -> int:
    inst = read_instance(args.instance)
    t0 = time.perf_counter()
    nodes, proven = 0, False
    body = None
    if args.alg in ("heur1", "heur1-noswap", "heur2", "random"):
        if args.alg == "heur1":
            alloc = heur1(inst)
        elif args.alg == "heur1-noswap":
            alloc = heur1(inst, Heur1Options(enable_swap=False))
        elif args.alg == "heur2":
            alloc = heur2(inst)
        else:
            alloc = random_baseline(inst, args.seed)
        ev = evaluate(inst, alloc)
        value = ev.objective if ev.feasible and not alloc.infeasible else None
        if value is not None:
            body = format_allocation(alloc)
    elif args.alg == "ip":
        rep = solve_ilp(inst, time_limit=args.time_limit)
        value, nodes, proven = (rep.value if rep.found else None), rep.node_count, rep.proven_optimal
        if rep.found:
            body = format_allocation(rep.allocation)
    elif args.alg == "lp":
        lp = solve_lp(inst)
        nodes = 1
        value = lp.value if lp.feasible else None
        if lp.feasible:
            body = "".join(",".join(f"{v:.9g}" for v in row) + "\n" for row in lp.rho)
    else:
        try:
            alloc, value = exhaustive_oracle(inst)
        except ValueError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        proven = not alloc.infeasible
        value = None if alloc.infeasible else value
        if not alloc.infeasible:
            body = format_allocation(alloc)
    seconds = time.perf_counter() - t0
    if body is not None:
        if args.out:
            Path(args.out).write_text(body)
        else:
            sys.stdout.write(body)
    print(_report(value, nodes, proven, seconds))
    return 0 if value is not None else EXIT_INFEASIBLE


def cmd_simulate(args) -> int:
    grid = harness.load_config(args.config, args.paper_scale)

    def progress(cfg, res):
        logging.getLogger(__name__).info("K1=%d ratio=%g drop %d done", cfg.K1, cfg.power_ratio, res.drop_index)

    stats = [harness.run_scenario(cfg, progress) for cfg in grid]
    paths = harness.emit_reports(stats, args.out_dir)
    for s in stats:
        r = s.ratios
        print(f"K1={s.config.K1} ratio={s.config.power_ratio:g} drops={s.drops_executed} "
              f"converged={int(s.converged)} heur1/ip={r.get('heur1/ip', float('nan')):.4f} "
              f"heur2/ip={r.get('heur2/ip', float('nan')):.4f}")
    for p in paths:
        print(f"wrote {p}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ofdma-rra", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="write one frame of a scenario as an instance CSV")
    g.add_argument("--config", required=True)
    g.add_argument("--out", required=True)
    g.add_argument("--drop", type=int, default=0)
    g.add_argument("--frame", type=int, default=0)
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("solve", help="run one algorithm on an instance CSV")
    s.add_argument("--instance", required=True)
    s.add_argument("--alg", required=True, choices=SOLVE_ALGS)
    s.add_argument("--seed", type=int, default=0, help="seed for the random baseline")
    s.add_argument("--time-limit", type=float, default=None, help="seconds, for --alg ip")
    s.add_argument("--out", default=None, help="allocation CSV path (default: stdout)")
    s.set_defaults(func=cmd_solve)

    m = sub.add_parser("simulate", help="run the scenario grid of a config file")
    m.add_argument("--config", required=True)
    m.add_argument("--out-dir", required=True)
    m.add_argument("--paper-scale", action="store_true",
                   help="start from the published grid and parameters (N=100, K1=6..12, ...)")
    m.set_defaults(func=cmd_simulate)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
