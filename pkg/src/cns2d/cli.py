"""Command-line entry point: ``cns2d {run,diagnose,converge,mms}``.

Exit codes: 0 success, 2 configuration or snapshot error, 3 blow-up.
"""
from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path
from typing import List, Optional

from .convergence import (SweepSpec, cauchy_k_experiment, eps_stability_experiment, fit_rate,
                          mms_run, uniqueness_experiment)
from .diagnostics import CSV_COLUMNS, compute_record
from .integrator import IntegratorConfig, run
from .io import (ConfigError, SnapshotError, format_value, load_config, parse_config,
                 read_snapshot, write_csv, write_snapshot)
from .spectral import Grid
from .system import SystemParams

EXIT_OK, EXIT_CONFIG, EXIT_BLOWUP = 0, 2, 3

DEFAULT_SWEEP = """
[grid]
n_points = 128
[params]
level = truncated
eps = 0.1
k_trunc = 128
[integrator]
dt = 0.005
t_end = 0.5
sample_every = 10
[initial]
preset = gaussian_bump
[sweep]
experiment = cauchy_k
values = 4, 8, 16, 32
reference = 128
"""

DEFAULT_VALUES = {"cauchy_k": [4, 8, 16, 32], "eps_stability": [0.2, 0.1, 0.05, 0.025],
                  "uniqueness": [0.01, 0.005, 0.0025]}


def _say(args, *parts):
    if not args.quiet:
        print(*parts)


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.initial.seed = args.seed
    out = Path(args.out or cfg.output.dir)
    out.mkdir(parents=True, exist_ok=True)
    state0 = cfg.initial.build(cfg.grid)
    every = cfg.output.snapshot_every
    count = [0]

    def snapshot(state):
        if every and count[0] % every == 0:
            write_snapshot(out / f"snap_{count[0]:06d}.cns2", state, cfg.params)
        count[0] += 1
        snapshot.last = state

    snapshot.last = None
    integ = cfg.integrator.with_(keep_states=False)
    traj = run(state0, cfg.params, integ, monitors=[snapshot])
    if snapshot.last is not None:
        write_snapshot(out / "final.cns2", snapshot.last, cfg.params)
    write_csv(out / cfg.output.csv, traj.records)
    for w in traj.warnings:
        logging.getLogger("cns2d").warning(w)
    if traj.failed:
        print(f"error: {traj.message}; partial output kept in {out}", file=sys.stderr)
        return EXIT_BLOWUP
    _say(args, f"ok: {traj.n_steps} steps, {len(traj.records)} samples -> {out / cfg.output.csv}")
    return EXIT_OK


def cmd_diagnose(args) -> int:
    try:
        state, meta = read_snapshot(args.snapshot)
    except OSError as exc:
        raise SnapshotError(f"{args.snapshot}: {exc.strerror}") from None
    params = SystemParams(level=meta.level, eps=meta.eps, k_trunc=meta.k_trunc)
    row = compute_record(state, params).row()
    for k in CSV_COLUMNS:
        print(f"{k}={format_value(row[k])}")
    return EXIT_OK


def _emit(args, header, pairs, fit, extra_lines=()):
    lines = [header] + [f"{format_value(p)},{format_value(e)}" for p, e in pairs]
    if fit.failed:
        lines.append(f"# partial report: {fit.message}")
    if fit.defined:
        lines.append(f"slope={fit.slope:.6g} r_squared={fit.r_squared:.6g}")
    else:
        lines.append("slope undefined (errors are zero or non-finite)")
    lines.extend(extra_lines)
    print("\n".join(lines))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{args.command}.csv").write_text("\n".join(lines) + "\n")


def cmd_converge(args) -> int:
    cfg = load_config(args.config) if args.config else parse_config(DEFAULT_SWEEP, "<default>")
    sw = cfg.sweep
    if sw is None:
        raise ConfigError(f"{cfg.source}: converge needs a [sweep] section")
    if args.seed is not None:
        cfg.initial.seed = args.seed
    values = sw.values or DEFAULT_VALUES[sw.experiment]
    variable = {"cauchy_k": "k", "eps_stability": "eps", "uniqueness": "dt"}[sw.experiment]
    base = cfg.params
    if sw.experiment == "cauchy_k" and base.level == "full":
        base = base.with_(level="truncated", eps=0.1, k_trunc=sw.reference)
    try:
        spec = SweepSpec(variable, values, base, cfg.integrator, cfg.initial.build(cfg.grid),
                         compare_s=sw.compare_s, compare_time=sw.compare_time, workers=sw.workers)
    except ValueError as exc:
        raise ConfigError(f"{cfg.source}: [sweep] {exc}") from None
    if sw.experiment == "cauchy_k":
        fit = cauchy_k_experiment(values, sw.reference, spec)
        _emit(args, "parameter,error", fit.pairs, fit)
    elif sw.experiment == "eps_stability":
        fit = eps_stability_experiment(values, spec)
        _emit(args, "parameter,error", fit.pairs, fit,
              [f"monotone={fit.extra.get('monotone')}"] if fit.extra else [])
    else:
        rep = uniqueness_experiment(spec)
        pairs = list(zip(rep.dts, rep.distances))
        fit = fit_rate(*zip(*pairs)) if len(pairs) >= 2 else fit_rate([], [])
        fit.failed, fit.message = rep.failed, rep.message
        _emit(args, "parameter,error", pairs, fit,
              ["ratios=" + ",".join(f"{r:.6g}" for r in rep.ratios)])
    return EXIT_BLOWUP if fit.failed else EXIT_OK


def cmd_mms(args) -> int:
    grid = Grid(args.n_points)
    cfg = IntegratorConfig(dt=args.dt, t_end=args.t_end, scheme=args.scheme)
    fit = mms_run(grid, cfg, kind=args.kind, levels=args.levels)
    extra = []
    if fit.defined:
        err = fit.stderr if math.isfinite(fit.stderr) else 0.0
        extra.append(f"observed_order={fit.slope:.4f}±{err:.4f}")
    grids = fit.extra.get("spatial_grids", [])
    for n, e in zip(grids[1:], fit.extra.get("spatial", [])):
        extra.append(f"spatial_error_N{grids[0]}_vs_N{n}={e:.3e}")
    _emit(args, "dt,error", fit.pairs, fit, extra)
    return EXIT_BLOWUP if fit.failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", metavar="DIR", help="output directory")
    common.add_argument("--quiet", action="store_true", help="only print results and errors")
    common.add_argument("--seed", type=int, help="seed for the random initial preset")

    p = argparse.ArgumentParser(prog="cns2d", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", parents=[common], help="integrate a configured problem")
    r.add_argument("--config", required=True, metavar="PATH")
    d = sub.add_parser("diagnose", parents=[common], help="print diagnostics of a snapshot")
    d.add_argument("snapshot", metavar="SNAPSHOT")
    c = sub.add_parser("converge", parents=[common], help="run a convergence sweep")
    c.add_argument("--config", metavar="PATH", help="sweep config (default: Cauchy-in-k)")
    m = sub.add_parser("mms", parents=[common], help="manufactured-solution order check")
    m.add_argument("--n-points", type=int, default=32)
    m.add_argument("--dt", type=float, default=0.02)
    m.add_argument("--t-end", type=float, default=0.5)
    m.add_argument("--levels", type=int, default=3)
    m.add_argument("--scheme", choices=("if_rk2", "if_euler"), default="if_rk2")
    m.add_argument("--kind", choices=("unsteady", "steady", "uniform"), default="unsteady")
    return p


COMMANDS = {"run": cmd_run, "diagnose": cmd_diagnose, "converge": cmd_converge, "mms": cmd_mms}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, SnapshotError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
