"""Command-line entry point: ``python -m blowup_lab <subcommand> [flags]``.

Exit codes: 0 when every check passes, 1 when a check or invariant fails
(the failing check is named on stderr), 2 on usage errors.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import acceptance
from . import burning_sim as bs
from . import lv_dynamics as lv
from . import lyapunov_feasibility as lf
from . import series, timechange
from .ode_blowup import (IntegratorConfig, InvariantViolation, NonMonotoneEstimate,
                         StepSizeUnderflow, estimate_blowup_shooting, fmt, integrate)

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

# fallbacks for flags given neither on the command line nor in the config file
DEFAULTS = {
    "d": 1,
    "tol": None,  # per command: 1e-12 for the ODE, LV_TOL for Lotka-Volterra
    "t_end": None,
    "seed": "1",
    "trials": 10_000,
    "window": 5.0,
    "resolution": 400,  # pixels per axis; samples in s for timechange
    "out": None,
    "terms": acceptance.SERIES_N,
    "restarts": 8,
    "iters": 2000,
    "p": "0.5,0.1",
    "eps": "1e-2,1e-3,1e-4",
    "only": None,
}


class CheckFailed(Exception):
    pass


def parse_int_list(text: str) -> list[int]:
    """'3' -> [3]; '1..4' -> [1, 2, 3, 4]; '1,5,7' -> [1, 5, 7]."""
    out = []
    for part in str(text).split(","):
        part = part.strip()
        if ".." in part:
            a, b = part.split("..")
            out.extend(range(int(a), int(b) + 1))
        elif part:
            out.append(int(part))
    if not out:
        raise ValueError(f"empty integer list {text!r}")
    return out


def parse_float_list(text: str) -> list[float]:
    return [float(v) for v in str(text).split(",") if v.strip()]


def _out_dir(args) -> Path | None:
    if args.out is None:
        return None
    p = Path(args.out)
    p.mkdir(parents=True, exist_ok=True)
    return p


def write_manifest(out: Path | None, args, outputs: list[str]) -> None:
    if out is None:
        return
    params = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "config")}
    doc = {"command": args.command, "parameters": params, "outputs": sorted(outputs)}
    (out / "manifest.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def cmd_integrate(args) -> int:
    cfg = IntegratorConfig(rel_tol=args.tol)
    traj = integrate(args.d, cfg, t_stop=args.t_end)
    out = _out_dir(args)
    print(f"d={args.d} samples={len(traj)} t_last={fmt(traj.t[-1])} y_last={fmt(traj.y[-1])}")
    if out:
        traj.to_csv(out / "trajectory.csv")
    write_manifest(out, args, ["trajectory.csv"] if out else [])
    return EXIT_OK


def cmd_estimate_t(args) -> int:
    d = args.d
    ser = series.estimate_blowup_series(series.taylor_coefficients(d, args.terms))
    print(f"series    T = {fmt(ser.T)} +- {fmt(ser.uncertainty)}")
    if d > 10:
        print("shooting  unavailable for d >= 11 (no proven blow-up rate)")
        return EXIT_OK
    shoot = estimate_blowup_shooting(d, IntegratorConfig(rel_tol=args.tol))
    print(f"shooting  T = {fmt(shoot.T)} +- {fmt(shoot.uncertainty)}")
    diff = abs(shoot.T - ser.T)
    agree = shoot.agrees_with(ser)
    print(f"difference = {fmt(diff)}; agreement: {'yes' if agree else 'no'}")
    if not agree:
        raise CheckFailed("estimate-t: shooting and series estimates disagree")
    return EXIT_OK


def cmd_timechange(args) -> int:
    cfg = IntegratorConfig(rel_tol=args.tol)
    first = integrate(args.d, cfg)
    T = estimate_blowup_shooting(args.d, cfg, first)
    # second pass lands on a uniform grid in s = phi^-1(t), starting at t0
    s_max = math.floor(float(timechange.phi_inverse(first.t[-1], T.T))) - 1.0
    grid = timechange.log_time_grid(T.T, s_max, args.resolution)
    traj = integrate(args.d, cfg, t_stop=grid[-1], t_marks=grid)
    keep = np.isin(traj.t, grid)
    traj = type(traj)(traj.t[keep], traj.jets[keep], traj.x[keep])
    c = timechange.cascade(traj, T)
    rep = timechange.residual_report(c)
    print(f"T = {fmt(T.T)}; u bound C = {fmt(c.u.bound)}")
    for k, v in rep.items():
        print(f"{k} = {fmt(v)}")
    out = _out_dir(args)
    names = []
    if out:
        for name, obj in (("u.csv", c.u), ("v.csv", c.v), ("w.csv", c.w)):
            obj.to_csv(out / name)
            names.append(name)
        with open(out / "residuals.csv", "w") as fh:
            fh.write("name,value\n")
            fh.writelines(f"{k},{fmt(v)}\n" for k, v in rep.items())
        names.append("residuals.csv")
    write_manifest(out, args, names)
    return EXIT_OK


def _write_dist(path, traj, model) -> None:
    dist = lv.distance_to_star(traj, model)
    with open(path, "w") as fh:
        fh.write("t,dist\n")
        fh.writelines(f"{fmt(t)},{fmt(v)}\n" for t, v in dist)


def cmd_lv_sim(args) -> int:
    model = lv.LVModel(args.d)
    t_end = args.t_end or 1000.0
    out = _out_dir(args)
    names = []
    for seed in parse_int_list(args.seed):
        w0 = acceptance.seeded_initial_condition(args.d, seed)
        traj = lv.simulate(model, w0, t_end, args.tol)
        dist = lv.distance_to_star(traj, model)
        tail = dist[dist[:, 0] >= t_end / 2, 1]
        print(f"seed={seed} w0=[{' '.join(fmt(v) for v in w0)}] final_dist={fmt(dist[-1, 1])} "
              f"late_max={fmt(tail.max())} late_min={fmt(tail.min())} "
              f"floor={fmt(lv.permanence_floor(traj))}")
        if out:
            traj.to_csv(out / f"w_seed{seed}.csv")
            _write_dist(out / f"dist_seed{seed}.csv", traj, model)
            names += [f"w_seed{seed}.csv", f"dist_seed{seed}.csv"]
    write_manifest(out, args, names)
    return EXIT_OK


def cmd_lv_average(args) -> int:
    model = lv.LVModel(args.d)
    t_end = args.t_end or 1e4
    marks = [t for t in acceptance.AVERAGE_CHECKPOINTS if t < t_end]
    out = _out_dir(args)
    names, failed = [], []
    print("seed,t,defect,tolerance,max_avg_deviation")
    for seed in parse_int_list(args.seed):
        traj = lv.simulate(model, acceptance.seeded_initial_condition(args.d, seed), t_end,
                           args.tol, t_marks=marks)
        defects = lv.time_average_defect(traj, model)
        tols = lv.quadrature_tolerance(traj, model)
        avgs = traj.averages
        for tc in marks + [t_end]:
            k = int(np.argmin(np.abs(traj.t[1:] - tc)))
            dev = np.abs(avgs[k + 1] - model.w_star_float).max()
            print(f"{seed},{fmt(traj.t[k + 1])},{fmt(defects[k])},{fmt(tols[k])},{fmt(dev)}")
            if defects[k] > tols[k]:
                failed.append((seed, tc))
        if out:
            traj.averages_to_csv(out / f"avg_seed{seed}.csv")
            names.append(f"avg_seed{seed}.csv")
    write_manifest(out, args, names)
    if failed:
        raise CheckFailed(f"lv-average: time-average identity defect above tolerance at {failed}")
    return EXIT_OK


def cmd_lyapunov_verify(args) -> int:
    d = args.d
    if not 1 <= d <= len(lf.REFERENCE_LAMBDA):
        raise ValueError("the reference lambda has 10 entries; use 1 <= d <= 10")
    minors = lf.leading_minors_exact(lf.REFERENCE_LAMBDA[:d])
    ok = True
    for k, (m, ref) in enumerate(zip(minors, lf.REFERENCE_MINORS), start=1):
        match = m == ref
        ok &= match
        print(f"Delta_{k} = {m}{'' if match else f'  (expected {ref})'}")
    if not ok:
        raise CheckFailed("lyapunov-verify: minors differ from the reference values")
    return EXIT_OK


def cmd_lyapunov_search(args) -> int:
    seed = parse_int_list(args.seed)[0]
    out = _out_dir(args)
    names = []
    for d in parse_int_list(args.d):
        c = lf.search_lambda(d, args.restarts, args.iters, seed)
        print(c.report())
        if out:
            (out / f"lambda_d{d}.txt").write_text(c.report())
            names.append(f"lambda_d{d}.txt")
    write_manifest(out, args, names)
    return EXIT_OK


def cmd_burn_prob(args) -> int:
    seed = parse_int_list(args.seed)[0]
    rows, bad = [], []
    for p in parse_float_list(args.p):
        t = bs.time_for_unburned(args.d, p)
        jets = bs.burn_trajectory(args.d, t, marks=(t,))
        a = bs.unburned_probability_analytic(t, jets)
        b = bs.unburned_probability_convolution(t, jets)
        r = bs.mc_unburned_fraction(bs.BurnWindow(args.d, args.window, t), t, args.trials,
                                    seed, jets)
        z = (r.estimate - a) / r.stderr if r.stderr > 0 else math.nan
        rows.append((t, a, b, r.estimate, r.stderr, z))
        if not abs(z) <= 3 or abs(a / b - 1) > 1e-8:
            bad.append(p)
    header = "t,analytic,convolution,mc_estimate,stderr,z"
    print(header)
    lines = [",".join(fmt(v) for v in row) for row in rows]
    print("\n".join(lines))
    out = _out_dir(args)
    if out:
        (out / "burn_prob.csv").write_text(header + "\n" + "\n".join(lines) + "\n")
    write_manifest(out, args, ["burn_prob.csv"] if out else [])
    if bad:
        raise CheckFailed(f"burn-prob: MC or quadrature disagreement at p={bad}")
    return EXIT_OK


def cmd_burn_render(args) -> int:
    seed = parse_int_list(args.seed)[0]
    t_max = args.t_end or 0.9 * bs.blowup_time(args.d)
    window = bs.BurnWindow(args.d, args.window, t_max)
    jets = bs.burn_trajectory(args.d, t_max, marks=(t_max,))
    atoms = bs.sample_atoms(window, jets, seed)
    raster = bs.render_field(window, atoms, args.resolution)
    frac = raster.burned_fraction()
    print(f"atoms={len(atoms)} burned_fraction_final={fmt(frac[-1])}")
    out = _out_dir(args) or Path(".")
    raster.to_ppm(out / "burn.ppm")
    raster.legend_to_csv(out / "legend.csv", atoms)
    write_manifest(out, args, ["burn.ppm", "legend.csv"])
    return EXIT_OK


def cmd_burn_coverage(args) -> int:
    seed = parse_int_list(args.seed)[0]
    rows = bs.coverage_rate_check(bs.BurnWindow(args.d, args.window, 1.0),
                                  parse_float_list(args.eps), args.trials, seed)
    print("eps,analytic_exponent,mc_estimate,stderr")
    for r in rows:
        print(f"{fmt(r.eps)},{fmt(r.analytic_exponent)},{fmt(r.mc_estimate)},{fmt(r.stderr)}")
    out = _out_dir(args)
    if out:
        bs.coverage_to_csv(rows, out / "coverage.csv")
    write_manifest(out, args, ["coverage.csv"] if out else [])
    return EXIT_OK


def cmd_check_all(args) -> int:
    numbers = parse_int_list(args.only) if args.only else None
    failed = []
    for res in acceptance.run_all(numbers):
        print(res.line(), flush=True)
        if not res.passed:
            failed.append(f"criterion {res.number} ({res.name})")
    if failed:
        raise CheckFailed("check-all: failed " + ", ".join(failed))
    return EXIT_OK


COMMANDS = {
    "integrate": (cmd_integrate, "integrate the ODE and write the trajectory CSV"),
    "estimate-t": (cmd_estimate_t, "blow-up time by shooting and by series radius"),
    "timechange": (cmd_timechange, "u/v/w cascade CSVs and residual report"),
    "lv-sim": (cmd_lv_sim, "Lotka-Volterra trajectories and distance to w*"),
    "lv-average": (cmd_lv_average, "time averages and the A w_bar = b - eps identity"),
    "lyapunov-verify": (cmd_lyapunov_verify, "exact leading minors of the reference lambda"),
    "lyapunov-search": (cmd_lyapunov_search, "search for a feasible lambda per d"),
    "burn-prob": (cmd_burn_prob, "unburned probability: analytic, quadrature and MC"),
    "burn-render": (cmd_burn_render, "PPM raster of the burning process"),
    "burn-coverage": (cmd_burn_coverage, "coverage exponent table"),
    "check-all": (cmd_check_all, "run the acceptance criteria"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="blowup_lab", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="JSON file of flag values (flags win)")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (fn, help_) in COMMANDS.items():
        p = sub.add_parser(name, help=help_)
        p.set_defaults(func=fn)
        p.add_argument("--config", help="JSON file of flag values (flags win)")
        # d is a list for lyapunov-search, a single integer elsewhere
        p.add_argument("--d", type=str if name == "lyapunov-search" else int, default=None)
        p.add_argument("--tol", type=float, default=None)
        p.add_argument("--t-end", dest="t_end", type=float, default=None)
        p.add_argument("--seed", type=str, default=None, help="integer, list 1,2 or range 1..4")
        p.add_argument("--trials", type=int, default=None)
        p.add_argument("--window", type=float, default=None, help="half-width R")
        p.add_argument("--resolution", type=int, default=None)
        p.add_argument("--out", type=str, default=None, help="output directory")
        if name == "estimate-t":
            p.add_argument("--terms", type=int, default=None, help="series length N")
        if name == "lyapunov-search":
            p.add_argument("--restarts", type=int, default=None)
            p.add_argument("--iters", type=int, default=None)
        if name == "burn-prob":
            p.add_argument("--p", type=str, default=None, help="target probabilities")
        if name == "burn-coverage":
            p.add_argument("--eps", type=str, default=None)
        if name == "check-all":
            p.add_argument("--only", type=str, default=None, help="criteria, e.g. 1..6")
    return parser


def resolve(args) -> argparse.Namespace:
    """Fill unset flags from the config file, then from DEFAULTS."""
    cfg = {}
    if args.config:
        cfg = json.loads(Path(args.config).read_text())
        if not isinstance(cfg, dict):
            raise ValueError("config file must hold a JSON object")
    for key in list(vars(args)):
        if key in ("func", "command", "config"):
            continue
        if getattr(args, key) is None:
            setattr(args, key, cfg.get(key.replace("_", "-"), cfg.get(key, DEFAULTS.get(key))))
    if args.tol is None:
        args.tol = acceptance.LV_TOL if args.command.startswith("lv-") else 1e-12
    return args


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = resolve(parser.parse_args(argv))
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    except (ValueError, OSError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except CheckFailed as exc:
        print(f"FAILED {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (InvariantViolation, NonMonotoneEstimate, StepSizeUnderflow,
            lv.PositivityViolation, lv.MonotonicityViolation, series.SeriesTooShort) as exc:
        print(f"FAILED {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
