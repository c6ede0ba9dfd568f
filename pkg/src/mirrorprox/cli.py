"""Command-line harness: ``generate``, ``solve``, ``verify``, ``gap`` and ``plot``.

Exit codes: 0 success, 2 argument or parse error, 3 failed inequality,
4 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import gap as gapmod
from .core import ContractViolation, DomainError, MirrorMap
from .geometry import NumericalDegeneracyError
from .plotting import line_chart_svg
from .problems import (SpecParseError, SpecValidationError, generate_game, load_spec,
                       matching_pennies, save_spec)
from .solvers import (METHODS, POPOV, DiagnosticViolation, SolverConfig, eps_sum_bound, run,
                      DIST_TOL, DELTA_TOL, EPS_TOL, RESIDUAL_TOL, EPS_SUM_TOL, H_TOL)

EXIT_OK, EXIT_USAGE, EXIT_VIOLATION, EXIT_IO = 0, 2, 3, 4
TRACE_COLUMNS = ("iter", "gap_estimate", "gap_method", "bound", "map_evals", "wall_ms")
SEED_ENV = "MIRRORPROX_SEED"


class UsageError(Exception):
    pass


def _num(v) -> str:
    v = float(v)
    return "nan" if math.isnan(v) else repr(v)


def _point(text):
    try:
        return np.array([float(t) for t in text.split(",")])
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _gamma(text):
    if text == "auto":
        return "auto"
    try:
        g = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError("gamma must be 'auto' or a positive number")
    if not g > 0:
        raise argparse.ArgumentTypeError("gamma must be positive")
    return g


def _positive_int(text):
    n = int(text)
    if n < 1:
        raise argparse.ArgumentTypeError("expected a positive integer")
    return n


def _resolve_seed(args):
    if args.seed is not None:
        return args.seed
    env = os.environ.get(SEED_ENV)
    if env is None:
        return None
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"{SEED_ENV}={env!r} is not an integer")


def _load_problem(args):
    """Return ``(spec, source description)`` from ``--problem`` or the seed."""
    if args.problem:
        return load_spec(args.problem), str(args.problem)
    seed = _resolve_seed(args)
    if seed is None:
        raise UsageError("give --problem or a generator seed (--seed / MIRRORPROX_SEED)")
    lo, hi = args.eig
    return generate_game(seed, (lo, hi)), f"generate(seed={seed}, eig=[{lo}, {hi}])"


def _add_problem_args(p):
    p.add_argument("--problem", type=Path, help="problem file (.vigame)")
    p.add_argument("--seed", type=int, default=None,
                   help=f"generator/sampler seed (falls back to ${SEED_ENV})")
    p.add_argument("--eig", type=float, nargs=2, default=(0.0, 100.0), metavar=("LO", "HI"),
                   help="eigenvalue range when generating from --seed")


def _add_run_args(p, iters):
    p.add_argument("--method", choices=METHODS, default=POPOV)
    p.add_argument("--mirror", choices=("entropic", "euclidean"), default="entropic")
    p.add_argument("--gamma", type=_gamma, default="auto")
    p.add_argument("--iters", type=_positive_int, default=iters)
    p.add_argument("--x0", type=_point, default=None, help="initial x, comma-separated")
    p.add_argument("--y0", type=_point, default=None, help="initial y, comma-separated")


def _check_eig(args):
    lo, hi = args.eig
    if not 0 <= lo <= hi:
        raise UsageError(f"--eig needs 0 <= LO <= HI, got {lo} {hi}")


def cmd_generate(args, out):
    if args.matching_pennies:
        spec = matching_pennies()
    else:
        _check_eig(args)
        seed = _resolve_seed(args)
        if seed is None:
            raise UsageError("generate needs --seed or MIRRORPROX_SEED")
        spec = generate_game(seed, tuple(args.eig))
    save_spec(spec, args.out)
    J = spec.jacobian()
    eigs = np.linalg.eigvalsh(0.5 * (J + J.T))
    print(f"wrote {args.out}", file=out)
    print(f"L_computed = {spec.L_computed!r}", file=out)
    print("symmetric-part spectrum: " + " ".join(f"{e:.6g}" for e in eigs), file=out)
    return EXIT_OK


def _solver_config(args, **extra):
    return SolverConfig(method=args.method, mirror=args.mirror, gamma=args.gamma,
                        max_iters=args.iters, x0=args.x0, y0=args.y0, **extra)


def _logged_iters(T, every):
    its = list(range(every, T + 1, every))
    if not its or its[-1] != T:
        its.append(T)
    return its


def cmd_solve(args, out):
    _check_eig(args)
    if args.gap_every < 1:
        raise UsageError("--gap-every must be at least 1")
    spec, source = _load_problem(args)
    problem = spec.to_problem()
    seed = _resolve_seed(args) or 0
    config = _solver_config(args, strict=args.strict, timing=args.timing)
    trace = run(config, problem)
    mirror = MirrorMap(args.mirror)

    bound_ok = (args.method == POPOV
                and trace.gamma <= mirror.alpha / (2.0 * problem.lipschitz) * (1 + 1e-12))
    two_by_two = problem.set.blocks == (2, 2)
    estimator = args.gap_estimator
    if estimator == "grid" and not two_by_two:
        raise UsageError("the grid estimator needs a 2x2 game")
    sampler = None
    if estimator == "sampling" or two_by_two:
        sampler = gapmod.SampledGap(problem, args.gap_samples, seed, workers=args.workers)

    def estimate(method, y):
        if method == "sampling":
            return sampler(y).value
        return gapmod.gap_grid_oracle(problem, y, args.gap_grid_step).value

    cumulative_ms = np.cumsum(trace.wall_ms)
    rows = []
    T = trace.iterations
    for t in _logged_iters(T, args.gap_every) if T > 0 else []:
        y = trace.averaged(t)
        bound = (gapmod.theorem_bound(problem, mirror, trace.gamma, t, trace.xs[0], trace.ys[0])
                 if bound_ok else float("nan"))
        methods = [estimator]
        if t == T and two_by_two:
            methods.append("grid" if estimator == "sampling" else "sampling")
        for m in methods:
            rows.append((t, estimate(m, y), m, bound, int(trace.map_evals[t]),
                         cumulative_ms[t] if args.timing else float("nan")))

    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    with open(outdir / "trace.csv", "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for t, g, m, b, ev, ms in rows:
            w.writerow([t, _num(g), m, _num(b), ev, _num(ms)])
    meta = {
        "label": f"{args.method}/{args.mirror}",
        "problem": source,
        "method": args.method,
        "mirror": args.mirror,
        "gamma": trace.gamma,
        "lipschitz": trace.lipschitz,
        "alpha": trace.alpha,
        "iterations": T,
        "x0": trace.config["x0"],
        "y0": trace.config["y0"],
        "gap_estimator": estimator,
        "gap_samples": args.gap_samples,
        "gap_grid_step": args.gap_grid_step,
        "seed": seed,
        "final_average": trace.averaged().tolist(),
    }
    with open(outdir / "run.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if rows:
        last = rows[-1] if rows[-1][2] == estimator else rows[-2]
        print(f"T={T} gap_estimate={last[1]:.6g} ({estimator}) bound={last[3]:.6g} "
              f"map_evals={last[4]}", file=out)
    print(f"wrote {outdir / 'trace.csv'}", file=out)
    return EXIT_OK


def verify_report(trace, problem, mirror: MirrorMap):
    """Check every inequality of the step analysis on a diagnosed trace.

    Returns a list of ``(name, status, worst_slack)`` with status ``PASS``,
    ``FAIL`` or ``N/A``; slack is ``rhs - lhs`` (negative means violated).
    """
    ds = trace.diagnostics
    gamma, L, alpha = trace.gamma, problem.lipschitz, mirror.alpha
    results = []

    def add(name, slacks, tol):
        if len(slacks) == 0:
            results.append((name, "N/A", float("nan")))
            return
        worst = float(np.min(slacks))
        results.append((name, "PASS" if worst >= -tol else "FAIL", worst))

    feas = [-(0.0 if problem.set.contains(v) else 1.0) for v in
            list(trace.xs) + list(trace.ys)]
    add("feasibility", feas, 0.0)
    add("step_distance", [d.dist_yx_bound - d.dist_yx for d in ds], DIST_TOL)
    # contraction of the prox-mapping at points gamma F(.), measured at the
    # two points where the mapping was evaluated
    base = trace.ys if trace.config["method"] == POPOV else trace.xs
    contraction = [gamma * L / alpha * float(np.linalg.norm(base[d.t] - trace.ys[d.t + 1]))
                   - d.dist_yx for d in ds]
    add("contraction", contraction, DIST_TOL)
    add("h_descent", [d.h_slack for d in ds], H_TOL)
    add("delta_le_eps", [d.eps_t - d.delta_t for d in ds], DELTA_TOL)
    add("eps_bound", [d.eps_bound - d.eps_t for d in ds], EPS_TOL)
    add("opt_y", [d.opt_residual_y for d in ds], RESIDUAL_TOL)
    add("opt_x", [d.opt_residual_x for d in ds], RESIDUAL_TOL)
    if (trace.config["method"] == POPOV and ds
            and gamma <= alpha / (2.0 * L) * (1 + 1e-12)):
        rhs = eps_sum_bound(gamma, L, alpha, trace.xs[0], trace.ys[0])
        add("eps_sum", rhs - trace.eps_partial_sums(), EPS_SUM_TOL)
    else:
        results.append(("eps_sum", "N/A", float("nan")))
    return results


def cmd_verify(args, out):
    _check_eig(args)
    spec, source = _load_problem(args)
    problem = spec.to_problem()
    trace = run(_solver_config(args, diagnostics=True), problem)
    report = verify_report(trace, problem, MirrorMap(args.mirror))
    print(f"problem {source}; {args.method}/{args.mirror}, gamma={trace.gamma:.6g}, "
          f"T={trace.iterations}", file=out)
    for name, status, slack in report:
        print(f"{status:4s} {name:12s} worst slack {slack:.3e}", file=out)
    return EXIT_VIOLATION if any(s == "FAIL" for _, s, _ in report) else EXIT_OK


def cmd_gap(args, out):
    _check_eig(args)
    spec, source = _load_problem(args)
    problem = spec.to_problem()
    x = problem.set.uniform() if args.point is None else args.point
    seed = _resolve_seed(args) or 0
    est = gapmod.estimate_gap_sampling(problem, x, args.gap_samples, seed, workers=args.workers)
    print(f"sampling value={est.value!r} n={est.n_samples} seed={seed} "
          f"argmax_u={est.argmax_u.tolist()}", file=out)
    if problem.set.blocks == (2, 2):
        grid = gapmod.gap_grid_oracle(problem, x, args.gap_grid_step)
        print(f"grid     value={grid.value!r} step={grid.step} "
              f"argmax_u={grid.argmax_u.tolist()}", file=out)
        print(f"difference grid - sampling = {grid.value - est.value:.3e}", file=out)
    return EXIT_OK


def read_trace(path):
    """Parse a ``trace.csv``; raises :class:`SpecParseError` with the line number."""
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header[:len(TRACE_COLUMNS)]) != TRACE_COLUMNS:
            raise SpecParseError(f"{path}:1", f"expected header {','.join(TRACE_COLUMNS)}")
        rows = []
        for row in reader:
            line = reader.line_num
            if len(row) != len(TRACE_COLUMNS):
                raise SpecParseError(f"{path}:{line}", f"expected {len(TRACE_COLUMNS)} fields")
            try:
                rows.append(dict(iter=int(row[0]), gap_estimate=float(row[1]),
                                 gap_method=row[2], bound=float(row[3]),
                                 map_evals=int(row[4]), wall_ms=float(row[5])))
            except ValueError as exc:
                raise SpecParseError(f"{path}:{line}", str(exc)) from None
    return rows


def _trace_label(path):
    meta = Path(path).parent / "run.json"
    if meta.exists():
        try:
            return json.loads(meta.read_text(encoding="utf-8"))["label"]
        except (ValueError, KeyError):
            pass
    return Path(path).parent.name or Path(path).stem


def cmd_plot(args, out):
    if not args.traces:
        raise UsageError("plot needs at least one trace file")
    series, bounds = [], []
    merged = io.StringIO()
    w = csv.writer(merged, lineterminator="\n")
    w.writerow(("series", "iter", "value"))
    for path in args.traces:
        rows = read_trace(path)
        label = _trace_label(path)
        if not rows:
            continue
        method = rows[0]["gap_method"]
        main = [r for r in rows if r["gap_method"] == method]
        series.append(dict(label=label, x=[r["iter"] for r in main],
                           y=[r["gap_estimate"] for r in main]))
        for r in main:
            w.writerow((label, r["iter"], _num(r["gap_estimate"])))
        bx = [r["iter"] for r in main if math.isfinite(r["bound"])]
        by = [r["bound"] for r in main if math.isfinite(r["bound"])]
        if by and all((bx, by) != (b["x"], b["y"]) for b in bounds):
            bounds.append(dict(label=f"bound {label}", x=bx, y=by, dashed=True))
            for xv, yv in zip(bx, by):
                w.writerow((f"bound {label}", xv, _num(yv)))
    target = Path(args.out)
    svg = line_chart_svg(series + bounds, title=args.title)
    target.write_text(svg, encoding="utf-8")
    target.with_suffix(".csv").write_text(merged.getvalue(), encoding="utf-8")
    print(f"wrote {target} and {target.with_suffix('.csv')}", file=out)
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="mirrorprox",
                                     description="Popov / Korpelevich mirror-prox experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a random monotone matrix game")
    g.add_argument("--seed", type=int, default=None)
    g.add_argument("--eig", type=float, nargs=2, default=(0.0, 100.0), metavar=("LO", "HI"))
    g.add_argument("--matching-pennies", action="store_true",
                   help="write the matching-pennies game instead of a random one")
    g.add_argument("-o", "--out", required=True, type=Path)
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("solve", help="run a solver and write trace.csv")
    _add_problem_args(s)
    _add_run_args(s, iters=1000)
    s.add_argument("--gap-every", type=int, default=10)
    s.add_argument("--gap-samples", type=_positive_int, default=gapmod.DEFAULT_SAMPLES)
    s.add_argument("--gap-grid-step", type=float, default=gapmod.DEFAULT_GRID_STEP)
    s.add_argument("--gap-estimator", choices=("sampling", "grid"), default="sampling")
    s.add_argument("--workers", type=_positive_int, default=1)
    s.add_argument("--strict", action="store_true",
                   help="check every step inequality and exit 3 on the first failure")
    s.add_argument("--timing", action="store_true",
                   help="record wall time per iteration (makes the trace non-reproducible)")
    s.add_argument("-o", "--out", type=Path, default=Path("run"))
    s.set_defaults(func=cmd_solve)

    v = sub.add_parser("verify", help="check the step inequalities along a run")
    _add_problem_args(v)
    _add_run_args(v, iters=500)
    v.set_defaults(func=cmd_verify)

    q = sub.add_parser("gap", help="estimate the dual gap at a point")
    _add_problem_args(q)
    q.add_argument("--point", type=_point, default=None)
    q.add_argument("--gap-samples", type=_positive_int, default=gapmod.DEFAULT_SAMPLES)
    q.add_argument("--gap-grid-step", type=float, default=gapmod.DEFAULT_GRID_STEP)
    q.add_argument("--workers", type=_positive_int, default=1)
    q.set_defaults(func=cmd_gap)

    pl = sub.add_parser("plot", help="overlay trace files in an SVG chart")
    pl.add_argument("traces", nargs="*", type=Path)
    pl.add_argument("-o", "--out", type=Path, default=Path("convergence.svg"))
    pl.add_argument("--title", default="")
    pl.set_defaults(func=cmd_plot)
    return parser


def main(argv=None, out=None) -> int:
    out = sys.stdout if out is None else out
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args, out)
    except DiagnosticViolation as exc:
        print(f"invariant violated: {exc.report}", file=sys.stderr)
        return EXIT_VIOLATION
    except (UsageError, SpecParseError, SpecValidationError, ContractViolation,
            DomainError, NumericalDegeneracyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
