"""Command line driver: benchmarks, condition studies, solves, property checks.

Subcommands
-----------
bench-ieti    iteration counts and condition numbers of the IETI-DP solver
study-infsup  pressure Schur condition numbers over a (degree, level) grid
solve         one IETI-DP solve with a plain-text field export
verify        cross-module property suites

Exit codes: 0 success, 1 solver non-convergence, 2 invalid configuration or
geometry, 3 property suite failure. The thread count can be overridden with
the IETISTOKES_THREADS environment variable.
"""

import argparse
import csv
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .analysis import InfSupStudy, local_infsup, skeleton_spectra
from .assembly import (
    assemble_global,
    assemble_patch,
    build_taylor_hood,
    fortin_correction,
    matched_side_dofs,
    manufactured_pressure,
    manufactured_rhs,
    manufactured_velocity,
    manufactured_velocity_gradient,
    taylor_hood_spaces,
    total_errors,
)
from .domains import load_domain as _load_domain
from .domains import parse_domain, quarter_annulus_patch
from .geometry import bilinear_patch
from .ieti import (
    IetiOperator,
    SingularLocalSystemError,
    setup_ieti,
    solve_stokes_ieti,
    verify_supmat,
)

__all__ = ("RunConfig", "ConfigError", "main")

BENCH_COLUMNS = ("domain", "degree", "level", "iterations", "kappa",
                 "converged", "dofs", "seconds")
STUDY_COLUMNS = ("domain", "degree", "level", "kappa", "beta", "delta_h",
                 "dofs", "seconds")
TIMING_COLUMNS = ("seconds",)


class ConfigError(ValueError):
    pass


class RunConfig:
    """Validated parameters shared by all subcommands."""

    def __init__(self, command, domain, degrees, levels, smoothness=None,
                 tol=1e-6, max_iter=500, seed=42, output=None, threads=1,
                 use_global_pressure_mean=True, zero_data=False, samples=9,
                 method="auto", suite="all"):
        self.command = command
        self.domain = domain
        self.degrees = list(degrees)
        self.levels = list(levels)
        self.smoothness = smoothness
        self.tol = float(tol)
        self.max_iter = int(max_iter)
        self.seed = int(seed)
        self.output = output
        self.threads = int(threads)
        self.use_global_pressure_mean = bool(use_global_pressure_mean)
        self.zero_data = bool(zero_data)
        self.samples = int(samples)
        self.method = method
        self.suite = suite
        if not self.degrees or not self.levels:
            raise ConfigError("degree and level lists must be non-empty")
        if any(p < 1 for p in self.degrees):
            raise ConfigError("degrees must be at least 1")
        if any(l < 0 for l in self.levels):
            raise ConfigError("levels must be non-negative")
        if not 0.0 < self.tol < 1.0:
            raise ConfigError("tolerance must lie in (0, 1)")
        if self.max_iter < 1:
            raise ConfigError("max iterations must be positive")
        if self.threads < 1:
            raise ConfigError("thread count must be positive")
        if self.samples < 2:
            raise ConfigError("need at least 2 sample points per direction")


def load_domain(spec):
    if spec is None:
        raise ConfigError("no domain given (use --domain)")
    return _load_domain(spec)


def channel_inlet(pts):
    """Boundary data of the channel benchmark: a sine profile on the left
    side x = -2, zero on the remaining Dirichlet boundary."""
    pts = np.asarray(pts, dtype=float)
    out = np.zeros(pts.shape)
    at_inlet = np.abs(pts[..., 0] + 2.0) < 1e-9
    out[..., 0] = np.where(at_inlet, np.sin(np.pi * (2.0 + pts[..., 1]) / 4.0), 0.0)
    return out


def problem_data(mp, config):
    """(rhs, dirichlet, use_mean, manufactured) for a domain.

    Domains with a Neumann outlet get the channel inflow data (f = 0) and the
    pressure mean constraint is dropped there regardless of the flag, since
    the outlet already fixes the pressure level.
    """
    if config.zero_data:
        return None, None, config.use_global_pressure_mean, False
    if any(tag == "neumann" for tag in mp.boundary.values()):
        return None, channel_inlet, False, False
    return manufactured_rhs, manufactured_velocity, config.use_global_pressure_mean, True


# ---------------------------------------------------------------------------
# output helpers


def write_csv(path, columns, rows):
    def emit(fh):
        w = csv.writer(fh)
        w.writerow(columns)
        for row in rows:
            w.writerow([row[c] for c in columns])

    if path is None:
        emit(sys.stdout)
    else:
        with open(path, "w", newline="") as fh:
            emit(fh)


def format_grid_table(rows, degrees, levels, cell_keys, cell_fmt):
    """Aligned table with one row per level and one column group per degree."""
    by_cell = {(r["degree"], r["level"]): r for r in rows}
    headers = ["level"]
    for p in degrees:
        headers += ["p=%d:%s" % (p, key) for key in cell_keys]
    lines = [headers]
    for l in levels:
        line = [str(l)]
        for p in degrees:
            r = by_cell[(p, l)]
            line += [cell_fmt[key](r[key]) for key in cell_keys]
        lines.append(line)
    widths = [max(len(line[j]) for line in lines) for j in range(len(headers))]
    return "\n".join(
        "  ".join(val.rjust(w) for val, w in zip(line, widths)) for line in lines
    )


# ---------------------------------------------------------------------------
# bench-ieti


def bench_cell(config, degree, level):
    t0 = time.perf_counter()
    mp = load_domain(config.domain)
    spaces = taylor_hood_spaces(mp, degree, config.smoothness, level)
    rhs, dirichlet, use_mean, _ = problem_data(mp, config)
    us, ps, report = solve_stokes_ieti(
        mp, spaces, rhs=rhs, dirichlet=dirichlet,
        use_global_pressure_mean=use_mean, tol=config.tol,
        max_iter=config.max_iter, seed=config.seed)
    dofs = sum(t.n_local for t in spaces)
    return {
        "domain": config.domain,
        "degree": degree,
        "level": level,
        "iterations": report.iterations,
        "kappa": report.kappa,
        "converged": report.converged,
        "dofs": dofs,
        "seconds": time.perf_counter() - t0,
    }


def run_bench(config):
    cells = [(p, l) for p in config.degrees for l in config.levels]
    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            rows = list(pool.map(lambda c: bench_cell(config, *c), cells))
    else:
        rows = [bench_cell(config, *c) for c in cells]
    table = format_grid_table(
        rows, config.degrees, config.levels, ("iterations", "kappa"),
        {"iterations": str, "kappa": lambda v: "%.2f" % v})
    print("domain: %s  tol=%g  seed=%d" % (config.domain, config.tol, config.seed))
    print(table)
    failed = [r for r in rows if not r["converged"]]
    for r in failed:
        print("not converged: degree=%d level=%d after %d iterations"
              % (r["degree"], r["level"], r["iterations"]))
    write_csv(config.output, BENCH_COLUMNS, rows)
    return 1 if failed else 0


# ---------------------------------------------------------------------------
# study-infsup


def run_study(config):
    load_domain(config.domain)  # fail early on bad specs
    study = InfSupStudy(config.domain, config.degrees, config.levels,
                        smoothness=config.smoothness, method=config.method)
    rows = study.run(threads=config.threads)
    table = format_grid_table(
        rows, config.degrees, config.levels, ("kappa", "beta"),
        {"kappa": lambda v: "%.3f" % v, "beta": lambda v: "%.4f" % v})
    print("domain: %s  method=%s" % (config.domain, config.method))
    print(table)
    write_csv(config.output, STUDY_COLUMNS, rows)
    return 0


# ---------------------------------------------------------------------------
# solve


def export_solution(path, mp, spaces, us, ps, samples):
    with open(path, "w") as fh:
        fh.write("# ietistokes field export\n")
        fh.write("# patches: %d\n" % mp.n_patches)
        ts = np.linspace(0.0, 1.0, samples)
        for k in range(mp.n_patches):
            vel, pre = spaces[k].vel, spaces[k].pre
            fh.write("patch %d\n" % k)
            fh.write("velocity_coefficients 2 %d %d\n" % (vel.ny, vel.nx))
            for c in (0, 1):
                grid = us[k][c].reshape(vel.ny, vel.nx)
                for row in grid:
                    fh.write(" ".join("%.17g" % v for v in row) + "\n")
            fh.write("pressure_coefficients %d %d\n" % (pre.ny, pre.nx))
            for row in ps[k].reshape(pre.ny, pre.nx):
                fh.write(" ".join("%.17g" % v for v in row) + "\n")
            fh.write("samples %d %d\n" % (samples, samples))
            pts, _ = mp.patches[k].eval(ts[None, :], ts[:, None], nders=0)
            Bu = [spaces[k].vel.space_x.collocation(ts),
                  spaces[k].vel.space_y.collocation(ts)]
            Bp = [pre.space_x.collocation(ts), pre.space_y.collocation(ts)]
            uvals = [Bu[1] @ us[k][c].reshape(vel.ny, vel.nx) @ Bu[0].T for c in (0, 1)]
            pvals = Bp[1] @ ps[k].reshape(pre.ny, pre.nx) @ Bp[0].T
            for j in range(samples):
                for i in range(samples):
                    fh.write("%.17g %.17g %.17g %.17g %.17g %.17g %.17g\n" % (
                        ts[i], ts[j], pts[j, i, 0], pts[j, i, 1],
                        uvals[0][j, i], uvals[1][j, i], pvals[j, i]))


def run_solve(config):
    mp = load_domain(config.domain)
    degree, level = config.degrees[0], config.levels[0]
    spaces = taylor_hood_spaces(mp, degree, config.smoothness, level)
    rhs, dirichlet, use_mean, manufactured = problem_data(mp, config)
    us, ps, report = solve_stokes_ieti(
        mp, spaces, rhs=rhs, dirichlet=dirichlet,
        use_global_pressure_mean=use_mean, tol=config.tol,
        max_iter=config.max_iter, seed=config.seed)
    print("domain: %s  degree=%d  level=%d" % (config.domain, degree, level))
    print("iterations=%d  kappa=%.3f  converged=%s"
          % (report.iterations, report.kappa, report.converged))
    if manufactured:
        h1u, l2u, l2p = total_errors(
            mp, spaces, us, ps, exact_u=manufactured_velocity,
            exact_grad_u=manufactured_velocity_gradient,
            exact_p=manufactured_pressure)
        print("H1 velocity error: %.6e" % h1u)
        print("L2 velocity error: %.6e" % l2u)
        print("L2 pressure error: %.6e" % l2p)
    if config.output:
        export_solution(config.output, mp, spaces, us, ps, config.samples)
        print("wrote fields to %s" % config.output)
    return 0 if report.converged else 1


# ---------------------------------------------------------------------------
# verify


def _suite_algebra(config):
    checks = []
    for degree in config.degrees:
        for level in config.levels:
            tag = "p=%d l=%d" % (degree, level)
            mp = load_domain(config.domain)
            spaces = taylor_hood_spaces(mp, degree, config.smoothness, level)
            glob = assemble_global(mp, spaces, rhs=manufactured_rhs,
                                   dirichlet=manufactured_velocity)
            worst_div = max(
                np.abs(s.D_i.T @ np.ones(s.Mp.shape[0])).max() if s.D_i.shape[1] else 0.0
                for s in glob.systems)
            checks.append(("interior divergence of constants %s" % tag,
                           worst_div < 1e-12, "%.2e" % worst_div))
            worst_ker = max(
                np.abs(s.Ks @ np.ones(s.Ks.shape[0])).max()
                / max(np.abs(s.Ks.data).max(), 1.0)
                for s in glob.systems)
            checks.append(("constant velocity in stiffness kernel %s" % tag,
                           worst_ker < 1e-12, "%.2e" % worst_ker))
            op = IetiOperator(mp, spaces, glob.systems)
            worst_psi = 0.0
            for k, ths in enumerate(spaces):
                psi = op.psi_x[k]
                nu = 2 * (ths.n_gamma + ths.n_inner)
                worst_psi = max(worst_psi, np.abs(psi[:nu, 0]).max(),
                                np.abs(psi[nu:, 0] - 1.0).max())
            checks.append(("averaging basis structure %s" % tag,
                           worst_psi < 1e-10, "%.2e" % worst_psi))
            rng = np.random.default_rng(config.seed)
            nck = len(glob.systems)
            worst_b = 0.0
            for _ in range(100):
                vs = [rng.standard_normal(2 * t.n_gamma) for t in spaces]
                jump = sum(op.Bs[k] @ vs[k] for k in range(nck))
                back = sum(
                    op.Bs[k] @ (0.5 * (op.Bs[k].T @ jump)) for k in range(nck))
                worst_b = max(worst_b, np.abs(back - jump).max())
            checks.append(("jump operator projection identity %s" % tag,
                           worst_b < 1e-12, "%.2e" % worst_b))
            # B^T(Bv)/2 splits each inter-patch difference antisymmetrically.
            vs = [rng.standard_normal(2 * t.n_gamma) for t in spaces]
            jump = sum(op.Bs[k] @ vs[k] for k in range(nck))
            ws = [0.5 * (op.Bs[k].T @ jump) for k in range(nck)]
            worst_j = 0.0
            for iface in op.constraints.interfaces:
                da, db = matched_side_dofs(mp, spaces, iface)
                for comp in (0, 1):
                    pa = [spaces[iface.a].gamma_pos(comp, d) for d in da[1:-1]]
                    pb = [spaces[iface.b].gamma_pos(comp, d) for d in db[1:-1]]
                    diff = vs[iface.a][pa] - vs[iface.b][pb]
                    worst_j = max(
                        worst_j,
                        np.abs(ws[iface.a][pa] - ws[iface.b][pb] - diff).max(),
                        np.abs(ws[iface.a][pa] + ws[iface.b][pb]).max())
            checks.append(("jump carries inter-patch differences %s" % tag,
                           worst_j < 1e-12, "%.2e" % worst_j))
            worst_sym, psd_ok = 0.0, True
            for _ in range(100):
                l1 = rng.standard_normal(op.n_lambda)
                l2 = rng.standard_normal(op.n_lambda)
                f1 = op.apply_F(l1)
                s12 = f1 @ l2
                worst_sym = max(worst_sym,
                                abs(s12 - l1 @ op.apply_F(l2))
                                / max(1.0, abs(s12)))
                psd_ok = psd_ok and l1 @ f1 >= -1e-10 * np.linalg.norm(f1) * np.linalg.norm(l1)
            checks.append(("dual operator symmetric %s" % tag,
                           worst_sym < 1e-10, "%.2e" % worst_sym))
            checks.append(("dual operator positive semidefinite %s" % tag,
                           psd_ok, ""))
    return checks


def _suite_skeleton(config):
    from .analysis import skeleton_spectra as spectra

    floating = {s: "interface" for s in ("west", "east", "south", "north")}
    corners = ((0, 0), (1, 0), (0, 1), (1, 1))
    patches = [
        ("unit square", bilinear_patch((0, 0), (1, 0), (0, 1), (1, 1))),
        ("quarter annulus", quarter_annulus_patch()),
    ]
    checks = []
    for name, geo in patches:
        for degree in config.degrees:
            for level in config.levels:
                ths_d = build_taylor_hood(geo, degree, refinement=level)
                beta = local_infsup(assemble_patch(geo, ths_d))
                ths_f = build_taylor_hood(geo, degree, refinement=level,
                                          side_roles=floating, gamma_corners=corners)
                ev = spectra(assemble_patch(geo, ths_f))
                lo, hi = ev.min(), ev.max()
                bound = 3.0 * 2.0 / beta**2
                ok = lo >= 1.0 - 1e-8 and hi <= bound + 1e-8
                checks.append(("skeleton spectra in [1, 6/beta^2] %s p=%d l=%d"
                               % (name, degree, level), ok,
                               "[%.3f, %.3f] bound %.3f" % (lo, hi, bound)))
    return checks


def _suite_supmat(config):
    out = verify_supmat(seed=0, instances=50, nmax=8, tol=1e-8)
    return [("sup representation identities (50 instances)", out["ok"],
             "max rel err %.2e" % out["max_rel_err"])]


def _suite_fortin(config):
    checks = []
    rng = np.random.default_rng(config.seed)
    for spec in ("grid(2,2)", "grid(3,3)"):
        mp = parse_domain(spec)
        spaces = taylor_hood_spaces(mp, config.degrees[0], config.smoothness,
                                    config.levels[0])
        glob = assemble_global(mp, spaces)
        worst = 0.0
        for _ in range(20):
            vals = np.zeros((2, glob.n_scalar))
            vals[:, glob.free] = rng.standard_normal((2, len(glob.free)))
            us = [vals[:, l2g] for l2g in glob.scalar_l2g]
            proj = fortin_correction(mp, spaces, us)
            for k, s in enumerate(glob.systems):
                w = np.concatenate([us[k][c] - proj[k][c] for c in (0, 1)])
                worst = max(worst, abs(np.ones(s.Mp.shape[0]) @ (s.D @ w)))
        checks.append(("interface interpolant preserves divergence averages %s"
                       % spec, worst < 1e-10, "%.2e" % worst))
    return checks


SUITES = {
    "algebra": _suite_algebra,
    "lemma3": _suite_skeleton,
    "supmat": _suite_supmat,
    "fortin": _suite_fortin,
}


def run_verify(config):
    names = list(SUITES) if config.suite == "all" else [config.suite]
    results = []
    for name in names:
        for check, ok, detail in SUITES[name](config):
            results.append((name, check, ok, detail))
    width = max(len(r[1]) for r in results)
    for name, check, ok, detail in results:
        print("%-8s %s  %s  %s" % (name, check.ljust(width),
                                   "pass" if ok else "FAIL", detail))
    failed = [r for r in results if not r[2]]
    print("%d checks, %d failed" % (len(results), len(failed)))
    return 3 if failed else 0


# ---------------------------------------------------------------------------
# argument handling


def _int_list(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError("expected a comma-separated integer list")


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--domain", help="built-in spec like grid(2,2) or a geometry file")
    common.add_argument("--degrees", type=_int_list, help="pressure degrees, e.g. 2,3")
    common.add_argument("--levels", type=_int_list, help="refinement levels, e.g. 2,3,4")
    common.add_argument("--smoothness", type=int, default=None)
    common.add_argument("--tol", type=float, default=1e-6)
    common.add_argument("--max-iter", type=int, default=500)
    common.add_argument("--seed", type=int, default=42)
    common.add_argument("--output", default=None)
    common.add_argument("--threads", type=int, default=1)

    parser = argparse.ArgumentParser(prog="ietistokes", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    bench = sub.add_parser("bench-ieti", parents=[common],
                           help="iteration counts and condition numbers")
    bench.add_argument("--no-global-pressure-mean", action="store_true")
    study = sub.add_parser("study-infsup", parents=[common],
                           help="pressure Schur condition study")
    study.add_argument("--method", choices=("auto", "dense", "iterative"),
                       default="auto")
    solve = sub.add_parser("solve", parents=[common], help="single solve with export")
    solve.add_argument("--no-global-pressure-mean", action="store_true")
    solve.add_argument("--zero-data", action="store_true")
    solve.add_argument("--samples", type=int, default=9)
    verify = sub.add_parser("verify", parents=[common], help="property suites")
    verify.add_argument("--suite", default="all",
                        choices=("all",) + tuple(sorted(SUITES)))
    return parser


def parse_config(argv):
    args = build_parser().parse_args(argv)
    command = args.command
    domain = args.domain
    degrees = args.degrees
    levels = args.levels
    if command == "verify":
        domain = domain or "grid(2,2)"
        degrees = degrees or [1, 2]
        levels = levels or [1, 2]
    else:
        if domain is None:
            raise ConfigError("%s requires --domain" % command)
        degrees = degrees or [2]
        levels = levels or [2]
    threads = int(os.environ.get("IETISTOKES_THREADS", args.threads))
    return RunConfig(
        command=command,
        domain=domain,
        degrees=degrees,
        levels=levels,
        smoothness=args.smoothness,
        tol=args.tol,
        max_iter=args.max_iter,
        seed=args.seed,
        output=args.output,
        threads=threads,
        use_global_pressure_mean=not getattr(args, "no_global_pressure_mean", False),
        zero_data=getattr(args, "zero_data", False),
        samples=getattr(args, "samples", 9),
        method=getattr(args, "method", "auto"),
        suite=getattr(args, "suite", "all"),
    )


COMMANDS = {
    "bench-ieti": run_bench,
    "study-infsup": run_study,
    "solve": run_solve,
    "verify": run_verify,
}


def main(argv=None):
    try:
        config = parse_config(argv)
    except ConfigError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 2
    try:
        return COMMANDS[config.command](config)
    except (ConfigError, ValueError, OSError, SingularLocalSystemError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
