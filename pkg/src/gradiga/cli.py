"""Command line interface.

Three subcommands cover the package's workflows:

``gradiga run <config>``
    Solve a configured boundary value problem, print a field summary,
    and optionally export VTK or CSV samples. The argument is a JSON
    file path or the name of a shipped configuration.

``gradiga validate-1d``
    Solve the gradient bar and report errors against its closed form.

``gradiga converge``
    Mesh refinement study for the bar, printing seminorm errors and
    fitted convergence rates.

Exit codes: 0 success, 2 configuration problems, 3 solver failure,
4 input/output failure.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import analysis
from .config import (
    ConfigError,
    build_system,
    list_shipped_configs,
    load_config,
    shipped_config,
    validate_config,
)
from .export import export_csv, export_vtk
from .mesh import evaluate_field
from .solver import (
    NewtonConfig,
    NonConvergenceError,
    SingularSystemError,
    newton_solve,
)

__all__ = ["main", "cmd_run", "cmd_validate_1d", "cmd_converge"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_IO = 4


def _int_list(text: str) -> list:
    try:
        return [int(part) for part in text.split(",") if part]
    except ValueError as err:
        raise argparse.ArgumentTypeError(f"expected integers, got '{text}'") from err


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gradiga",
        description="Isogeometric gradient elasticity on spline patches.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="solve a configured problem")
    run.add_argument("config", help="JSON file path or shipped config name")
    run.add_argument("--mesh", type=_int_list, default=None,
                     help="override element counts, e.g. 4,4,40")
    run.add_argument("--length", type=float, default=None,
                     help="override the material internal length")
    run.add_argument("--load-steps", type=int, default=None,
                     help="override the number of load increments")
    run.add_argument("--no-weak-bc", action="store_true",
                     help="drop all weak normal-derivative conditions")
    run.add_argument("--threads", type=int, default=None,
                     help="assembly worker threads (default GRADIGA_THREADS)")
    run.add_argument("--probe", type=int, default=10,
                     help="sample points per direction for summaries/exports")
    run.add_argument("--vtk", default=None, help="write a legacy VTK file")
    run.add_argument("--csv", default=None, help="write a CSV sample table")
    run.add_argument("--quiet", action="store_true",
                     help="suppress per-increment progress lines")

    val = sub.add_parser("validate-1d",
                         help="compare the bar against its closed form")
    val.add_argument("--l", type=float, required=True, help="internal length")
    val.add_argument("--mu", type=float, default=1.0, help="shear modulus")
    val.add_argument("--t", type=float, default=1.0, help="end traction")
    val.add_argument("--L", type=float, default=1.0, help="bar length")
    val.add_argument("--N", type=int, default=100, help="element count")
    val.add_argument("--degree", type=int, default=2, help="spline degree")
    val.add_argument("--mode", choices=("small", "finite"), default="small",
                     help="kinematics")

    conv = sub.add_parser("converge", help="mesh refinement study for the bar")
    conv.add_argument("--l", type=float, required=True, help="internal length")
    conv.add_argument("--mu", type=float, default=1.0)
    conv.add_argument("--t", type=float, default=1.0)
    conv.add_argument("--L", type=float, default=1.0)
    conv.add_argument("--degrees", type=_int_list, default=[2, 3])
    conv.add_argument("--meshes", type=_int_list,
                      default=[10, 20, 40, 80, 160])
    conv.add_argument("--mode", choices=("small", "finite"), default="small")
    return parser


def _resolve_config(arg: str) -> dict:
    """Interpret the run argument as a file path or a shipped name."""
    looks_like_path = arg.endswith(".json") or os.sep in arg
    if looks_like_path:
        if not os.path.exists(arg):
            raise OSError(f"configuration file not found: {arg}")
        return load_config(arg)
    try:
        return shipped_config(arg)
    except ConfigError:
        if os.path.exists(arg):
            return load_config(arg)
        raise


def cmd_run(args) -> int:
    cfg = _resolve_config(args.config)
    if args.mesh is not None:
        cfg["mesh"]["elements"] = args.mesh
        dim = len(args.mesh)
        cfg["mesh"]["lows"] = cfg["mesh"]["lows"][:dim]
        cfg["mesh"]["highs"] = cfg["mesh"]["highs"][:dim]
    if args.length is not None:
        if "length" not in cfg["material"]:
            raise ConfigError("material has no length to override")
        cfg["material"]["length"] = args.length
    if args.load_steps is not None:
        cfg.setdefault("solver", {})["load_steps"] = args.load_steps
    if args.no_weak_bc and "boundary" in cfg:
        cfg["boundary"].pop("weak_normal", None)
    validate_config(cfg)

    problem = build_system(cfg, n_threads=args.threads)
    system = problem.system
    print(f"problem: {problem.name}")
    print(f"degrees of freedom: {system.ndof}")

    callback = None
    if not args.quiet:
        def callback(rec):
            print(
                f"  load {rec.scale:6.3f}: {rec.iterations} iterations, "
                f"residual {rec.residuals[-1]:.3e}"
            )

    U, report = newton_solve(
        system, U0=problem.initial, config=problem.newton, callback=callback
    )

    x, u = analysis.field_probe(system.patch, U, n=args.probe)
    mag = np.linalg.norm(u, axis=1)
    imax = int(np.argmax(mag))
    local, gradient = system.energy_split(U)
    mid = [0.5 * sum(kv.domain) for kv in system.patch.knots]
    mid[-1] = system.patch.knots[-1].domain[1]
    tip = evaluate_field(
        system.patch, U.reshape(system.patch.n_control, system.ncomp), [mid]
    )[0]
    print(f"newton iterations: {report.total_iterations} "
          f"({report.n_bisections} bisections)")
    print(f"max |u| on probe grid: {mag[imax]:.6g} at x = "
          + " ".join(f"{v:.4g}" for v in x[imax]))
    print("end-face center displacement: "
          + " ".join(f"{v:.6g}" for v in tip))
    print(f"strain energy: local {local:.6g}, gradient {gradient:.6g}, "
          f"total {local + gradient:.6g}")

    if args.vtk:
        export_vtk(args.vtk, system, U, n=args.probe)
        print(f"wrote {args.vtk}")
    if args.csv:
        export_csv(args.csv, system, U, n=args.probe)
        print(f"wrote {args.csv}")
    return EXIT_OK


def cmd_validate_1d(args) -> int:
    system = analysis.validation_bar(
        args.l, args.mu, args.t, args.L, args.N, args.degree, args.mode
    )
    steps = 1 if args.mode == "small" else 10
    U, report = newton_solve(system, config=NewtonConfig(load_steps=steps))

    pts = np.linspace(0.0, args.L, 1001)[:, None]
    u_h = evaluate_field(
        system.patch, U.reshape(-1, 1), pts / args.L
    )[:, 0]
    u_ex, _, _ = analysis.analytic_1d(pts[:, 0], args.l, args.mu, args.t, args.L)
    err = np.abs(u_h - u_ex).max()
    scale = np.abs(u_ex).max()
    errs = analysis.seminorm_error(
        system.patch, U,
        lambda x: analysis.analytic_1d(x, args.l, args.mu, args.t, args.L),
    )
    print(f"mode {args.mode}, degree {args.degree}, N {args.N}, l {args.l}")
    print(f"newton iterations: {report.total_iterations}")
    print(f"end displacement u(L): {u_h[-1]:.8g} (exact {u_ex[-1]:.8g})")
    print(f"max |u_h - u|: {err:.3e} (relative {err / scale:.3e})")
    print(f"seminorm errors: H1 {errs['h1']:.3e}, H2 {errs['h2']:.3e}")
    return EXIT_OK


def cmd_converge(args) -> int:
    if not args.meshes or not args.degrees:
        raise ConfigError(
            "converge needs at least one mesh size and one degree"
        )
    study = analysis.convergence_study(
        args.l, args.mu, args.t, args.L,
        degrees=tuple(args.degrees), meshes=tuple(args.meshes),
        mode=args.mode,
    )
    for degree, data in study.items():
        print(f"degree {degree}:")
        print(f"  {'N':>6} {'H1 error':>14} {'H2 error':>14}")
        for n, h1, h2 in zip(data["meshes"], data["h1"], data["h2"]):
            print(f"  {n:>6} {h1:>14.6e} {h2:>14.6e}")
        print(f"  fitted rates: H1 {data['rate_h1']:.3f}, "
              f"H2 {data['rate_h2']:.3f} "
              f"({data['seconds']:.2f} s)")
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        # argparse uses 2 for usage errors, which matches EXIT_CONFIG.
        return int(err.code or 0)
    try:
        if args.command == "run":
            return cmd_run(args)
        if args.command == "validate-1d":
            return cmd_validate_1d(args)
        return cmd_converge(args)
    except ConfigError as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (NonConvergenceError, SingularSystemError) as err:
        print(f"solver failed: {err}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as err:
        print(f"i/o error: {err}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
