"""Command line front end.

Subcommands: solve, table-mesh, table-p, table-bad, prox-curve, gmap-curve,
fd-check, mms-check.  Exit codes: 0 on success, 2 for configuration errors,
3 for numerical failures.
"""

from __future__ import annotations

import argparse
import math
import sys

from . import experiments as ex
from .errors import NumericError, ParameterError
from .penalties import PenaltySpec


def _parse_int_list(text):
    try:
        return [int(t) for t in text.split(",") if t]
    except ValueError:
        raise ParameterError(f"expected a comma-separated integer list, got {text!r}") from None


def _parse_float_list(text):
    try:
        return [float(t) for t in text.split(",") if t]
    except ValueError:
        raise ParameterError(f"expected a comma-separated float list, got {text!r}") from None


def _experiment_config(args) -> ex.ExperimentConfig:
    cfg = ex.get_preset(args.preset)
    overrides = {}
    if getattr(args, "config", None):
        overrides.update(ex.parse_config_file(args.config))
    for item in getattr(args, "set", None) or []:
        if "=" not in item:
            raise ParameterError(f"--set expects key=value, got {item!r}")
        key, _, val = item.partition("=")
        overrides[key.strip()] = val.strip()
    if args.n is not None:
        overrides["n"] = args.n
    cfg = ex.coerce_config(cfg, overrides)
    if getattr(args, "no_plots", False):
        cfg.plots = False
    cfg.penalty()  # validate the penalty parameters early
    return cfg


def cmd_solve(args) -> int:
    cfg = _experiment_config(args)
    summary = ex.run_experiment(cfg, args.out)
    print(f"problem={cfg.problem} n={cfg.n} h={summary['h']:.6g}")
    print(f"J(u*)      = {summary['J']:.6f}")
    print(f"f(u*)      = {summary['f']:.6f}")
    print(f"N_p(u*)    = {summary['N_p']:.6f}")
    print(f"support    = {summary['support_measure']:.6f}")
    print(f"iterations = {summary['iterations']} (converged={summary['converged']})")
    print(f"pde solves = {summary['pde_solves']} "
          f"({summary['state_solves']} state + {summary['adjoint_solves']} adjoint)")
    print(f"l-stationarity residual = {summary['l_stat_residual']:.3e} at L={summary['L_final']:g}")
    print(f"pointwise-minimum residual = {summary['pmp_residual']:.3e}, "
          f"violation measure = {summary['pmp_violation_measure']:.3e}")
    print(f"artifacts written to {args.out}")
    if not summary["converged"]:
        print("warning: iteration budget exhausted before the stopping rule", file=sys.stderr)
    return 0


def cmd_table_mesh(args) -> int:
    base = _experiment_config(args)
    rows, _ = ex.table_mesh_sweep(ns=args.ns, base=base, out_dir=args.out, plots=base.plots)
    _print_rows(rows, ["n", "h", "J", "N_p", "pde", "iters"])
    print(f"table written to {args.out}")
    return 0


def cmd_table_p(args) -> int:
    base = _experiment_config(args)
    rows, _ = ex.table_p_sweep(ps=args.ps, n=args.n if args.n else 500, base=base,
                               out_dir=args.out, plots=base.plots)
    _print_rows(rows, ["p", "J", "N_p", "pde", "iters"])
    print(f"table written to {args.out}")
    return 0


def cmd_table_bad(args) -> int:
    base = _experiment_config(args)
    rows, _ = ex.table_bad_params(ns=args.ns, base=base, out_dir=args.out, plots=base.plots)
    _print_rows(rows, ["n", "h", "J", "N_p", "pde", "iters"])
    print(f"table written to {args.out}")
    return 0


def cmd_prox_curve(args) -> int:
    pen = PenaltySpec(kind=args.kind, p=args.p, log_slope=args.log_slope,
                      box_bound=args.b if args.b > 0 else math.inf)
    ex.prox_curve(pen, s=args.s, q_max=args.qmax, num=args.num,
                  out_dir=args.out, plots=not args.no_plots)
    print(f"prox curve written to {args.out}")
    return 0


def cmd_gmap_curve(args) -> int:
    pen = PenaltySpec(kind=args.kind, p=args.p, log_slope=args.log_slope,
                      box_bound=args.b if args.b > 0 else math.inf,
                      alpha=args.alpha, beta=args.beta)
    members = ex.gmap_curve(args.L, pen, z_max=args.zmax, num_z=args.num_z,
                            u_max=args.umax if args.umax > 0 else None,
                            num_u=args.num_u, out_dir=args.out, plots=not args.no_plots)
    print(f"{len(members)} members written to {args.out}")
    return 0


def cmd_fd_check(args) -> int:
    errors = ex.fd_check(problem=args.problem, n=args.n if args.n else 40,
                         seed=args.seed, ndirs=args.ndirs)
    for i, e in enumerate(errors):
        print(f"direction {i}: relative error {e:.3e}")
    worst = max(errors)
    print(f"worst relative error: {worst:.3e} (tolerance 1e-05)")
    if worst > 1e-5:
        raise NumericError("finite-difference gradient check failed")
    return 0


def cmd_mms_check(args) -> int:
    errors, rates = ex.mms_check(problem=args.problem, ns=args.ns)
    for n, e in zip(args.ns, errors):
        print(f"n={n}: L2 error {e:.6e}")
    for (n1, n2), r in zip(zip(args.ns[:-1], args.ns[1:]), rates):
        print(f"observed order {n1}->{n2}: {r:.3f}")
    if not all(1.8 <= r <= 2.2 for r in rates):
        raise NumericError("manufactured-solution convergence order outside [1.8, 2.2]")
    return 0


def _print_rows(rows, header):
    print("  ".join(str(h).rjust(10) for h in header))
    for r in rows:
        print("  ".join((f"{v:.6g}" if isinstance(v, float) else str(v)).rjust(10) for v in r))


def _add_common(p, default_out, preset="example1"):
    p.add_argument("--preset", default=preset, help=f"one of {tuple(ex.PRESETS)}")
    p.add_argument("--config", help="flat key = value configuration file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override a configuration field (repeatable)")
    p.add_argument("--n", type=int, default=None, help="cells per side")
    p.add_argument("--out", default=default_out, help="output directory")
    p.add_argument("--no-plots", action="store_true", help="skip figure rendering")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sparsepg",
                                 description="Proximal gradient solver for sparse optimal control")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="run one experiment and write its report")
    _add_common(p, "runs/solve")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("table-mesh", help="mesh refinement sweep (p = 0.5)")
    _add_common(p, "runs/table_mesh")
    p.add_argument("--ns", type=_parse_int_list, default=[20, 40, 80, 160, 320, 640])
    p.set_defaults(func=cmd_table_mesh)

    p = sub.add_parser("table-p", help="penalty exponent sweep")
    _add_common(p, "runs/table_p")
    p.add_argument("--ps", type=_parse_float_list, default=[0.5, 0.3, 0.1, 0.01, 0.001])
    p.set_defaults(func=cmd_table_p)

    p = sub.add_parser("table-bad", help="slow regime L0 > (2/p - 1) alpha")
    _add_common(p, "runs/table_bad", preset="table5")
    p.add_argument("--ns", type=_parse_int_list, default=[160])
    p.set_defaults(func=cmd_table_bad)

    p = sub.add_parser("prox-curve", help="sample a scalar prox map")
    p.add_argument("--kind", default="lp")
    p.add_argument("--p", type=float, default=0.5)
    p.add_argument("--log-slope", type=float, default=1.0)
    p.add_argument("--s", type=float, default=0.5)
    p.add_argument("--b", type=float, default=2.0, help="box bound; <= 0 means unbounded")
    p.add_argument("--qmax", type=float, default=3.0)
    p.add_argument("--num", type=int, default=1201)
    p.add_argument("--out", default="runs/prox_curve")
    p.add_argument("--no-plots", action="store_true")
    p.set_defaults(func=cmd_prox_curve)

    p = sub.add_parser("gmap-curve", help="sample the set-valued stationarity map")
    p.add_argument("--L", type=float, default=0.1)
    p.add_argument("--kind", default="lp")
    p.add_argument("--p", type=float, default=0.8)
    p.add_argument("--log-slope", type=float, default=1.0)
    p.add_argument("--alpha", type=float, default=0.01)
    p.add_argument("--beta", type=float, default=0.01)
    p.add_argument("--b", type=float, default=2.0, help="box bound; <= 0 means unbounded")
    p.add_argument("--zmax", type=float, default=0.05)
    p.add_argument("--umax", type=float, default=-1.0, help="u range; <= 0 picks automatically")
    p.add_argument("--num-z", type=int, default=161)
    p.add_argument("--num-u", type=int, default=161)
    p.add_argument("--out", default="runs/gmap")
    p.add_argument("--no-plots", action="store_true")
    p.set_defaults(func=cmd_gmap_curve)

    p = sub.add_parser("fd-check", help="finite-difference gradient verification")
    p.add_argument("--problem", choices=["linear", "semilinear"], default="linear")
    p.add_argument("--n", type=int, default=40)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--ndirs", type=int, default=5)
    p.set_defaults(func=cmd_fd_check)

    p = sub.add_parser("mms-check", help="manufactured-solution convergence order")
    p.add_argument("--problem", choices=["linear", "semilinear"], default="linear")
    p.add_argument("--ns", type=_parse_int_list, default=[32, 64, 128])
    p.set_defaults(func=cmd_mms_check)

    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except (ParameterError, FileNotFoundError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
