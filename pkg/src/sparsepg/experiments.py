"""Benchmark presets, experiment driver and table sweeps.

The three reference problems share the tracking target on the unit square;
all presets weight the misfit by 1/2, i.e. they minimize

    J(u) = 1/2 ||y_u - y_d||^2 + (alpha/2) ||u||^2 + beta * int g(u) dx,

which is the objective the benchmark tables were produced with.  Every
command writes machine CSVs plus an aligned text table, and renders the
matching figures unless plotting is disabled; re-running a command with the
same configuration and seed produces bit-identical delimited output.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np

from .diagnostics import certify, gmap_sample, write_gmap_csv
from .errors import ParameterError
from .mesh import (
    build_mesh,
    export_control_csv,
    export_state_csv,
    interpolate_nodes,
    penalty_integral,
    support_measure,
)
from .pde import ReducedProblem, manufactured_convergence
from .penalties import PenaltySpec, check_strong_conv_condition, prox_array, prox_scalar
from .solver import PGResult, SolverConfig, run, write_history_csv

Y_D_FUNCTIONS = {
    "example1": lambda x1, x2: 10.0 * x1 * np.sin(5.0 * x1) * np.cos(7.0 * x2),
    "example2": lambda x1, x2: 4.0 * np.sin(2.0 * np.pi * x1) * np.sin(np.pi * x2) * np.exp(x1),
    "zero": lambda x1, x2: np.zeros_like(x1),
}

PROBLEM_KINDS = ("linear", "semilinear", "integer")


@dataclass
class ExperimentConfig:
    """One solver experiment: problem data, discretization and solver knobs."""

    problem: str = "linear"
    n: int = 160
    alpha: float = 0.01
    beta: float = 0.01
    p: float = 0.5
    log_slope: float = 1.0
    kind: str = "lp"
    b: float = 4.0
    mode: str = "backtracking"
    L0: float = 1e-4
    theta: float = 0.5
    eta: float = 1e-4
    stop_tol: float = 1e-12
    step_tol: float = math.nan  # nan = disabled (kept float for config files)
    f_weight: float = 0.5
    max_iter: int = 5000
    min_iter: int = 1
    warm_start: bool = False
    y_d: str = "example1"
    solver: str = "lu"
    seed: int = 0
    plots: bool = True

    def __post_init__(self):
        if self.problem not in PROBLEM_KINDS:
            raise ParameterError(f"problem must be one of {PROBLEM_KINDS}, got {self.problem!r}")
        if self.y_d not in Y_D_FUNCTIONS:
            raise ParameterError(
                f"unknown target id {self.y_d!r}, expected one of {tuple(Y_D_FUNCTIONS)}")

    def penalty(self) -> PenaltySpec:
        kind = "integer" if self.problem == "integer" else self.kind
        return PenaltySpec(kind=kind, p=self.p, log_slope=self.log_slope,
                           box_bound=self.b, alpha=self.alpha, beta=self.beta)

    def solver_config(self) -> SolverConfig:
        step_tol = None if math.isnan(self.step_tol) else self.step_tol
        return SolverConfig(pen=self.penalty(), mode=self.mode, L0=self.L0,
                            theta=self.theta, eta=self.eta, stop_tol=self.stop_tol,
                            step_tol=step_tol, f_weight=self.f_weight,
                            max_iter=self.max_iter, min_iter=self.min_iter,
                            warm_start=self.warm_start)


PRESETS = {
    "example1": ExperimentConfig(),
    "example2": ExperimentConfig(problem="semilinear", alpha=0.002, beta=0.03,
                                 b=12.0, L0=1e-3, y_d="example2"),
    "example3": ExperimentConfig(problem="integer", b=2.0, L0=1e-3),
    "table5": ExperimentConfig(alpha=0.001, p=0.9, L0=5e-3, b=6.0),
    "smoke": ExperimentConfig(n=8, max_iter=200),
}


def get_preset(name: str) -> ExperimentConfig:
    try:
        return replace(PRESETS[name])
    except KeyError:
        raise ParameterError(f"unknown preset {name!r}, expected one of {tuple(PRESETS)}") from None


def build_problem(cfg: ExperimentConfig):
    mesh = build_mesh(cfg.n)
    y_d = interpolate_nodes(mesh, Y_D_FUNCTIONS[cfg.y_d])
    equation = "semilinear" if cfg.problem == "semilinear" else "linear"
    return mesh, ReducedProblem(mesh, y_d, equation=equation, solver=cfg.solver)


def summarize(mesh, prob, cfg: ExperimentConfig, result: PGResult) -> dict:
    pen = cfg.penalty()
    last = result.history[-1]
    n_p = penalty_integral(mesh, result.u, pen)
    report = certify(prob, result.u, last.L if math.isfinite(last.L) else cfg.L0,
                     pen, f_weight=cfg.f_weight)
    summary = {
        "J": last.J,
        "f": last.f,
        "N_p": n_p,
        "support_measure": support_measure(mesh, result.u),
        "iterations": result.iterations,
        "converged": result.converged,
        "state_solves": result.state_solves,
        "adjoint_solves": result.adjoint_solves,
        "pde_solves": result.state_solves + result.adjoint_solves,
        "l_stat_residual": report.l_stat_residual,
        "pmp_residual": report.pmp_residual,
        "pmp_violation_measure": report.pmp_violation_measure,
        "L_final": report.L,
        "h": mesh.h,
        "n": cfg.n,
    }
    if pen.kind == "lp":
        summary["strong_convexity_condition"] = check_strong_conv_condition(
            cfg.L0, cfg.alpha, cfg.p)
    return summary


def run_experiment(cfg: ExperimentConfig, out_dir) -> dict:
    """Solve one preset/config and write history, fields, report and figures."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    mesh, prob = build_problem(cfg)
    result = run(prob, cfg.solver_config())
    summary = summarize(mesh, prob, cfg, result)

    write_history_csv(result.history, out / "history.csv")
    export_control_csv(mesh, result.u, out / "control.csv")
    export_state_csv(mesh, prob.solve_state(result.u), out / "state.csv")
    with open(out / "summary.json", "w") as fh:
        json.dump({"config": asdict(cfg), "summary": summary}, fh, indent=2, sort_keys=True)
    if cfg.plots:
        from . import plots
        plots.plot_control(mesh, result.u, out / "control.png")
        plots.plot_history(result.history, out / "convergence.png")
        if any(math.isfinite(r.omega_measure) for r in result.history):
            plots.plot_omega(result.history, out / "omega.png")
    return summary


def _write_table(rows, header, out_dir, stem) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / f"{stem}.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, float) else v for v in row])
    widths = [max(len(str(header[i])), *(len(f"{r[i]:.6g}" if isinstance(r[i], float) else str(r[i]))
                                         for r in rows)) for i in range(len(header))]
    lines = ["  ".join(str(h).rjust(widths[i]) for i, h in enumerate(header))]
    for r in rows:
        lines.append("  ".join(
            (f"{v:.6g}" if isinstance(v, float) else str(v)).rjust(widths[i])
            for i, v in enumerate(r)))
    (out / f"{stem}.txt").write_text("\n".join(lines) + "\n")


def table_mesh_sweep(ns=(20, 40, 80, 160, 320, 640), base: ExperimentConfig | None = None,
                     out_dir="runs/table_mesh", plots=True):
    """Mesh refinement sweep of the reference problem at p = 0.5."""
    base = base or get_preset("example1")
    rows, results = [], {}
    for n in ns:
        cfg = replace(base, n=n, plots=False)
        mesh, prob = build_problem(cfg)
        result = run(prob, cfg.solver_config())
        n_p = penalty_integral(mesh, result.u, cfg.penalty())
        rows.append([n, mesh.h, result.J, n_p, result.state_solves + result.adjoint_solves,
                     result.iterations])
        results[n] = result
    _write_table(rows, ["n", "h", "J", "N_p", "pde_solves", "iterations"], out_dir, "table_mesh")
    if plots:
        from . import plots as plotting
        plotting.plot_table([r[1] for r in rows], [r[2] for r in rows], "h", "J",
                            Path(out_dir) / "table_mesh.png", logx=True)
    return rows, results


def table_p_sweep(ps=(0.5, 0.3, 0.1, 0.01, 0.001), n=500, base: ExperimentConfig | None = None,
                  out_dir="runs/table_p", plots=True):
    """Decreasing penalty exponents at a fixed fine mesh."""
    base = base or get_preset("example1")
    rows, results = [], {}
    cfg0 = replace(base, n=n, plots=False)
    mesh, prob = build_problem(cfg0)
    for p in ps:
        cfg = replace(cfg0, p=p)
        result = run(prob, cfg.solver_config())
        n_p = penalty_integral(mesh, result.u, cfg.penalty())
        rows.append([p, result.J, n_p, result.state_solves + result.adjoint_solves,
                     result.iterations])
        results[p] = result
    _write_table(rows, ["p", "J", "N_p", "pde_solves", "iterations"], out_dir, "table_p")
    if plots:
        from . import plots as plotting
        plotting.plot_table([r[0] for r in rows], [r[2] for r in rows], "p", "N_p",
                            Path(out_dir) / "table_p.png", logx=True)
    return rows, results


def table_bad_params(ns=(160,), base: ExperimentConfig | None = None,
                     out_dir="runs/table_bad", plots=True):
    """Sweep of the slow regime L0 > (2/p - 1) alpha, with the multivalued-band
    measure recorded along the iterations."""
    base = base or get_preset("table5")
    out = Path(out_dir)
    rows, results = [], {}
    for n in ns:
        cfg = replace(base, n=n, plots=False)
        mesh, prob = build_problem(cfg)
        result = run(prob, cfg.solver_config())
        n_p = penalty_integral(mesh, result.u, cfg.penalty())
        rows.append([n, mesh.h, result.J, n_p, result.state_solves + result.adjoint_solves,
                     result.iterations])
        results[n] = result
        out.mkdir(parents=True, exist_ok=True)
        with open(out / f"omega_series_{n}.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["k", "omega_measure"])
            for r in result.history:
                if r.k >= 1:
                    w.writerow([r.k, repr(r.omega_measure)])
        if plots:
            from . import plots as plotting
            plotting.plot_omega(result.history, out / f"omega_{n}.png")
    _write_table(rows, ["n", "h", "J", "N_p", "pde_solves", "iterations"], out_dir, "table_bad")
    return rows, results


def prox_curve(pen: PenaltySpec, s: float, q_max: float = 3.0, num: int = 1201,
               out_dir="runs/prox_curve", plots=True):
    """Sample the scalar prox over an exactly mirrored range of inputs."""
    half = np.linspace(0.0, q_max, num // 2 + 1)
    qs = np.concatenate([-half[:0:-1], half])
    vals = prox_array(qs, s, pen)
    ties = np.array([prox_scalar(float(q), s, pen).tie for q in qs])
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "prox_curve.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["q", "value", "tie"])
        for q, v, t in zip(qs, vals, ties):
            w.writerow([repr(float(q)), repr(float(v)), int(t)])
    if plots:
        from . import plots as plotting
        plotting.plot_prox_curve(qs, vals, out / "prox_curve.png",
                                 title=f"prox of {pen.kind} penalty, s={s:g}")
    return qs, vals, ties


def gmap_curve(L: float, pen: PenaltySpec, z_max: float = 0.05, num_z: int = 201,
               u_max: float | None = None, num_u: int = 201,
               out_dir="runs/gmap", plots=True):
    """Point cloud of the set-valued stationarity map on a (z, u) grid."""
    if u_max is None:
        u_max = pen.box_bound * 1.1 if math.isfinite(pen.box_bound) else 3.0
    zs = np.linspace(-z_max, z_max, num_z)
    us = np.linspace(-u_max, u_max, num_u)
    members, tol = gmap_sample(L, pen, zs, us)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_gmap_csv(members, out / "gmap.csv")
    if plots:
        from . import plots as plotting
        plotting.plot_gmap(members, out / "gmap.png",
                           title=f"stationarity map, L={L:g}, {pen.kind}, tol={tol:.2g}")
    return members


def fd_check(problem: str = "linear", n: int = 40, seed: int = 0, ndirs: int = 5,
             t: float = 1e-4):
    """Central finite differences against the adjoint gradient.

    Returns the per-direction relative errors at a deterministic random
    control and random unit directions.
    """
    cfg = ExperimentConfig(problem="semilinear" if problem == "semilinear" else "linear",
                           n=n, plots=False)
    mesh, prob = build_problem(cfg)
    rng = np.random.default_rng(seed)
    u = rng.uniform(-2.0, 2.0, mesh.num_tris)
    grad = prob.gradient(u)
    errors = []
    for _ in range(ndirs):
        d = rng.standard_normal(mesh.num_tris)
        d /= math.sqrt(mesh.area * float(d @ d))
        fd = (prob.value(u + t * d) - prob.value(u - t * d)) / (2.0 * t)
        an = mesh.area * float(grad @ d)
        errors.append(abs(fd - an) / max(abs(fd), 1e-30))
    return errors


def mms_check(problem: str = "linear", ns=(32, 64, 128), solver: str = "lu"):
    equation = "semilinear" if problem == "semilinear" else "linear"
    return manufactured_convergence(ns, equation, solver)


def parse_config_file(path) -> dict:
    """Flat key = value file; '#' starts a comment."""
    values = {}
    known = {f.name: f.type for f in fields(ExperimentConfig)}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ParameterError(f"{path}:{lineno}: expected 'key = value', got {raw.strip()!r}")
            key, _, val = line.partition("=")
            key, val = key.strip(), val.strip()
            if key not in known:
                raise ParameterError(f"{path}:{lineno}: unknown option {key!r}")
            values[key] = val
    return values


def coerce_config(base: ExperimentConfig, overrides: dict) -> ExperimentConfig:
    """Apply string overrides to a config, converting to the field types."""
    casts = {}
    for f in fields(ExperimentConfig):
        casts[f.name] = type(getattr(base, f.name))
    converted = {}
    for key, val in overrides.items():
        if key not in casts:
            raise ParameterError(f"unknown option {key!r}")
        typ = casts[key]
        try:
            if typ is bool:
                converted[key] = val if isinstance(val, bool) else val.lower() in ("1", "true", "yes")
            else:
                converted[key] = typ(val)
        except ValueError as exc:
            raise ParameterError(f"option {key!r}: cannot parse {val!r} as {typ.__name__}") from exc
    return replace(base, **converted)
