"""Proximal gradient iteration with fixed or backtracked proximal parameter.

One outer iteration linearizes the tracking term at ``u_k`` and solves the
resulting subproblem exactly, cell by cell, through the scalar prox:

    u_{k+1,T} = prox_{s g}(q_T),   q_T = (L u_{k,T} - grad_T) / (L + alpha),
    s = beta / (L + alpha).

In backtracking mode each iteration restarts from L0 and accepts the first
L = L0 / theta^i whose trial step satisfies the decrease condition
``eta * ||u_{k+1} - u_k||^2 <= J(u_k) - J(u_{k+1})``; the iteration stops once
the objective decrease falls below ``stop_tol`` (and optionally once the step
norm falls below ``step_tol``, which is how runs are polished to machine-level
fixed points for stationarity certification).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericError, ParameterError
from .mesh import Mesh, control_l2_sq, penalty_integral, support_change, support_measure
from .penalties import PenaltySpec, compute_u0, compute_uI, prox_array


@dataclass
class SolverConfig:
    """Step-size policy, tolerances and stopping rule of the iteration.

    ``f_weight`` scales the tracking term inside the total objective
    J = f_weight * f + (alpha/2) ||u||^2 + beta * int g(u); the benchmark
    presets use 1/2, which is the weighting the reference results were
    produced with.  ``min_iter`` delays the stopping tests, which lets a run
    demonstrate a stable fixed point over several recorded iterations.
    """

    pen: PenaltySpec
    mode: str = "backtracking"  # "backtracking" | "fixed"
    L0: float = 1e-4            # initial (backtracking) or constant (fixed) L
    theta: float = 0.5
    eta: float = 1e-4
    stop_tol: float | None = 1e-12  # on the objective decrease; None disables
    step_tol: float | None = None   # optional extra stop on the step norm
    f_weight: float = 1.0
    max_iter: int = 5000
    min_iter: int = 1
    max_backtracks: int = 60
    warm_start: bool = False    # continue the L ladder from the last accepted L
    record_omega: bool = True

    def __post_init__(self):
        if self.mode not in ("backtracking", "fixed"):
            raise ParameterError(f"mode must be 'backtracking' or 'fixed', got {self.mode!r}")
        if not self.L0 > 0.0:
            raise ParameterError(f"L0 must be positive, got {self.L0}")
        if not 0.0 < self.theta < 1.0:
            raise ParameterError(f"theta must lie in (0, 1), got {self.theta}")
        if not self.eta > 0.0:
            raise ParameterError(f"eta must be positive, got {self.eta}")
        if self.stop_tol is None and self.step_tol is None:
            raise ParameterError("at least one of stop_tol and step_tol must be set")
        if self.stop_tol is not None and not self.stop_tol > 0.0:
            raise ParameterError(f"stop_tol must be positive, got {self.stop_tol}")
        if not self.f_weight > 0.0:
            raise ParameterError(f"f_weight must be positive, got {self.f_weight}")
        if self.max_iter < 1 or self.min_iter < 1:
            raise ParameterError("max_iter and min_iter must be at least 1")


@dataclass
class IterateRecord:
    """Per-iteration diagnostics; row k = 0 is the initial point."""

    k: int
    J: float
    f: float
    penalty: float
    step_norm: float
    L: float
    pde_solves: int
    support_measure: float
    support_change: float
    omega_measure: float
    backtracks: int
    gap_violations: int


@dataclass
class PGResult:
    u: np.ndarray
    history: list[IterateRecord]
    converged: bool
    state_solves: int
    adjoint_solves: int
    config: SolverConfig = field(repr=False, default=None)

    @property
    def iterations(self) -> int:
        """Number of accepted iterations (history rows minus the initial one)."""
        return self.history[-1].k

    @property
    def J(self) -> float:
        return self.history[-1].J


def pg_step(u, grad, L: float, pen: PenaltySpec) -> np.ndarray:
    """One exact proximal step over all cells.

    With ``beta = 0`` the subproblem is a box-projected quadratic step.
    """
    if L <= 0.0:
        raise ParameterError(f"proximal parameter L must be positive, got {L}")
    u = np.asarray(u, dtype=float)
    grad = np.asarray(grad, dtype=float)
    if u.shape != grad.shape:
        raise ParameterError("control and gradient live on different meshes")
    denom = L + pen.alpha
    q = (L * u - grad) / denom
    if pen.beta == 0.0:
        b = pen.box_bound
        return np.clip(q, -b, b) if math.isfinite(b) else q
    return prox_array(q, pen.beta / denom, pen)


def omega_threshold(pen: PenaltySpec) -> float:
    """Inflection bound u_I(beta/alpha) delimiting the multivalued band."""
    if pen.kind != "lp":
        raise ParameterError("the multivalued-band threshold is defined for the lp penalty only")
    if pen.alpha <= 0.0 or pen.beta <= 0.0:
        raise ParameterError("omega monitoring needs alpha > 0 and beta > 0")
    return compute_uI(pen.beta / pen.alpha, pen.p)


def omega_m_measure(mesh: Mesh, u, uI: float) -> float:
    """Measure of the cells with 0 < |u| < uI."""
    u = np.asarray(u, dtype=float)
    au = np.abs(u)
    return mesh.area * float(np.count_nonzero((au > 0.0) & (au < uI)))


def _gap_violations(u, s: float, pen: PenaltySpec) -> int:
    """Cells whose nonzero value falls below the sparsity gap u0(s) - 1e-10."""
    if pen.beta == 0.0:
        return 0
    u0 = compute_u0(s, pen)
    au = np.abs(np.asarray(u))
    return int(np.count_nonzero((au > 0.0) & (au < u0 - 1e-10)))


def run(prob, cfg: SolverConfig, u_init=None, iterate_callback=None) -> PGResult:
    """Run the proximal gradient iteration on a reduced problem.

    ``iterate_callback(k, u_k)`` is invoked for the initial point and for
    every accepted iterate; useful for recording/validating full fields.
    Returns the final accepted control with the per-iteration history; if
    ``max_iter`` is exhausted before the stopping rule fires, the result is
    flagged ``converged=False``.
    """
    mesh = prob.mesh
    pen = cfg.pen
    u = np.zeros(mesh.num_tris) if u_init is None else np.asarray(u_init, dtype=float).copy()

    uI = None
    if cfg.record_omega and pen.kind == "lp" and pen.alpha > 0.0 and pen.beta > 0.0:
        uI = omega_threshold(pen)

    state0 = prob.state_solves
    adjoint0 = prob.adjoint_solves

    def solves():
        return (prob.state_solves - state0) + (prob.adjoint_solves - adjoint0)

    def objective(u_vals, y_vals):
        f = prob.tracking_value(y_vals)
        pen_int = penalty_integral(mesh, u_vals, pen)
        J = cfg.f_weight * f + 0.5 * pen.alpha * control_l2_sq(mesh, u_vals) + pen.beta * pen_int
        return J, f, pen_int

    y = prob.solve_state(u)
    J, f, pen_int = objective(u, y)
    history = [IterateRecord(
        k=0, J=J, f=f, penalty=pen_int, step_norm=0.0, L=math.nan, pde_solves=solves(),
        support_measure=support_measure(mesh, u), support_change=0.0,
        omega_measure=omega_m_measure(mesh, u, uI) if uI is not None else math.nan,
        backtracks=0, gap_violations=0,
    )]
    if iterate_callback is not None:
        iterate_callback(0, u)

    converged = False
    L_base = cfg.L0
    for k in range(1, cfg.max_iter + 1):
        grad = cfg.f_weight * prob.gradient_from_state(y)
        if cfg.mode == "fixed":
            L = cfg.L0
            u_new = pg_step(u, grad, L, pen)
            y_new = prob.solve_state(u_new)
            J_new, f_new, pen_new = objective(u_new, y_new)
            if not math.isfinite(J_new):
                raise NumericError("fixed-L step produced a non-finite objective")
            step_sq = mesh.area * float(np.sum((u_new - u) ** 2))
            backtracks = 0
        else:
            accepted = False
            for i in range(cfg.max_backtracks + 1):
                L = L_base / cfg.theta**i
                u_new = pg_step(u, grad, L, pen)
                y_new = prob.solve_state(u_new)
                J_new, f_new, pen_new = objective(u_new, y_new)
                step_sq = mesh.area * float(np.sum((u_new - u) ** 2))
                if math.isfinite(J_new) and cfg.eta * step_sq <= J - J_new:
                    accepted = True
                    backtracks = i
                    break
            if not accepted:
                raise NumericError(
                    f"backtracking found no acceptable step within {cfg.max_backtracks} trials")
            if cfg.warm_start:
                L_base = L

        step_norm = math.sqrt(step_sq)
        J_prev = J
        u_prev = u
        u, y, J, f, pen_int = u_new, y_new, J_new, f_new, pen_new
        history.append(IterateRecord(
            k=k, J=J, f=f, penalty=pen_int, step_norm=step_norm, L=L, pde_solves=solves(),
            support_measure=support_measure(mesh, u),
            support_change=support_change(mesh, u_prev, u),
            omega_measure=omega_m_measure(mesh, u, uI) if uI is not None else math.nan,
            backtracks=backtracks,
            gap_violations=_gap_violations(u, pen.beta / (L + pen.alpha), pen),
        ))
        if iterate_callback is not None:
            iterate_callback(k, u)
        if k >= cfg.min_iter:
            if cfg.stop_tol is not None and abs(J_prev - J) <= cfg.stop_tol:
                converged = True
                break
            if cfg.step_tol is not None and step_norm <= cfg.step_tol:
                converged = True
                break

    return PGResult(u=u, history=history, converged=converged,
                    state_solves=prob.state_solves - state0,
                    adjoint_solves=prob.adjoint_solves - adjoint0, config=cfg)


def write_history_csv(history, path) -> None:
    """One row per recorded iterate, machine readable."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "J", "f", "penalty", "step_norm", "L_k", "pde_solves",
                    "support_measure", "support_change", "omega_m"])
        for r in history:
            w.writerow([r.k, repr(r.J), repr(r.f), repr(r.penalty), repr(r.step_norm),
                        repr(r.L), r.pde_solves, repr(r.support_measure),
                        repr(r.support_change), repr(r.omega_measure)])
