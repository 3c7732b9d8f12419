"""Post-hoc certification of computed controls.

Three independent certificates:

* the pointwise-minimum (Pontryagin) residual: how far each cell value is
  from globally minimizing its Hamiltonian
  ``H(v) = w * grad f(u)(x) * v + (alpha/2) v^2 + beta g(v)``,
* the fixed-point residual of the proximal step at a given L,
* grid samples of the set-valued stationarity map: ``u`` belongs to the map
  at ``z`` when ``u`` minimizes ``-z v + (L/2)(v - u)^2 + (alpha/2) v^2 +
  beta g(v)``; membership is certified against a dense scan of that
  objective rather than any closed-form branch formula, so it applies to
  every supported penalty uniformly.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .penalties import PenaltySpec, brute_force_prox, prox_array
from .solver import pg_step


@dataclass(frozen=True)
class StationarityReport:
    pmp_residual: float
    pmp_violation_measure: float
    l_stat_residual: float
    L: float


def _hamiltonian(grad, v, pen: PenaltySpec):
    return grad * v + 0.5 * pen.alpha * v * v + pen.beta * pen.g(v)


def pmp_residual(prob, u, pen: PenaltySpec, f_weight: float = 1.0,
                 violation_tol: float = 1e-8, grad=None):
    """Integrated positive part of the cellwise Hamiltonian gap.

    Returns ``(residual, violation_measure)``; the measure counts cells whose
    gap exceeds ``violation_tol``.  The cell Hamiltonians are minimized
    exactly through the scalar prox at L = 0, which requires alpha > 0.
    """
    if pen.alpha <= 0.0:
        raise ParameterError("the Hamiltonian check needs alpha > 0")
    u = np.asarray(u, dtype=float)
    if grad is None:
        grad = f_weight * prob.gradient(u)
    v_best = prox_array(-grad / pen.alpha, pen.beta / pen.alpha, pen)
    gap = _hamiltonian(grad, u, pen) - _hamiltonian(grad, v_best, pen)
    gap = np.where(np.isfinite(gap), gap, math.inf)
    area = prob.mesh.area
    residual = area * float(np.sum(np.maximum(gap, 0.0)))
    violation = area * float(np.count_nonzero(gap > violation_tol))
    return residual, violation


def l_stationarity_residual(prob, u, L: float, pen: PenaltySpec,
                            f_weight: float = 1.0, grad=None) -> float:
    """L2 distance between u and the proximal step taken at u."""
    u = np.asarray(u, dtype=float)
    if grad is None:
        grad = f_weight * prob.gradient(u)
    v = pg_step(u, grad, L, pen)
    return math.sqrt(prob.mesh.area * float(np.sum((u - v) ** 2)))


def certify(prob, u, L: float, pen: PenaltySpec, f_weight: float = 1.0,
            violation_tol: float = 1e-8) -> StationarityReport:
    """Full stationarity report from a single gradient evaluation."""
    grad = f_weight * prob.gradient(np.asarray(u, dtype=float))
    res, viol = pmp_residual(prob, u, pen, f_weight, violation_tol, grad=grad)
    lres = l_stationarity_residual(prob, u, L, pen, f_weight, grad=grad)
    return StationarityReport(pmp_residual=res, pmp_violation_measure=viol,
                              l_stat_residual=lres, L=L)


def gmap_sample(L: float, pen: PenaltySpec, z_values, u_values,
                member_tol: float | None = None):
    """Sample the stationarity map on a (z, u) grid.

    For every grid pair the candidate objective at ``v = u`` is compared
    against its dense-scan global minimum; pairs whose gap is at most
    ``member_tol`` are members.  When ``member_tol`` is ``None`` it defaults
    to the objective increment of a one-grid-spacing perturbation,
    ``(L + alpha) * du^2``, so a grid point is emitted whenever a true member
    lies within one u-spacing of it.  Returns ``(members, member_tol)`` with
    members a list of ``(z, u, branch)``, branch in ``{"+", "-", "0"}``.
    """
    if L <= 0.0:
        raise ParameterError(f"L must be positive, got {L}")
    denom = L + pen.alpha
    s = pen.beta / denom
    if s <= 0.0:
        raise ParameterError("gmap sampling needs beta > 0")
    u_values = np.asarray(u_values, dtype=float)
    if member_tol is None:
        du = float(np.max(np.diff(np.sort(u_values)))) if u_values.size > 1 else 0.0
        member_tol = denom * du * du
    b = pen.box_bound
    members = []
    for z in np.asarray(z_values, dtype=float):
        for u in u_values:
            if abs(u) > b:
                continue
            gu = float(pen.g(u))
            if not math.isfinite(gu):
                continue
            q = (z + L * u) / denom
            v = brute_force_prox(q, s, pen)
            gv = float(pen.g(v))
            h_u = -q * u + 0.5 * u * u + s * gu
            h_v = -q * v + 0.5 * v * v + s * gv
            if denom * (h_u - h_v) <= member_tol:
                branch = "0" if u == 0.0 else ("+" if u > 0.0 else "-")
                members.append((float(z), float(u), branch))
    return members, member_tol


def write_gmap_csv(members, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["z", "u", "branch"])
        for z, u, branch in members:
            w.writerow([repr(z), repr(u), branch])
