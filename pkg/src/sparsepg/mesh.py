"""Structured triangulation of the unit square and field utilities.

Controls are piecewise constant on triangles (one value per triangle) and
states are piecewise linear on nodes with zero boundary trace; both are plain
float arrays.  The triangulation splits each of the n x n squares along the
diagonal from its lower-left to its upper-right corner, so all triangles are
congruent with area ``1/(2 n^2)`` and longest edge ``sqrt(2)/n``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError
from .penalties import PenaltySpec


@dataclass(frozen=True, eq=False)
class Mesh:
    n: int
    nodes: np.ndarray        # (num_nodes, 2) coordinates
    triangles: np.ndarray    # (num_tris, 3) node indices, counterclockwise
    boundary: np.ndarray     # bool mask over nodes
    interior: np.ndarray     # indices of interior nodes
    centroids: np.ndarray = field(repr=False, default=None)

    @property
    def num_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def num_tris(self) -> int:
        return self.triangles.shape[0]

    @property
    def area(self) -> float:
        """Area of each triangle (all congruent)."""
        return 1.0 / (2.0 * self.n * self.n)

    @property
    def h(self) -> float:
        """Longest edge length."""
        return math.sqrt(2.0) / self.n


def build_mesh(n: int) -> Mesh:
    """Friedrichs-Keller triangulation of (0,1)^2 with n cells per side."""
    if n < 2:
        raise ParameterError(f"mesh needs n >= 2 cells per side, got {n}")
    side = np.linspace(0.0, 1.0, n + 1)
    xx, yy = np.meshgrid(side, side)  # row-major: node = iy * (n+1) + ix
    nodes = np.column_stack([xx.ravel(), yy.ravel()])

    ix, iy = np.meshgrid(np.arange(n), np.arange(n))
    ll = (iy * (n + 1) + ix).ravel()
    lr = ll + 1
    ul = ll + (n + 1)
    ur = ul + 1
    lower = np.column_stack([ll, lr, ur])
    upper = np.column_stack([ll, ur, ul])
    triangles = np.vstack([lower, upper]).astype(np.int64)

    gx, gy = np.meshgrid(np.arange(n + 1), np.arange(n + 1))
    boundary = ((gx == 0) | (gx == n) | (gy == 0) | (gy == n)).ravel()
    interior = np.flatnonzero(~boundary)

    centroids = nodes[triangles].mean(axis=1)
    return Mesh(n=n, nodes=nodes, triangles=triangles, boundary=boundary,
                interior=interior, centroids=centroids)


def _check_control(mesh: Mesh, u: np.ndarray) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.shape != (mesh.num_tris,):
        raise ParameterError(
            f"control field has shape {u.shape}, mesh expects ({mesh.num_tris},)")
    return u


def control_l2_sq(mesh: Mesh, u: np.ndarray) -> float:
    """Squared L2 norm of a piecewise-constant field."""
    u = _check_control(mesh, u)
    return mesh.area * float(u @ u)


def control_l1(mesh: Mesh, u: np.ndarray) -> float:
    u = _check_control(mesh, u)
    return mesh.area * float(np.sum(np.abs(u)))


def penalty_integral(mesh: Mesh, u: np.ndarray, pen: PenaltySpec) -> float:
    """Integral of the unweighted penalty g(u(x)) over the domain.

    For the integer penalty the result is 0 exactly when every cell value is
    integral and ``inf`` otherwise (a sentinel, not a float overflow).
    """
    u = _check_control(mesh, u)
    if pen.kind == "integer":
        return 0.0 if bool(np.all(u == np.rint(u))) else math.inf
    if pen.kind == "l0":
        return mesh.area * float(np.count_nonzero(u))
    if pen.kind == "lp":
        return mesh.area * float(np.sum(np.abs(u) ** pen.p))
    return mesh.area * float(np.sum(np.log1p(pen.log_slope * np.abs(u))))


def support_measure(mesh: Mesh, u: np.ndarray) -> float:
    """Measure of the set where the control is nonzero (exact zeros)."""
    u = _check_control(mesh, u)
    return mesh.area * float(np.count_nonzero(u))


def support_change(mesh: Mesh, u1: np.ndarray, u2: np.ndarray) -> float:
    """Measure of the symmetric difference of the two supports."""
    u1 = _check_control(mesh, u1)
    u2 = _check_control(mesh, u2)
    return mesh.area * float(np.count_nonzero((u1 != 0.0) != (u2 != 0.0)))


def interpolate_nodes(mesh: Mesh, fn) -> np.ndarray:
    """Nodal interpolation of a callable fn(x1, x2)."""
    return np.asarray(fn(mesh.nodes[:, 0], mesh.nodes[:, 1]), dtype=float)


def cell_values(mesh: Mesh, fn) -> np.ndarray:
    """Piecewise-constant field from centroid values of fn(x1, x2)."""
    return np.asarray(fn(mesh.centroids[:, 0], mesh.centroids[:, 1]), dtype=float)


def export_control_csv(mesh: Mesh, u: np.ndarray, path) -> None:
    """CSV columns (triangle_index, centroid_x, centroid_y, value)."""
    u = _check_control(mesh, u)
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["triangle_index", "centroid_x", "centroid_y", "value"])
        for t in range(mesh.num_tris):
            w.writerow([t, repr(float(mesh.centroids[t, 0])), repr(float(mesh.centroids[t, 1])),
                        repr(float(u[t]))])


def export_state_csv(mesh: Mesh, y: np.ndarray, path) -> None:
    """CSV columns (node_x, node_y, value)."""
    y = np.asarray(y, dtype=float)
    if y.shape != (mesh.num_nodes,):
        raise ParameterError(
            f"state field has shape {y.shape}, mesh expects ({mesh.num_nodes},)")
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["node_x", "node_y", "value"])
        for i in range(mesh.num_nodes):
            w.writerow([repr(float(mesh.nodes[i, 0])), repr(float(mesh.nodes[i, 1])),
                        repr(float(y[i]))])
