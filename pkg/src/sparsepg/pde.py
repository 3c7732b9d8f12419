"""Finite element state/adjoint solves and the reduced tracking objective.

The state equation is the Poisson problem ``-lap y = u`` (or its semilinear
variant ``-lap y + y^3 = u``) with homogeneous Dirichlet data, discretized
with piecewise linear elements on the Friedrichs-Keller mesh; controls enter
as piecewise constants.  The reduced objective is the unhalved tracking
functional ``f(u) = ||y_u - y_d||^2``, so its gradient carries a factor 2 and
is represented as a piecewise-constant field (the cellwise mean of the
adjoint state).

A :class:`ReducedProblem` is immutable after assembly apart from its solve
counters; repeated solves share the cached stiffness factorization.
"""

from __future__ import annotations

import math

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import NumericError, ParameterError
from .mesh import Mesh, cell_values

EQUATION_KINDS = ("linear", "semilinear")

# degree-4 quadrature on the reference triangle: barycentric points and
# weights normalized so that  int_T f  ~=  area * sum_q w_q f(x_q)
_QA = 0.445948490915965
_QB = 0.091576213509771
_QUAD_LAMBDA = np.array(
    [
        [_QA, _QA, 1.0 - 2.0 * _QA],
        [_QA, 1.0 - 2.0 * _QA, _QA],
        [1.0 - 2.0 * _QA, _QA, _QA],
        [_QB, _QB, 1.0 - 2.0 * _QB],
        [_QB, 1.0 - 2.0 * _QB, _QB],
        [1.0 - 2.0 * _QB, _QB, _QB],
    ]
)
_QUAD_W = np.array([0.223381589678011] * 3 + [0.109951743655322] * 3)


def _assemble(mesh: Mesh):
    """Stiffness, consistent mass and piecewise-constant load matrices."""
    tris = mesh.triangles
    pts = mesh.nodes[tris]  # (M, 3, 2)
    x = pts[:, :, 0]
    y = pts[:, :, 1]
    bvec = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1)
    cvec = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1)
    area = mesh.area
    ke = (bvec[:, :, None] * bvec[:, None, :] + cvec[:, :, None] * cvec[:, None, :]) / (4.0 * area)
    me = area / 12.0 * (np.ones((3, 3)) + np.eye(3))
    me = np.broadcast_to(me, ke.shape)

    rows = np.repeat(tris, 3, axis=1).ravel()
    cols = np.tile(tris, (1, 3)).ravel()
    n = mesh.num_nodes
    K = sp.coo_matrix((ke.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    M = sp.coo_matrix((me.ravel(), (rows, cols)), shape=(n, n)).tocsr()

    m = mesh.num_tris
    B = sp.coo_matrix(
        (np.full(3 * m, area / 3.0), (tris.ravel(), np.repeat(np.arange(m), 3))),
        shape=(n, m),
    ).tocsr()
    return K, M, B


class ReducedProblem:
    """Reduced tracking problem f(u) = ||S u - y_d||^2 on a fixed mesh.

    Parameters
    ----------
    mesh : Mesh
    y_d : nodal target values, shape (num_nodes,)
    equation : "linear" or "semilinear" (d(y) = y^3)
    solver : "lu" (cached sparse factorization) or "cg" (diagonally
        preconditioned conjugate gradient to relative residual cg_tol)
    """

    def __init__(self, mesh: Mesh, y_d, equation: str = "linear", solver: str = "lu",
                 cg_tol: float = 1e-10, cg_maxiter: int = 20000,
                 newton_tol: float = 1e-10, newton_max: int = 50):
        if equation not in EQUATION_KINDS:
            raise ParameterError(f"equation must be one of {EQUATION_KINDS}, got {equation!r}")
        if solver not in ("lu", "cg"):
            raise ParameterError(f"solver must be 'lu' or 'cg', got {solver!r}")
        y_d = np.asarray(y_d, dtype=float)
        if y_d.shape != (mesh.num_nodes,):
            raise ParameterError("y_d must be a nodal field on the given mesh")
        self.mesh = mesh
        self.equation = equation
        self.solver = solver
        self.cg_tol = cg_tol
        self.cg_maxiter = cg_maxiter
        self.newton_tol = newton_tol
        self.newton_max = newton_max
        self.y_d = y_d

        self.K, self.M, self.B = _assemble(mesh)
        idx = mesh.interior
        self.K_ii = self.K[idx][:, idx].tocsc()
        self._lu = spla.splu(self.K_ii) if solver == "lu" else None
        self.state_solves = 0
        self.adjoint_solves = 0

    # -- linear algebra helpers ------------------------------------------

    def _solve_spd(self, A, rhs, lu=None):
        if self.solver == "lu":
            if lu is None:
                lu = spla.splu(A.tocsc())
            return lu.solve(rhs)
        diag = A.diagonal()
        precond = spla.LinearOperator(A.shape, matvec=lambda v: v / diag)
        sol, info = spla.cg(A, rhs, rtol=self.cg_tol, atol=0.0, maxiter=self.cg_maxiter, M=precond)
        if info != 0:
            raise NumericError(f"CG failed to reach relative residual {self.cg_tol} (info={info})")
        return sol

    def _solve_stiffness(self, rhs):
        return self._solve_spd(self.K_ii, rhs, lu=self._lu)

    def _full(self, interior_vals):
        y = np.zeros(self.mesh.num_nodes)
        y[self.mesh.interior] = interior_vals
        return y

    # -- semilinear terms -------------------------------------------------

    def _cubic_term(self, y):
        """Nodal vector of int y_h^3 phi_i dx (degree-4 quadrature)."""
        tris = self.mesh.triangles
        yq = y[tris] @ _QUAD_LAMBDA.T  # (M, 6)
        local = self.mesh.area * ((yq**3 * _QUAD_W) @ _QUAD_LAMBDA)  # (M, 3)
        return np.bincount(tris.ravel(), weights=local.ravel(), minlength=self.mesh.num_nodes)

    def _cubic_jacobian(self, y):
        """Matrix of int 3 y_h^2 phi_i phi_j dx."""
        tris = self.mesh.triangles
        yq = y[tris] @ _QUAD_LAMBDA.T
        coef = 3.0 * self.mesh.area * (yq**2 * _QUAD_W)  # (M, 6)
        ke = np.einsum("mq,qi,qj->mij", coef, _QUAD_LAMBDA, _QUAD_LAMBDA)
        rows = np.repeat(tris, 3, axis=1).ravel()
        cols = np.tile(tris, (1, 3)).ravel()
        n = self.mesh.num_nodes
        return sp.coo_matrix((ke.ravel(), (rows, cols)), shape=(n, n)).tocsr()

    # -- state / adjoint ---------------------------------------------------

    def solve_state(self, u) -> np.ndarray:
        """Nodal state for a piecewise-constant control."""
        u = np.asarray(u, dtype=float)
        if not np.all(np.isfinite(u)):
            raise ParameterError("control field contains non-finite entries")
        rhs = (self.B @ u)[self.mesh.interior]
        self.state_solves += 1
        if self.equation == "linear":
            return self._full(self._solve_stiffness(rhs))
        return self._newton_state(rhs)

    def _newton_state(self, rhs):
        idx = self.mesh.interior
        yi = self._solve_stiffness(rhs)  # linear problem as initial guess

        def residual(yi_vals):
            y_full = self._full(yi_vals)
            return self.K_ii @ yi_vals + self._cubic_term(y_full)[idx] - rhs

        F = residual(yi)
        for _ in range(self.newton_max):
            nF = float(np.linalg.norm(F))
            if nF <= self.newton_tol:
                return self._full(yi)
            C = self._cubic_jacobian(self._full(yi))
            A = (self.K_ii + C[idx][:, idx]).tocsc()
            d = self._solve_spd(A, -F)
            t = 1.0
            for _ in range(30):
                F_new = residual(yi + t * d)
                if float(np.linalg.norm(F_new)) < nF:
                    break
                t *= 0.5
            yi = yi + t * d
            F = F_new
        if float(np.linalg.norm(F)) <= self.newton_tol:
            return self._full(yi)
        raise NumericError(f"Newton did not reach residual {self.newton_tol} in {self.newton_max} steps")

    def solve_adjoint(self, y, y_d=None) -> np.ndarray:
        """Adjoint state for the tracking misfit 2 (y - y_d)."""
        y = np.asarray(y, dtype=float)
        target = self.y_d if y_d is None else np.asarray(y_d, dtype=float)
        idx = self.mesh.interior
        rhs = (2.0 * (self.M @ (y - target)))[idx]
        self.adjoint_solves += 1
        if self.equation == "linear":
            return self._full(self._solve_stiffness(rhs))
        C = self._cubic_jacobian(y)
        A = (self.K_ii + C[idx][:, idx]).tocsc()
        return self._full(self._solve_spd(A, rhs))

    # -- reduced objective -------------------------------------------------

    def tracking_value(self, y) -> float:
        e = np.asarray(y, dtype=float) - self.y_d
        return float(e @ (self.M @ e))

    def value(self, u) -> float:
        return self.tracking_value(self.solve_state(u))

    def cell_mean(self, nodal) -> np.ndarray:
        """Mean of a piecewise-linear field over each triangle."""
        return np.asarray(nodal, dtype=float)[self.mesh.triangles].mean(axis=1)

    def gradient_from_state(self, y) -> np.ndarray:
        return self.cell_mean(self.solve_adjoint(y))

    def gradient(self, u) -> np.ndarray:
        """Gradient of f as a piecewise-constant field."""
        return self.gradient_from_state(self.solve_state(u))


# -- module-level operation surface ---------------------------------------


def solve_state(prob: ReducedProblem, u) -> np.ndarray:
    return prob.solve_state(u)


def solve_adjoint(prob: ReducedProblem, y, y_d=None) -> np.ndarray:
    return prob.solve_adjoint(y, y_d)


def reduced_value(prob: ReducedProblem, u) -> float:
    return prob.value(u)


def reduced_gradient(prob: ReducedProblem, u) -> np.ndarray:
    return prob.gradient(u)


def lipschitz_estimate(prob: ReducedProblem, tol: float = 1e-6, max_iter: int = 500) -> float:
    """Upper estimate of the Lipschitz constant of the reduced gradient.

    Power iteration on the (self-adjoint, positive) linear part of
    u -> grad f(u) in the control space L2 inner product.  Only available for
    the linear state equation.
    """
    if prob.equation != "linear":
        raise ParameterError("lipschitz_estimate supports only the linear state equation")
    mesh = prob.mesh
    g0 = prob.gradient(np.zeros(mesh.num_tris))
    v = np.ones(mesh.num_tris)
    v /= math.sqrt(mesh.area * float(v @ v))
    lam = 0.0
    for _ in range(max_iter):
        w = prob.gradient(v) - g0
        lam_new = mesh.area * float(v @ w)
        nw = math.sqrt(mesh.area * float(w @ w))
        if nw == 0.0:
            return 0.0
        v = w / nw
        if abs(lam_new - lam) <= tol * max(1.0, abs(lam_new)):
            return lam_new
        lam = lam_new
    return lam


# -- manufactured-solution verification ------------------------------------


def _exact_solution(x1, x2):
    return np.sin(np.pi * x1) * np.sin(np.pi * x2)


def manufactured_problem(n: int, equation: str = "linear", solver: str = "lu"):
    """Problem and control whose discrete state converges to sin(pi x)sin(pi y)."""
    from .mesh import build_mesh, interpolate_nodes

    mesh = build_mesh(n)
    ystar = cell_values(mesh, _exact_solution)
    u = 2.0 * np.pi**2 * ystar
    if equation == "semilinear":
        u = u + ystar**3
    y_d = interpolate_nodes(mesh, lambda a, b: np.zeros_like(a))
    prob = ReducedProblem(mesh, y_d, equation=equation, solver=solver)
    return prob, u


def l2_error_vs_exact(mesh: Mesh, y) -> float:
    """L2 distance between a nodal field and the manufactured solution."""
    tris = mesh.triangles
    yq = np.asarray(y)[tris] @ _QUAD_LAMBDA.T  # (M, 6)
    xq = np.einsum("qi,mik->mqk", _QUAD_LAMBDA, mesh.nodes[tris])
    exact = _exact_solution(xq[:, :, 0], xq[:, :, 1])
    return math.sqrt(mesh.area * float(np.sum(_QUAD_W * (yq - exact) ** 2)))


def manufactured_convergence(ns, equation: str = "linear", solver: str = "lu"):
    """Errors and observed orders across a sequence of mesh sizes."""
    errors = []
    for n in ns:
        prob, u = manufactured_problem(n, equation, solver)
        errors.append(l2_error_vs_exact(prob.mesh, prob.solve_state(u)))
    rates = [
        math.log(errors[i] / errors[i + 1]) / math.log(ns[i + 1] / ns[i])
        for i in range(len(errors) - 1)
    ]
    return errors, rates
