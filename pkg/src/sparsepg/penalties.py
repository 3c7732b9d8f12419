"""Scalar nonconvex penalties and their exact proximal maps.

Everything in this module revolves around the one-dimensional problem

    min_{|u| <= b}  h(u) := -q*u + u^2/2 + s*g(u),

whose solution set is the proximal map of ``s*g`` evaluated at ``q``.  The
supported penalties g are the counting penalty (``l0``), the power penalty
``|u|^p`` with 0 < p < 1 (``lp``), the logarithmic penalty ``log(1 + a|u|)``
(``log``) and the indicator of the integers (``integer``).  All of them are
symmetric, vanish at zero and are nonnegative, which yields two structural
constants per penalty and scale s:

* ``u0(s)``: nonzero minimizers never have magnitude below ``u0`` (the
  sparsity gap),
* ``q0(s)``: zero is a global minimizer exactly for ``|q| <= q0``.

Both are minima of ``phi(u) = u/2 + s*g(u)/u`` over the feasible range; they
are computed in closed form where available and numerically otherwise.

All functions are pure; arrays are never modified in place from the caller's
point of view, so concurrent use is safe.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import NumericError, ParameterError

KINDS = ("l0", "lp", "log", "integer")

# absolute tolerance on objective comparisons before a tie is declared
TIE_TOL = 1e-14

# absolute tolerance of the Newton/bisection root solves on the lp branch
ROOT_TOL = 1e-12


@dataclass(frozen=True)
class PenaltySpec:
    """Scalar penalty plus the weights it carries inside a control problem.

    ``alpha`` is the quadratic control-cost weight and ``beta`` the penalty
    weight; neither enters the penalty value itself.  ``beta = 0`` is allowed
    and means "no penalty" (the solver then performs plain box-projected
    quadratic steps).  ``box_bound`` is the half-width b of the admissible
    interval [-b, b]; ``math.inf`` disables the box.
    """

    kind: str
    p: float = 0.5
    log_slope: float = 1.0
    box_bound: float = math.inf
    alpha: float = 0.0
    beta: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterError(f"unknown penalty kind {self.kind!r}, expected one of {KINDS}")
        if self.kind == "lp" and not 0.0 < self.p < 1.0:
            raise ParameterError(f"lp penalty needs 0 < p < 1, got p={self.p}")
        if self.kind == "log" and not self.log_slope > 0.0:
            raise ParameterError(f"log penalty needs a positive slope, got {self.log_slope}")
        if not self.box_bound > 0.0:
            raise ParameterError(f"box bound must be positive, got {self.box_bound}")
        if self.alpha < 0.0:
            raise ParameterError(f"alpha must be nonnegative, got {self.alpha}")
        if self.beta < 0.0:
            raise ParameterError(f"beta must be nonnegative, got {self.beta}")

    def g(self, u):
        """Pointwise penalty values g(u); unweighted, box excluded.

        For the integer penalty non-integral entries map to ``inf``.
        """
        u = np.asarray(u, dtype=float)
        if self.kind == "l0":
            return (u != 0.0).astype(float)
        if self.kind == "lp":
            return np.abs(u) ** self.p
        if self.kind == "log":
            return np.log1p(self.log_slope * np.abs(u))
        vals = np.zeros_like(u)
        vals[u != np.rint(u)] = math.inf
        return vals


@dataclass(frozen=True)
class ProxResult:
    """Solution of the scalar prox problem.

    ``objective`` is h(value) with h(0) = 0, so it is never positive.
    ``tie`` flags inputs where a second, distinct global minimizer exists
    within the comparison tolerance; the reported value is then the one with
    the smaller magnitude.  ``branch`` is ``"zero"``, ``"interior"`` or
    ``"at_bound"``.
    """

    value: float
    objective: float
    tie: bool
    branch: str


@dataclass(frozen=True)
class SparsityConstants:
    """Structural constants of a penalty at scale s."""

    u0: float
    q0: float
    uI: float


def _h(u, q, s, pen):
    """Objective h(u) = -q*u + u^2/2 + s*g(u), elementwise."""
    u = np.asarray(u, dtype=float)
    return -q * u + 0.5 * u * u + s * pen.g(u)


def _branch(value, b):
    if value == 0.0:
        return "zero"
    if abs(value) == b:
        return "at_bound"
    return "interior"


def _result(q, s, pen, value, tie):
    g = float(pen.g(value))
    obj = -q * value + 0.5 * value * value + s * g
    return ProxResult(value=value, objective=obj, tie=tie, branch=_branch(value, pen.box_bound))


def _pick(q, s, pen, nonzero_candidates):
    """Compare nonzero candidates against u = 0 and build the result.

    Ties within ``TIE_TOL`` on the objective are broken toward the smaller
    magnitude, which keeps the selection deterministic and monotone in q.
    """
    best = None
    best_h = math.inf
    for c in nonzero_candidates:
        hc = float(_h(c, q, s, pen))
        if hc < best_h - TIE_TOL or (hc <= best_h + TIE_TOL and best is not None and abs(c) < abs(best)):
            best, best_h = c, hc
    if best is None or best_h > TIE_TOL:
        return _result(q, s, pen, 0.0, tie=False)
    if best_h >= -TIE_TOL:
        # zero and the nonzero candidate are both global within tolerance
        return _result(q, s, pen, 0.0, tie=True)
    # is a second nonzero candidate tied with the winner?
    tie = any(
        c != best and abs(float(_h(c, q, s, pen)) - best_h) <= TIE_TOL for c in nonzero_candidates
    )
    return _result(q, s, pen, best, tie=tie)


# ---------------------------------------------------------------------------
# closed-form / root-based scalar proxes
# ---------------------------------------------------------------------------


def prox_l0(q: float, s: float, b: float = math.inf) -> ProxResult:
    """Hard thresholding: 0 for |q| <= sqrt(2s), the identity above.

    With a finite box the surviving candidate is clipped to ``[-b, b]`` and
    kept only if it still beats zero.
    """
    if s <= 0.0:
        raise ParameterError(f"prox scale s must be positive, got {s}")
    thr = math.sqrt(2.0 * s)
    aq = abs(q)
    pen = PenaltySpec(kind="l0", box_bound=b, beta=1.0)
    if aq <= thr:
        return _result(q, s, pen, 0.0, tie=(aq == thr and aq <= b))
    if aq <= b:
        return _result(q, s, pen, q, tie=False)
    return _pick(q, s, pen, [math.copysign(b, q)])


def _lp_inflection(s: float, p: float) -> float:
    return (s * p * (1.0 - p)) ** (1.0 / (2.0 - p))


def _lp_branch_root(a, s, p, uI):
    """Largest root of phi(u) = u - a + s*p*u^(p-1) for each a >= threshold.

    phi is convex on (0, inf) with its minimum at ``uI``; starting Newton at
    ``u = a`` (where phi > 0) gives a monotonically decreasing iteration that
    stays right of the root.  Entries not converged after 50 steps fall back
    to bisection on [uI, a].
    """
    a = np.asarray(a, dtype=float)
    x = a.copy()
    sp = s * p
    c2 = s * p * (p - 1.0)
    converged = np.zeros(a.shape, dtype=bool)
    for _ in range(50):
        phi = x - a + sp * x ** (p - 1.0)
        dphi = 1.0 + c2 * x ** (p - 2.0)
        dx = phi / dphi
        x = x - dx
        converged = np.abs(dx) <= ROOT_TOL
        if converged.all():
            return x
    bad = np.flatnonzero(~converged)
    lo = np.full(bad.shape, uI)
    hi = a[bad].copy()
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        pos = mid - a[bad] + sp * mid ** (p - 1.0) > 0.0
        hi = np.where(pos, mid, hi)
        lo = np.where(pos, lo, mid)
        if np.max(hi - lo) <= ROOT_TOL:
            x[bad] = 0.5 * (lo + hi)
            return x
    raise NumericError("lp prox root solve failed to converge")


def prox_lp(q: float, s: float, p: float, b: float = math.inf) -> ProxResult:
    """Prox of s*|u|^p (0 < p < 1) on the box [-b, b].

    For q > 0 the nonzero candidate is the stationary point of h right of the
    inflection ``uI``; it exists only if phi(uI) <= 0 and is clipped to the
    box.  The winner against u = 0 is decided by comparing objectives.
    """
    if s <= 0.0:
        raise ParameterError(f"prox scale s must be positive, got {s}")
    pen = PenaltySpec(kind="lp", p=p, box_bound=b, beta=1.0)
    if q == 0.0:
        return _result(q, s, pen, 0.0, tie=False)
    a = abs(q)
    uI = _lp_inflection(s, p)
    if uI - a + s * p * uI ** (p - 1.0) > 0.0:
        # h is strictly increasing on (0, inf): zero wins outright
        return _result(q, s, pen, 0.0, tie=False)
    root = float(_lp_branch_root(np.array([a]), s, p, uI)[0])
    cand = math.copysign(min(root, b), q)
    return _pick(q, s, pen, [cand])


def prox_log(q: float, s: float, a: float, b: float = math.inf) -> ProxResult:
    """Prox of s*log(1 + a|u|) on the box [-b, b].

    For q > 0 the interior stationary points are the real roots of
    ``a*u^2 + (1 - a*q)*u + (s*a - q) = 0`` restricted to (0, b]; the result
    is the objective-minimal point among zero, those roots and b.
    """
    if s <= 0.0:
        raise ParameterError(f"prox scale s must be positive, got {s}")
    if a <= 0.0:
        raise ParameterError(f"log slope must be positive, got {a}")
    pen = PenaltySpec(kind="log", log_slope=a, box_bound=b, beta=1.0)
    if q == 0.0:
        return _result(q, s, pen, 0.0, tie=False)
    w = abs(q)
    disc = (1.0 - a * w) ** 2 - 4.0 * a * (s * a - w)
    cands = []
    if disc >= 0.0:
        sq = math.sqrt(disc)
        for r in (((a * w - 1.0) + sq) / (2.0 * a), ((a * w - 1.0) - sq) / (2.0 * a)):
            if 0.0 < r <= b:
                cands.append(math.copysign(r, q))
    if math.isfinite(b):
        cands.append(math.copysign(b, q))
    return _pick(q, s, pen, cands)


def prox_integer(q: float, s: float = 0.0, b: float = math.inf) -> ProxResult:
    """Nearest feasible integer; independent of s.

    Half-integer inputs are ties between two integers and resolve toward the
    one of smaller magnitude.
    """
    m = math.floor(b) if math.isfinite(b) else math.inf
    if m < 1:
        return ProxResult(value=0.0, objective=0.0, tie=False, branch="zero")
    aq = abs(q)
    base = math.floor(aq)
    frac = aq - base
    if frac > 0.5:
        k = base + 1.0
        tie = False
    else:
        k = float(base)
        tie = frac == 0.5
    if k > m:
        k = float(m)
        tie = False
    elif tie and k + 1.0 > m:
        tie = False
    value = math.copysign(k, q) if k != 0.0 else 0.0
    obj = -q * value + 0.5 * value * value
    return ProxResult(value=value, objective=obj, tie=tie, branch=_branch(value, b))


def prox_scalar(q: float, s: float, pen: PenaltySpec) -> ProxResult:
    """Dispatch the scalar prox problem to the penalty-specific solver."""
    if not isinstance(pen, PenaltySpec):
        raise ParameterError("pen must be a PenaltySpec")
    if pen.kind == "l0":
        return prox_l0(q, s, pen.box_bound)
    if pen.kind == "lp":
        return prox_lp(q, s, pen.p, pen.box_bound)
    if pen.kind == "log":
        return prox_log(q, s, pen.log_slope, pen.box_bound)
    return prox_integer(q, s, pen.box_bound)


# ---------------------------------------------------------------------------
# vectorized prox (values only) -- the solver's fast path
# ---------------------------------------------------------------------------


def prox_array(q: np.ndarray, s: float, pen: PenaltySpec) -> np.ndarray:
    """Elementwise prox values for an array of inputs.

    Same selection rule as :func:`prox_scalar` (ties resolve to the smaller
    magnitude); only the minimizing values are returned.
    """
    if s <= 0.0:
        raise ParameterError(f"prox scale s must be positive, got {s}")
    q = np.asarray(q, dtype=float)
    b = pen.box_bound
    if pen.kind == "l0":
        return _prox_l0_vals(q, s, b)
    if pen.kind == "lp":
        return _prox_lp_vals(q, s, pen.p, b)
    if pen.kind == "log":
        return _prox_log_vals(q, s, pen.log_slope, b)
    return _prox_integer_vals(q, b)


def _prox_l0_vals(q, s, b):
    thr = math.sqrt(2.0 * s)
    aq = np.abs(q)
    vals = np.where(aq <= thr, 0.0, q)
    if math.isfinite(b):
        over = aq > b
        if over.any():
            hb = 0.5 * b * b - aq * b + s
            clipped = np.where(hb < -TIE_TOL, np.copysign(b, q), 0.0)
            vals = np.where(over & (aq > thr), clipped, vals)
    return vals


def _prox_lp_vals(q, s, p, b):
    aq = np.abs(q)
    uI = _lp_inflection(s, p)
    active = aq >= uI + s * p * uI ** (p - 1.0)
    vals = np.zeros_like(aq)
    if active.any():
        root = _lp_branch_root(aq[active], s, p, uI)
        cand = np.minimum(root, b)
        h_nz = 0.5 * cand * cand - aq[active] * cand + s * cand**p
        vals[active] = np.where(h_nz < -TIE_TOL, cand, 0.0)
    return np.where(vals == 0.0, 0.0, np.copysign(vals, q))


def _prox_log_vals(q, s, a, b):
    w = np.abs(q)
    disc = (1.0 - a * w) ** 2 - 4.0 * a * (s * a - w)
    real = disc >= 0.0
    sq = np.sqrt(np.where(real, disc, 0.0))
    r_small = ((a * w - 1.0) - sq) / (2.0 * a)
    r_large = ((a * w - 1.0) + sq) / (2.0 * a)

    def h_of(c, ok):
        pos = ok & (c > 0.0) & (c <= b)
        safe = np.where(pos, c, 1.0)
        hc = -w * safe + 0.5 * safe * safe + s * np.log1p(a * safe)
        return np.where(pos, hc, np.inf)

    cands = [(r_small, real), (r_large, real)]
    if math.isfinite(b):
        ok_b = np.ones_like(real)
        cands.append((np.full_like(w, b), ok_b))
    best = np.zeros_like(w)
    best_h = np.zeros_like(w)  # h(0) = 0
    for c, ok in cands:
        hc = h_of(c, ok)
        better = hc < best_h - TIE_TOL
        best = np.where(better, c, best)
        best_h = np.where(better, hc, best_h)
    return np.where(best == 0.0, 0.0, np.copysign(best, q))


def _prox_integer_vals(q, b):
    m = math.floor(b) if math.isfinite(b) else math.inf
    if m < 1:
        return np.zeros_like(np.asarray(q, dtype=float))
    aq = np.abs(q)
    base = np.floor(aq)
    k = base + (aq - base > 0.5)
    if math.isfinite(b):
        k = np.minimum(k, float(m))
    return np.where(k == 0.0, 0.0, np.copysign(k, q))


# ---------------------------------------------------------------------------
# structural constants
# ---------------------------------------------------------------------------


def compute_uI(s: float, p: float) -> float:
    """Inflection point of u -> u^2/2 + s*u^p; the map is convex on [uI, inf)."""
    if s <= 0.0 or not 0.0 < p < 1.0:
        raise ParameterError(f"need s > 0 and 0 < p < 1, got s={s}, p={p}")
    return _lp_inflection(s, p)


@lru_cache(maxsize=512)
def compute_u0(s: float, pen: PenaltySpec) -> float:
    """Sparsity gap: nonzero prox outputs satisfy |u| >= u0(s).

    Closed forms for ``l0``, ``lp`` and ``integer``; for ``log`` the gap is
    located numerically as the jump of the brute-force prox at the zero
    threshold and shaved slightly so it is a safe lower bound.  A zero return
    means the penalty has no gap at this scale (possible for ``log`` when
    ``s * a^2 <= 1``).
    """
    if s <= 0.0:
        raise ParameterError(f"scale s must be positive, got {s}")
    b = pen.box_bound
    if pen.kind == "l0":
        return min(b, math.sqrt(2.0 * s))
    if pen.kind == "lp":
        return min(b, (2.0 * s * (1.0 - pen.p)) ** (1.0 / (2.0 - pen.p)))
    if pen.kind == "integer":
        return 1.0 if (not math.isfinite(b) or math.floor(b) >= 1) else math.inf
    u_star, _ = _log_phi_min(s, pen.log_slope, b)
    if u_star == 0.0:
        return 0.0
    return max(0.0, u_star - 1e-6 * (1.0 + u_star))


def _log_phi_min(s: float, a: float, b: float):
    """Minimize phi(u) = u/2 + s*log1p(a*u)/u over (0, b].

    Returns ``(argmin, min)``.  For ``s*a^2 <= 1`` phi is increasing, the
    infimum ``s*a`` is only approached as u -> 0 and the prox has no jump;
    the argmin is reported as 0.  Otherwise the interior minimum is located
    by a dense scan plus golden-section refinement; the minimal *value* is
    quadratically insensitive to the location error, so q0 comes out far
    more accurate than u0.
    """
    if s * a * a <= 1.0:
        return 0.0, s * a
    probe = min(b, math.sqrt(2.0 * s))
    phi = lambda u: 0.5 * u + s * math.log1p(a * u) / u
    hi = min(b, 2.0 * phi(probe) + 1.0)
    grid = np.linspace(hi / 2000.0, hi, 2000)
    vals = 0.5 * grid + s * np.log1p(a * grid) / grid
    i = int(np.argmin(vals))
    lo_b = grid[max(i - 1, 0)]
    hi_b = grid[min(i + 1, len(grid) - 1)]
    u_star = _golden_min(phi, lo_b, hi_b, 1e-12)
    if math.isfinite(b) and phi(b) < phi(u_star):
        u_star = b
    return u_star, phi(u_star)


@lru_cache(maxsize=512)
def compute_q0(s: float, pen: PenaltySpec) -> float:
    """Zero threshold: prox(q) = {0} for |q| < q0 and 0 is optimal iff |q| <= q0.

    Equals the infimum of ``phi(u) = u/2 + s*g(u)/u`` over (0, b]; closed
    form except for the ``log`` penalty, where phi is minimized numerically.
    """
    if s <= 0.0:
        raise ParameterError(f"scale s must be positive, got {s}")
    b = pen.box_bound
    if pen.kind == "l0":
        thr = math.sqrt(2.0 * s)
        return thr if b >= thr else 0.5 * b + s / b
    if pen.kind == "lp":
        u = min(b, (2.0 * s * (1.0 - pen.p)) ** (1.0 / (2.0 - pen.p)))
        return 0.5 * u + s * u ** (pen.p - 1.0)
    if pen.kind == "integer":
        return 0.5 if (not math.isfinite(b) or math.floor(b) >= 1) else math.inf
    return _log_phi_min(s, pen.log_slope, b)[1]


def sparsity_constants(s: float, pen: PenaltySpec) -> SparsityConstants:
    """Bundle u0, q0 and (for lp) the inflection bound uI at scale s."""
    uI = compute_uI(s, pen.p) if pen.kind == "lp" else math.nan
    return SparsityConstants(u0=compute_u0(s, pen), q0=compute_q0(s, pen), uI=uI)


def check_strong_conv_condition(L: float, alpha: float, p: float) -> bool:
    """True iff L <= (2/p - 1) * alpha, the single-valuedness regime for lp."""
    if L <= 0.0 or alpha < 0.0 or not 0.0 < p < 1.0:
        raise ParameterError(f"need L > 0, alpha >= 0, 0 < p < 1; got {L}, {alpha}, {p}")
    return L <= (2.0 / p - 1.0) * alpha


# ---------------------------------------------------------------------------
# verification oracle
# ---------------------------------------------------------------------------


def _golden_min(f, lo, hi, tol):
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    x1 = hi - invphi * (hi - lo)
    x2 = lo + invphi * (hi - lo)
    f1, f2 = f(x1), f(x2)
    while hi - lo > tol:
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - invphi * (hi - lo)
            f1 = f(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + invphi * (hi - lo)
            f2 = f(x2)
    return 0.5 * (lo + hi)


def brute_force_prox(
    q: float, s: float, pen: PenaltySpec, grid_n: int = 4001, refine_tol: float = 1e-10
) -> float:
    """Global minimizer of h by dense scan plus golden-section refinement.

    The scan covers ``[-R, R]`` with ``R = min(b, 2|q| + 1)``, which contains
    every minimizer by the growth bound |u| <= 2|q|.  Deliberately independent
    of the closed-form solvers so it can serve as their oracle.
    """
    if s <= 0.0:
        raise ParameterError(f"prox scale s must be positive, got {s}")
    if grid_n < 1000:
        raise ParameterError(f"grid_n must be at least 1000, got {grid_n}")
    b = pen.box_bound
    R = min(b, 2.0 * abs(q) + 1.0)
    if pen.kind == "integer":
        ints = np.arange(-math.floor(R), math.floor(R) + 1, dtype=float)
        h = -q * ints + 0.5 * ints * ints
        order = np.lexsort((np.abs(ints), h))
        return float(ints[order[0]])
    grid = np.linspace(-R, R, grid_n)
    extra = [0.0]
    if math.isfinite(b) and b <= R:
        extra += [b, -b]
    grid = np.concatenate([grid, np.array(extra)])
    h = _h(grid, q, s, pen)
    x = float(grid[int(np.argmin(h))])
    if x != 0.0:
        step = 2.0 * R / (grid_n - 1)
        lo, hi = x - step, x + step
        if x > 0.0:
            lo, hi = max(lo, 0.0), min(hi, b)
        else:
            lo, hi = max(lo, -b), min(hi, 0.0)
        x = _golden_min(lambda t: float(_h(t, q, s, pen)), lo, hi, refine_tol)
    cands = [0.0, x]
    if math.isfinite(b) and b <= R:
        cands += [math.copysign(b, q)]
    best, best_h = 0.0, 0.0
    for c in cands:
        hc = float(_h(c, q, s, pen))
        if hc < best_h - TIE_TOL or (abs(hc - best_h) <= TIE_TOL and abs(c) < abs(best)):
            best, best_h = c, hc
    return best
