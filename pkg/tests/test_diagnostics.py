import math

import numpy as np
import pytest

from sparsepg.diagnostics import (
    certify,
    gmap_sample,
    l_stationarity_residual,
    pmp_residual,
)
from sparsepg.errors import ParameterError
from sparsepg.penalties import PenaltySpec, brute_force_prox, compute_q0, compute_u0, prox_array
from sparsepg.solver import SolverConfig, run

from conftest import make_problem

EX1_PEN = PenaltySpec(kind="lp", p=0.5, box_bound=4.0, alpha=0.01, beta=0.01)


def test_pmp_trivial_zero():
    mesh, prob = make_problem(12, y_d="zero")
    res, viol = pmp_residual(prob, np.zeros(mesh.num_tris), EX1_PEN, f_weight=0.5)
    assert res == 0.0 and viol == 0.0


def test_pmp_zero_for_cellwise_minimized_field(rng):
    # minimizing every cell Hamiltonian for a frozen gradient produces a
    # field with exactly zero residual against that same gradient
    mesh, prob = make_problem(12)
    u = rng.uniform(-1.0, 1.0, mesh.num_tris)
    grad = 0.5 * prob.gradient(u)
    v = prox_array(-grad / EX1_PEN.alpha, EX1_PEN.beta / EX1_PEN.alpha, EX1_PEN)
    res, viol = pmp_residual(prob, v, EX1_PEN, grad=grad)
    assert res <= 1e-16
    assert viol == 0.0


def test_pmp_requires_positive_alpha():
    mesh, prob = make_problem(8)
    pen = PenaltySpec(kind="lp", p=0.5, alpha=0.0, beta=0.01)
    with pytest.raises(ParameterError):
        pmp_residual(prob, np.zeros(mesh.num_tris), pen)


def test_l_stationarity_residual_fixed_point_and_random(rng):
    mesh, prob = make_problem(16)
    cfg = SolverConfig(pen=EX1_PEN, L0=1e-4, f_weight=0.5)
    res = run(prob, cfg)
    polished = run(prob, SolverConfig(pen=EX1_PEN, mode="fixed", L0=res.history[-1].L,
                                      f_weight=0.5, stop_tol=None, step_tol=1e-13,
                                      max_iter=1000), u_init=res.u)
    L = res.history[-1].L
    r = l_stationarity_residual(prob, polished.u, L, EX1_PEN, f_weight=0.5)
    assert r <= 1e-10
    r_random = l_stationarity_residual(prob, rng.uniform(-2, 2, mesh.num_tris), L,
                                       EX1_PEN, f_weight=0.5)
    assert r_random > 1e-3


def test_certify_report_fields():
    mesh, prob = make_problem(12)
    res = run(prob, SolverConfig(pen=EX1_PEN, L0=1e-4, f_weight=0.5))
    rep = certify(prob, res.u, res.history[-1].L, EX1_PEN, f_weight=0.5)
    assert rep.pmp_residual >= 0.0
    assert rep.pmp_violation_measure >= 0.0
    assert rep.l_stat_residual >= 0.0
    assert rep.L == res.history[-1].L


def test_gmap_zero_is_member():
    pen = PenaltySpec(kind="lp", p=0.8, box_bound=2.0, alpha=0.01, beta=0.01)
    members, _ = gmap_sample(0.1, pen, [0.0], [0.0, 0.5, -0.5])
    assert (0.0, 0.0, "0") in members


def test_gmap_integer_locally_unbounded():
    # with the plain integer indicator every integer belongs to the map on
    # |z| <= L/2: the map is not locally bounded near z = 0
    L = 1.0
    pen = PenaltySpec(kind="integer", alpha=0.0, beta=1.0)
    ints = np.arange(-3.0, 4.0)
    members, _ = gmap_sample(L, pen, [-0.49, 0.0, 0.49], ints, member_tol=1e-12)
    for z in (-0.49, 0.0, 0.49):
        assert sum(1 for zz, _, _ in members if zz == z) == len(ints)
    members_out, _ = gmap_sample(L, pen, [0.51], ints, member_tol=1e-12)
    assert len(members_out) < len(ints)


def test_gmap_branch_structure():
    pen = PenaltySpec(kind="lp", p=0.8, box_bound=2.0, alpha=0.01, beta=0.01)
    L = 0.1
    zs = np.linspace(-0.05, 0.05, 41)
    us = np.linspace(-2.2, 2.2, 89)
    members, tol = gmap_sample(L, pen, zs, us)
    du = float(us[1] - us[0])
    s = pen.beta / (L + pen.alpha)
    u0 = compute_u0(s, pen)
    q0 = compute_q0(s, pen)
    assert members
    for z, u, branch in members:
        if u == 0.0:
            assert branch == "0"
            assert abs(z) <= (L + pen.alpha) * q0 + 10 * tol
        else:
            assert branch == ("+" if u > 0 else "-")
            assert abs(u) >= u0 - du - 1e-12
    # both signed branches and the zero branch are populated
    assert {b for _, _, b in members} == {"+", "-", "0"}


def test_gmap_large_z_single_positive_member():
    pen = PenaltySpec(kind="lp", p=0.8, box_bound=2.0, alpha=0.01, beta=0.01)
    L = 0.1
    z = 0.15  # far above every threshold: the bound is the only member
    us = np.linspace(-2.0, 2.0, 81)
    members, _ = gmap_sample(L, pen, [z], us)
    vals = sorted(u for _, u, _ in members)
    assert vals and min(vals) > 0
    q = (z + L * 2.0) / (L + pen.alpha)
    v = brute_force_prox(q, pen.beta / (L + pen.alpha), pen)
    assert v == 2.0
    assert 2.0 in vals
