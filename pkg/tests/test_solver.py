import csv
import math

import numpy as np
import pytest
import scipy.sparse.linalg as spla

from sparsepg.errors import ParameterError
from sparsepg.mesh import build_mesh, control_l2_sq, penalty_integral, support_change
from sparsepg.pde import lipschitz_estimate
from sparsepg.penalties import PenaltySpec, brute_force_prox, compute_u0, compute_uI
from sparsepg.solver import (
    SolverConfig,
    omega_m_measure,
    omega_threshold,
    pg_step,
    run,
    write_history_csv,
)

from conftest import make_problem

EX1_PEN = PenaltySpec(kind="lp", p=0.5, box_bound=4.0, alpha=0.01, beta=0.01)


def ex1_config(**kw):
    defaults = dict(pen=EX1_PEN, mode="backtracking", L0=1e-4, f_weight=0.5)
    defaults.update(kw)
    return SolverConfig(**defaults)


def test_pg_step_fixed_point_at_origin():
    u = np.zeros(50)
    assert np.all(pg_step(u, u, 0.1, EX1_PEN) == 0.0)


def test_pg_step_zero_beta_is_projected_quadratic_step(rng):
    pen = PenaltySpec(kind="lp", p=0.5, box_bound=2.0, alpha=0.05, beta=0.0)
    u = rng.standard_normal(40)
    g = rng.standard_normal(40)
    L = 0.3
    expected = np.clip((L * u - g) / (L + 0.05), -2.0, 2.0)
    assert np.allclose(pg_step(u, g, L, pen), expected, atol=1e-15)
    free = PenaltySpec(kind="lp", p=0.5, alpha=0.05, beta=0.0)
    assert np.allclose(pg_step(u, g, L, free), (L * u - g) / (L + 0.05), atol=1e-15)


def test_pg_step_matches_scalar_oracle(rng):
    for pen in (EX1_PEN, PenaltySpec(kind="integer", box_bound=2.0, alpha=0.01, beta=0.01),
                PenaltySpec(kind="log", log_slope=2.0, alpha=0.02, beta=0.05)):
        u = rng.uniform(-3.0, 3.0, 30)
        g = rng.uniform(-0.05, 0.05, 30)
        L = 2e-3
        stepped = pg_step(u, g, L, pen)
        s = pen.beta / (L + pen.alpha)
        for t in range(30):
            q = (L * u[t] - g[t]) / (L + pen.alpha)
            assert abs(stepped[t] - brute_force_prox(q, s, pen)) < 1e-6


def test_run_terminates_at_fixed_point():
    mesh, prob = make_problem(12)
    first = run(prob, ex1_config())
    # polish to an exact fixed point of the prox step, then restart there
    polished = run(prob, ex1_config(mode="fixed", stop_tol=None, step_tol=0.0, max_iter=500),
                   u_init=first.u)
    assert polished.converged
    again = run(prob, ex1_config(), u_init=polished.u)
    assert again.iterations == 1
    assert again.history[-1].step_norm == 0.0
    assert again.converged


def test_tikhonov_limit_matches_normal_equations():
    # beta = 0 reduces the iteration to a smooth quadratic problem we can
    # solve independently through its normal equations
    mesh, prob = make_problem(16)
    pen = PenaltySpec(kind="lp", p=0.5, alpha=0.01, beta=0.0)
    cfg = SolverConfig(pen=pen, L0=1e-4, f_weight=0.5, stop_tol=1e-13, max_iter=3000)
    res = run(prob, cfg)

    w = 0.5
    idx = mesh.interior
    lu = spla.splu(prob.K_ii)
    M = prob.M
    B = prob.B
    y_d = prob.y_d

    def apply_s(u):
        y = np.zeros(mesh.num_nodes)
        y[idx] = lu.solve((B @ u)[idx])
        return y

    def apply_st(yv):
        p = np.zeros(mesh.num_nodes)
        p[idx] = lu.solve(yv[idx])
        return (B.T @ p) / mesh.area

    def normal_op(u):
        return 2.0 * w * apply_st(M @ apply_s(u)) + pen.alpha * u

    A = spla.LinearOperator((mesh.num_tris, mesh.num_tris), matvec=normal_op)
    rhs = 2.0 * w * apply_st(M @ y_d)
    u_star, info = spla.cg(A, rhs, rtol=1e-12, atol=0.0, maxiter=5000)
    assert info == 0

    def J(u):
        y = apply_s(u)
        return w * float((y - y_d) @ (M @ (y - y_d))) + 0.5 * pen.alpha * control_l2_sq(mesh, u)

    assert abs(res.J - J(u_star)) <= 1e-6


def test_backtracking_decrease_condition_holds():
    mesh, prob = make_problem(20)
    res = run(prob, ex1_config())
    h = res.history
    for prev, cur in zip(h[:-1], h[1:]):
        slack = 1e-13 * max(1.0, abs(prev.J))
        assert cur.J <= prev.J - res.config.eta * cur.step_norm**2 + slack
    assert res.converged


def test_fixed_mode_monotone_above_lipschitz():
    mesh, prob = make_problem(16)
    L_f = lipschitz_estimate(prob)
    cfg = ex1_config(mode="fixed", L0=0.6 * L_f, max_iter=60, stop_tol=1e-13)
    res = run(prob, cfg)
    J = [r.J for r in res.history]
    assert all(b <= a + 1e-14 for a, b in zip(J, J[1:]))


def test_step_square_summability():
    mesh, prob = make_problem(20)
    res = run(prob, ex1_config())
    sq = [r.step_norm**2 for r in res.history if r.k >= 1]
    total = sum(sq)
    tail = sum(sq[-max(1, len(sq) // 10):])
    assert total < math.inf
    assert tail < 0.01 * total


def test_support_stabilizes():
    # natural run, then a fixed-mode continuation so the stable support shows
    # over five recorded iterations (backtracking cannot iterate below the
    # floating-point decrease floor, the continuation has no accept test)
    mesh, prob = make_problem(20)
    res = run(prob, ex1_config())
    assert res.converged
    tail = run(prob, ex1_config(mode="fixed", min_iter=5, max_iter=5, stop_tol=1.0),
               u_init=res.u)
    for r in tail.history[-5:]:
        assert r.support_change == 0.0
        assert r.step_norm < 1e-4


def test_sparsity_gap_every_iterate():
    for pen, L0 in ((EX1_PEN, 1e-4),
                    (PenaltySpec(kind="integer", box_bound=2.0, alpha=0.01, beta=0.01), 1e-3),
                    (PenaltySpec(kind="log", log_slope=3.0, alpha=0.01, beta=0.01), 1e-3)):
        mesh, prob = make_problem(12)
        res = run(prob, SolverConfig(pen=pen, L0=L0, f_weight=0.5))
        assert all(r.gap_violations == 0 for r in res.history)


def test_consecutive_iterate_support_bound():
    # ||u_{k+1} - u_k||^2 >= u0(s_k)^2 * |supp change| along the iteration
    mesh, prob = make_problem(16)
    fields = []
    res = run(prob, ex1_config(), iterate_callback=lambda k, u: fields.append(u.copy()))
    for r, (u_prev, u_next) in zip(res.history[1:], zip(fields[:-1], fields[1:])):
        s_k = EX1_PEN.beta / (r.L + EX1_PEN.alpha)
        u0 = compute_u0(s_k, EX1_PEN)
        lhs = mesh.area * float(np.sum((u_next - u_prev) ** 2))
        assert lhs >= u0**2 * support_change(mesh, u_prev, u_next) - 1e-12


def test_integer_run_invariants():
    mesh, prob = make_problem(20)
    pen = PenaltySpec(kind="integer", box_bound=2.0, alpha=0.01, beta=0.01)
    fields = []
    res = run(prob, SolverConfig(pen=pen, L0=1e-3, f_weight=0.5, min_iter=8, max_iter=200),
              iterate_callback=lambda k, u: fields.append(u.copy()))
    assert res.converged
    l1_sum = 0.0
    l2_sum = 0.0
    for u_prev, u_next in zip(fields[:-1], fields[1:]):
        assert np.all(u_next == np.rint(u_next))
        d = np.abs(u_next - u_prev)
        l1_sum += mesh.area * float(np.sum(d))
        l2_sum += mesh.area * float(np.sum(d * d))
    assert l1_sum <= l2_sum


def test_warm_start_option():
    # warm start carries the accepted L forward; with no rejections the two
    # policies coincide, and the L record never decreases under warm start
    mesh, prob = make_problem(16)
    pen = PenaltySpec(kind="lp", p=0.9, box_bound=6.0, alpha=0.001, beta=0.01)
    res_ws = run(prob, SolverConfig(pen=pen, L0=5e-3, eta=8e-3, f_weight=0.5,
                                    warm_start=True, max_iter=800))
    Ls = [r.L for r in res_ws.history if r.k >= 1]
    assert all(b >= a for a, b in zip(Ls, Ls[1:]))
    res_cold = run(prob, SolverConfig(pen=pen, L0=5e-3, f_weight=0.5, max_iter=800))
    res_ws2 = run(prob, SolverConfig(pen=pen, L0=5e-3, f_weight=0.5,
                                     warm_start=True, max_iter=800))
    assert res_ws2.J == res_cold.J and res_ws2.iterations == res_cold.iterations


def test_omega_measure():
    mesh = build_mesh(4)
    u = np.zeros(mesh.num_tris)
    assert omega_m_measure(mesh, u, 0.5) == 0.0
    u[:] = 2.0
    assert omega_m_measure(mesh, u, 0.5) == 0.0  # integers above the band
    u[:] = 0.3
    assert omega_m_measure(mesh, u, 0.5) == 1.0
    uI = omega_threshold(EX1_PEN)
    assert uI == pytest.approx(compute_uI(1.0, 0.5))
    with pytest.raises(ParameterError):
        omega_threshold(PenaltySpec(kind="lp", p=0.5, alpha=0.0, beta=0.01))
    with pytest.raises(ParameterError):
        omega_threshold(PenaltySpec(kind="l0", alpha=0.01))


def test_omega_recorded_and_decreasing_overall():
    mesh, prob = make_problem(16)
    pen = PenaltySpec(kind="lp", p=0.9, box_bound=6.0, alpha=0.001, beta=0.01)
    res = run(prob, SolverConfig(pen=pen, L0=5e-3, f_weight=0.5, max_iter=2000))
    om = [r.omega_measure for r in res.history if r.k >= 1]
    assert all(math.isfinite(v) for v in om)
    assert om[0] >= om[-1]


def test_history_counters_monotone():
    mesh, prob = make_problem(12)
    res = run(prob, ex1_config())
    solves = [r.pde_solves for r in res.history]
    assert all(b >= a for a, b in zip(solves, solves[1:]))
    assert res.state_solves + res.adjoint_solves == res.history[-1].pde_solves
    assert res.state_solves == res.iterations + 1 + sum(r.backtracks for r in res.history)
    assert res.adjoint_solves == res.iterations


def test_max_iter_flags_unconverged():
    mesh, prob = make_problem(12)
    res = run(prob, ex1_config(max_iter=2))
    assert not res.converged
    assert res.iterations == 2


def test_history_csv(tmp_path):
    mesh, prob = make_problem(8)
    res = run(prob, ex1_config())
    path = tmp_path / "h.csv"
    write_history_csv(res.history, path)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["k", "J", "f", "penalty", "step_norm", "L_k", "pde_solves",
                       "support_measure", "support_change", "omega_m"]
    assert len(rows) == len(res.history) + 1
    assert float(rows[-1][1]) == res.J


def test_config_validation():
    with pytest.raises(ParameterError):
        SolverConfig(pen=EX1_PEN, mode="bogus")
    with pytest.raises(ParameterError):
        SolverConfig(pen=EX1_PEN, L0=0.0)
    with pytest.raises(ParameterError):
        SolverConfig(pen=EX1_PEN, theta=1.0)
    with pytest.raises(ParameterError):
        SolverConfig(pen=EX1_PEN, stop_tol=None)
    with pytest.raises(ParameterError):
        SolverConfig(pen=EX1_PEN, f_weight=0.0)
