import math

import numpy as np
import pytest

from vintagecap.hjb import control_matrices
from vintagecap.model import CapitalState, ControlPath, canonical_instance
from vintagecap.optimize import (
    objective_gradient,
    objective_value,
    solve_adjoint,
    solve_finite_horizon,
    value_finite,
)
from vintagecap.transport import solve_forward


def lq_finite_horizon_oracle(model, x_values, n_steps):
    """Backward difference-Riccati recursion for the discrete LQ problem.

    Independent of the iterative solver: dynamic programming over the exact
    one-step matrices with the discounted quadratic stage cost.
    """
    n = model.n_cells
    dt = model.dt
    ds = model.cell_width
    gamma = math.exp(-model.lam * dt)
    a_mat, b_mat = control_matrices(model)
    q_quad = dt * model.revenue.beta * ds * ds * np.outer(model.alpha,
                                                          model.alpha)
    q_lin = -dt * model.revenue.eta * ds * model.alpha
    r_mat = dt * np.diag(np.concatenate(
        [[model.cost.c0.w], np.full(n, model.cost.c1.w * ds)]))
    p = np.zeros((n, n))
    r_vec = np.zeros(n)
    c = 0.0
    for _ in range(n_steps):
        s = r_mat + gamma * b_mat.T @ p @ b_mat
        k_gain = gamma * np.linalg.solve(s, b_mat.T @ p @ a_mat)
        m_cl = a_mat - b_mat @ k_gain
        p_new = q_quad + gamma * a_mat.T @ p @ a_mat - k_gain.T @ s @ k_gain
        br = b_mat.T @ r_vec
        r_new = q_lin + gamma * m_cl.T @ r_vec
        c_new = gamma * c - 0.5 * gamma ** 2 * float(
            br @ np.linalg.solve(s, br))
        p, r_vec, c = 0.5 * (p_new + p_new.T), r_new, c_new
    return 0.5 * float(x_values @ p @ x_values) + float(r_vec @ x_values) + c


def test_null_instance_trivial(null1):
    x = CapitalState(np.ones(null1.n_cells), null1.grid)
    u, traj, report = solve_finite_horizon(x, 1.0, null1, tol=1e-10)
    assert report.value == 0.0
    assert report.epsilon == 0.0
    assert np.all(u.u0s == 0.0) and np.all(u.u1s == 0.0)


def test_value_against_backward_riccati_oracle(lq1):
    x = np.ones(lq1.n_cells)
    n_steps = int(round(2.0 / lq1.dt))
    oracle = lq_finite_horizon_oracle(lq1, x, n_steps)
    v = value_finite(CapitalState(x, lq1.grid), 2.0, lq1, tol=1e-9)
    assert v == pytest.approx(oracle, rel=1e-4)


def test_gradient_matches_finite_differences(lq1, rng):
    n = lq1.n_cells
    n_steps = int(round(2.0 / lq1.dt))
    x = CapitalState(rng.standard_normal(n) * 0.5, lq1.grid)
    u = ControlPath(lq1.grid, 0.0, rng.standard_normal(n_steps) * 0.3,
                    rng.standard_normal((n_steps, n)) * 0.3)
    traj = solve_forward(x, u, lq1)
    costate = solve_adjoint(traj, lq1)
    grad = objective_gradient(u, traj, costate, lq1)
    ds = lq1.cell_width
    for _ in range(20):
        d0 = rng.standard_normal(n_steps)
        d1 = rng.standard_normal((n_steps, n))
        exact = float(grad.u0s @ d0 + ds * np.sum(grad.u1s * d1))
        h = 1e-5
        up = ControlPath(lq1.grid, 0.0, u.u0s + h * d0, u.u1s + h * d1)
        dn = ControlPath(lq1.grid, 0.0, u.u0s - h * d0, u.u1s - h * d1)
        fd = (objective_value(x, up, lq1)
              - objective_value(x, dn, lq1)) / (2 * h)
        assert abs(exact - fd) / max(abs(fd), 1e-12) <= 1e-6


def test_gradient_interior_box(box1, rng):
    # smooth-part gradient in the interior of the box
    n = box1.n_cells
    n_steps = 100
    x = CapitalState(rng.standard_normal(n) * 0.3, box1.grid)
    u = ControlPath(box1.grid, 0.0,
                    rng.uniform(-0.4, 0.4, n_steps),
                    rng.uniform(-0.4, 0.4, (n_steps, n)))
    traj = solve_forward(x, u, box1)
    grad = objective_gradient(u, traj, solve_adjoint(traj, box1), box1)
    ds = box1.cell_width
    for _ in range(5):
        d0 = rng.uniform(-1, 1, n_steps)
        d1 = rng.uniform(-1, 1, (n_steps, n))
        exact = float(grad.u0s @ d0 + ds * np.sum(grad.u1s * d1))
        h = 1e-5
        up = ControlPath(box1.grid, 0.0, u.u0s + h * d0, u.u1s + h * d1)
        dn = ControlPath(box1.grid, 0.0, u.u0s - h * d0, u.u1s - h * d1)
        fd = (objective_value(x, up, box1)
              - objective_value(x, dn, box1)) / (2 * h)
        assert abs(exact - fd) / max(abs(fd), 1e-12) <= 1e-6


def test_zero_costate_zero_data(null1, rng):
    x = CapitalState(rng.standard_normal(null1.n_cells), null1.grid)
    u = ControlPath.zeros(null1.grid, 0.0, 50)
    traj = solve_forward(x, u, null1)
    costate = solve_adjoint(traj, null1)
    assert np.all(costate.duals == 0.0)


def test_costate_sign_and_boundary(lq1):
    # zero trajectory: source -R'(0)*alpha <= 0 propagates nonpositively
    n = lq1.n_cells
    traj_vals = np.zeros((101, n))
    from vintagecap.transport import Trajectory
    traj = Trajectory(lq1.grid, 0.0, traj_vals)
    costate = solve_adjoint(traj, lq1)
    assert np.all(costate.duals <= 1e-15)
    # oldest-age cell carries no dual weight at any time
    assert np.all(costate.duals[:, -1] == 0.0)


def test_descent_monotone(lq1):
    x = CapitalState(np.ones(lq1.n_cells), lq1.grid)
    _, _, report = solve_finite_horizon(x, 1.0, lq1, tol=1e-9)
    objs = [row[1] for row in report.history]
    assert all(b <= a + 1e-15 for a, b in zip(objs, objs[1:]))
    assert report.converged


def test_box_projection_feasible(box1):
    x = CapitalState(10.0 * np.ones(box1.n_cells), box1.grid)
    u, _, report = solve_finite_horizon(x, 1.0, box1, tol=1e-7)
    assert np.max(np.abs(u.u0s)) <= 1.0
    assert np.max(np.abs(u.u1s)) <= 1.0
    assert report.converged


def test_value_finite_t0_is_terminal(lq1):
    x = CapitalState(np.ones(lq1.n_cells), lq1.grid)
    assert value_finite(x, 0.0, lq1) == 0.0


def test_epsilon_certificate_nonnegative(lq1):
    x = CapitalState(np.ones(lq1.n_cells), lq1.grid)
    _, _, report = solve_finite_horizon(x, 1.0, lq1, tol=1e-6)
    assert report.epsilon >= 0.0
    assert math.isfinite(report.value)


def test_control_norm_growth_shape(box1, sat1):
    # regime-shaped bound on the returned control: quadratic in |x| for
    # constrained controls, linear under sublinear revenue
    for model, expo in ((box1, 2), (sat1, 1)):
        ratios = []
        for scale in (0.1, 1.0, 10.0):
            x = CapitalState(scale * np.ones(model.n_cells), model.grid)
            u, _, _ = solve_finite_horizon(x, 2.0, model, tol=1e-6)
            norm = u.lp_lambda_norm(model.lam, model.p)
            ratios.append(norm / (1.0 + x.h_norm() ** expo))
        assert max(ratios) < 10.0 * (1.0 + min(ratios))
