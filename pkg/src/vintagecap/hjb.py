"""Stationary equation residuals and the quadratic value-function oracle.

For instances with quadratic revenue, quadratic (unboxed) costs, and zero
terminal data, the infinite-horizon value of the discrete problem is an
explicit quadratic ½<Px,x> + <r,x> + c whose coefficients solve a discounted
discrete-time Riccati system.  That oracle is built here by Newton-Kleinman
iteration and is independent of the trajectory optimizer, which makes the
two-sided value comparison meaningful.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.linalg import solve_discrete_lyapunov

from .costs import ConjugatePair, DualState, boundary_trace, g0_eval, hamiltonian
from .errors import NewtonDivergence, NotInDomain, NotLQ
from .model import CapitalState, QuadraticCost, QuadraticRevenue, VintageModel, ZeroTerminal
from .transport import kappa

__all__ = [
    "RiccatiSolution",
    "riccati_solve",
    "hjb_residual",
    "upwind_generator",
    "make_test_states",
    "control_matrices",
]


def control_matrices(model: VintageModel) -> tuple[np.ndarray, np.ndarray]:
    """One-step transition A and injection B of the exact discrete dynamics.

    State convention is the raw cell-value vector; the control vector stacks
    (u0, u1_0..u1_{n-1}).  y_{k+1} = A y_k + B u_k reproduces the propagator
    exactly, including the half-step inflow weights of the age-zero cell.
    """
    n = model.n_cells
    dt = model.dt
    c = math.exp(-model.mu * dt)
    a_mat = np.zeros((n, n))
    a_mat[np.arange(1, n), np.arange(n - 1)] = c
    b_mat = np.zeros((n, n + 1))
    b_mat[0, 0] = math.exp(-model.mu * dt / 2.0)
    b_mat[0, 1] = kappa(model.mu, dt / 2.0)
    kap = kappa(model.mu, dt)
    b_mat[np.arange(1, n), np.arange(1, n)] = kap
    return a_mat, b_mat


@dataclass(frozen=True)
class RiccatiSolution:
    """Quadratic value data in the cell-width-weighted inner product.

    value(x) = ½<Px,x>_H + <r,x>_H + c with <a,b>_H = cell_width * a.b;
    the gradient is the H-representer Px + r.
    """

    P: np.ndarray
    r: np.ndarray
    c: float
    residual_norm: float
    cell_width: float

    def value(self, x: CapitalState) -> float:
        v = x.values
        ds = self.cell_width
        return float(0.5 * ds * v @ (self.P @ v) + ds * self.r @ v + self.c)

    def gradient(self, x: CapitalState) -> DualState:
        g = self.P @ x.values + self.r
        return DualState(g, boundary_trace(g))

    def perturbed(self, delta: float, rng: np.random.Generator
                  ) -> "RiccatiSolution":
        """P shifted by delta times a random symmetric PSD matrix.

        The perturbation is the Wishart matrix M M^T for a standard normal
        M, the plain construction of a random symmetric PSD matrix.
        """
        n = self.P.shape[0]
        m = rng.standard_normal((n, n))
        g = m @ m.T
        return RiccatiSolution(self.P + delta * g, self.r, self.c,
                               math.inf, self.cell_width)

    def to_json(self, path: str | Path) -> None:
        payload = {
            "P": self.P.tolist(),
            "r": self.r.tolist(),
            "c": self.c,
            "residual_norm": self.residual_norm,
            "cell_width": self.cell_width,
        }
        body = json.dumps(payload, sort_keys=True)
        checksum = hashlib.sha256(body.encode()).hexdigest()
        Path(path).write_text(
            json.dumps({"data": payload, "sha256": checksum}, sort_keys=True))


def _is_lq(model: VintageModel) -> bool:
    return (isinstance(model.revenue, QuadraticRevenue)
            and isinstance(model.cost.c0, QuadraticCost)
            and isinstance(model.cost.c1, QuadraticCost)
            and isinstance(model.terminal, ZeroTerminal))


def _dare_residual(p_mat, a_t, b_t, q_t, r_t) -> float:
    s = r_t + b_t.T @ p_mat @ b_t
    gain = np.linalg.solve(s, b_t.T @ p_mat @ a_t)
    res = (q_t + a_t.T @ p_mat @ a_t - p_mat
           - a_t.T @ p_mat @ b_t @ gain)
    return float(np.linalg.norm(res, "fro"))


def riccati_solve(model: VintageModel, tol: float = 1e-10,
                  max_iter: int = 60) -> RiccatiSolution:
    """Newton-Kleinman solve of the discounted discrete Riccati system.

    The iteration starts from the zero gain, which is stabilizing because
    the uncontrolled one-step map is nilpotent, and each step solves a Stein
    equation for the closed-loop quadratic cost.
    """
    if not _is_lq(model):
        raise NotLQ("riccati oracle needs quadratic revenue, quadratic costs, "
                    "and zero terminal data")
    n = model.n_cells
    dt = model.dt
    ds = model.cell_width
    gamma = math.exp(-model.lam * dt)
    sg = math.sqrt(gamma)
    a_mat, b_mat = control_matrices(model)
    a_t = sg * a_mat
    b_t = sg * b_mat
    beta = model.revenue.beta
    eta = model.revenue.eta
    q_t = dt * beta * (ds * ds) * np.outer(model.alpha, model.alpha)
    r_weights = np.concatenate(
        [[model.cost.c0.w], np.full(n, model.cost.c1.w * ds)])
    r_t = dt * np.diag(r_weights)

    gain = np.zeros((n + 1, n))
    p_mat = np.zeros((n, n))
    residual = _dare_residual(p_mat, a_t, b_t, q_t, r_t)
    it = 0
    while residual > tol * (1.0 + np.linalg.norm(p_mat, "fro")):
        if it >= max_iter:
            raise NewtonDivergence(
                f"riccati residual {residual:.3e} after {max_iter} iterations")
        a_cl = a_t - b_t @ gain
        w = q_t + gain.T @ r_t @ gain
        p_mat = solve_discrete_lyapunov(a_cl.T, w)
        p_mat = 0.5 * (p_mat + p_mat.T)
        s = r_t + b_t.T @ p_mat @ b_t
        gain = np.linalg.solve(s, b_t.T @ p_mat @ a_t)
        residual = _dare_residual(p_mat, a_t, b_t, q_t, r_t)
        it += 1

    # linear term: (I - gamma*(A - B*K)') r_raw = dt * q_lin
    q_lin = -eta * ds * model.alpha
    m_cl = a_mat - b_mat @ gain
    r_raw = np.linalg.solve(np.eye(n) - gamma * m_cl.T, dt * q_lin)
    # constant term from the stationary completion of the square
    s_full = dt * np.diag(r_weights) + gamma * b_mat.T @ p_mat @ b_mat
    br = b_mat.T @ r_raw
    c_val = -(gamma ** 2) / (2.0 * (1.0 - gamma)) * float(
        br @ np.linalg.solve(s_full, br))

    return RiccatiSolution(p_mat / ds, r_raw / ds, c_val, residual, ds)


# ---------------------------------------------------------------------------
# Residual of the stationary equation
# ---------------------------------------------------------------------------


def upwind_generator(x: CapitalState, mu: float) -> np.ndarray:
    """(A_d x)_j = -(x_j - x_{j-1})/ds - mu*x_j with x_{-1} = 0."""
    v = x.values
    ds = x.grid.cell_width
    out = np.empty_like(v)
    out[0] = -v[0] / ds - mu * v[0]
    out[1:] = -(v[1:] - v[:-1]) / ds - mu * v[1:]
    return out


def hjb_residual(x: CapitalState, value_fn, grad_fn, model: VintageModel,
                 pair: ConjugatePair | None = None) -> float:
    """-lam*V(x) + <V'(x), A_d x>_H - h0*(-B*V'(x)) + g0(x).

    A zero residual on smooth states extrapolating to zero at age zero is
    what makes a candidate (value, gradient) pair a classical solution of
    the stationary equation at grid resolution.
    """
    if abs(boundary_trace(x.values)) > 1e-8 * max(x.h_norm(), 1e-300):
        raise NotInDomain("test state does not extrapolate to zero at age 0")
    if pair is None:
        from .costs import make_conjugate
        pair = make_conjugate(model.cost, model.cell_width)
    grad = grad_fn(x)
    ax = upwind_generator(x, model.mu)
    ds = model.cell_width
    return float(-model.lam * value_fn(x)
                 + ds * grad.vector @ ax
                 - hamiltonian(grad, pair)
                 + g0_eval(x, model))


def make_test_states(grid, amplitude: float = 1.0) -> list[CapitalState]:
    """Smooth states vanishing at age zero, first cell adjusted so the
    two-cell extrapolation to the boundary is exactly zero."""
    s = grid.centers
    s_max = grid.s_max
    shapes = [s * np.sin(k * math.pi * s / s_max) for k in range(1, 5)]
    shapes.append(np.exp(-(((s / s_max) - 0.6) / 0.15) ** 2))
    shapes.append((s / s_max) ** 2 * (1.0 - s / s_max))
    states = []
    for v in shapes:
        v = amplitude * v.copy()
        v[0] = v[1] / 3.0
        states.append(CapitalState(v, grid))
    return states
