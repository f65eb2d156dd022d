"""Quantitative a-priori estimates: the theta function, the Hoelder-type
control bound, and the explicit trajectory growth bound.

Quadratures are chosen so the discrete inequalities hold exactly, not just
up to discretization error: the discounted path norm and the weighted
control integral both sample the exponential at step midpoints, and the
midpoint rule under-estimates every convex integrand, so replacing the
midpoint sum by the closed-form integral can only enlarge the right-hand
side.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import ControlPath, VintageModel
from .transport import Trajectory

__all__ = [
    "ThetaParams",
    "theta",
    "check_holder_bound",
    "check_state_bound",
    "injection_norm",
    "holder_extremal_path",
]


@dataclass(frozen=True)
class ThetaParams:
    lam: float
    omega: float
    p: float

    def __post_init__(self) -> None:
        if self.p <= 1:
            raise ValueError("theta needs p > 1")

    @property
    def q(self) -> float:
        return self.p / (self.p - 1.0)

    @staticmethod
    def of(model: VintageModel) -> "ThetaParams":
        return ThetaParams(model.lam, model.omega, model.p)


def theta(t: float, s: float, params: ThetaParams) -> float:
    """The two-case growth kernel of the control-to-state estimate."""
    lam, om, p = params.lam, params.omega, params.p
    if lam == om * p:
        return abs(s - t)
    a = params.q * (lam / p - om)
    return (p - 1.0) / abs(lam - p * om) * abs(math.exp(a * t)
                                               - math.exp(a * s))


def _midpoints(u: ControlPath) -> np.ndarray:
    return u.t_start + (np.arange(u.n_steps) + 0.5) * u.dt


def check_holder_bound(u: ControlPath, params: ThetaParams) -> float:
    """Margin of int exp(-omega*tau)|u| dtau <= theta^(1/q) * ||u||.

    Both sides use midpoint sampling over [t_start, t_end]; the margin is
    rhs - lhs and is nonnegative for every path.
    """
    mids = _midpoints(u)
    norms = u.u_norms()
    lhs = float(np.sum(np.exp(-params.omega * mids) * norms) * u.dt)
    th = theta(u.t_start, u.t_end, params)
    rhs = th ** (1.0 / params.q) * u.lp_lambda_norm(params.lam, params.p)
    return rhs - lhs


def injection_norm(model: VintageModel) -> float:
    """Discrete operator norm of the control injection, per unit time.

    Largest singular value of the one-step injection map between the
    orthonormalized control and state coordinates, divided by the step
    length; this is the constant the forward solver actually realizes.
    """
    from .hjb import control_matrices

    _, b_mat = control_matrices(model)
    ds = model.cell_width
    n = model.n_cells
    # orthonormal coordinates: state scales by sqrt(ds), controls by
    # (1, sqrt(ds), ...) per the U-norm weights
    col_scale = np.concatenate([[1.0], np.full(n, math.sqrt(ds))])
    scaled = math.sqrt(ds) * b_mat / col_scale[None, :]
    sigma = float(np.linalg.norm(scaled, 2))
    return sigma / model.dt


def check_state_bound(x_norm: float, u: ControlPath, traj: Trajectory,
                      params: ThetaParams, model: VintageModel) -> float:
    """Minimum margin of |y(tau)|_H <= C*exp(omega*tau)*(|x| + theta^(1/q)||u||).

    C = max(injection norm, exp(|omega|*t_start)) * exp(|omega|*dt); the
    margin is taken over every grid time of the trajectory.
    """
    om = params.omega
    c_const = max(injection_norm(model),
                  math.exp(abs(om) * u.t_start)) * math.exp(abs(om) * u.dt)
    norms = traj.h_norms()
    t0 = u.t_start
    margin = math.inf
    mids = _midpoints(u)
    disc = np.exp(-params.lam * mids)
    u_p = u.u_norms() ** params.p
    for k in range(len(norms)):
        tau = t0 + k * u.dt
        if k == 0:
            path_norm = 0.0
        else:
            path_norm = float(np.sum(disc[:k] * u_p[:k]) * u.dt) ** (
                1.0 / params.p)
        rhs = c_const * math.exp(om * (tau - t0)) * (
            x_norm + theta(t0, tau, params) ** (1.0 / params.q) * path_norm)
        margin = min(margin, rhs - norms[k])
    return margin


def holder_extremal_path(model: VintageModel, n_steps: int,
                         scale: float = 1.0) -> ControlPath:
    """Boundary-only path |u(tau)| ~ exp((lam-omega)*tau/(p-1)) that makes
    the Hoelder bound an equality up to midpoint-quadrature slack."""
    mids = (np.arange(n_steps) + 0.5) * model.dt
    rate = (model.lam - model.omega) / (model.p - 1.0)
    u0s = scale * np.exp(rate * mids)
    u1s = np.zeros((n_steps, model.n_cells))
    return ControlPath(model.grid, 0.0, u0s, u1s)
