"""Finite-horizon trajectory optimization by accelerated proximal gradient.

The discrete objective is

    J(u) = sum_k dt*exp(-lam*t_k) * (g0(y_k) + h0(u_k)) + exp(-lam*T)*phi0(y_N)

with y the exact-characteristics trajectory driven by u.  The costate solve
below is the exact transpose of that discrete map, so the returned gradient
differentiates J to rounding error; finite differences are used in tests
only.  Minimization runs in discount-scaled control coordinates, where the
quadratic cost part has an identity-like Hessian and box constraints stay
per-component, then converts back.
"""

from __future__ import annotations

import math
import time as _time
from dataclasses import dataclass

import numpy as np

from .costs import DualState, boundary_trace, g0_grad_stack
from .errors import NonFiniteObjective
from .model import CapitalState, ControlPath, VintageModel
from .transport import Trajectory, kappa, output_Q, solve_forward_raw, steps_for

__all__ = [
    "Costate",
    "SolveReport",
    "discount_weights",
    "objective_value",
    "solve_adjoint",
    "objective_gradient",
    "solve_finite_horizon",
    "value_finite",
]


def discount_weights(model: VintageModel, n_steps: int,
                     t_start: float = 0.0) -> np.ndarray:
    """Step weights rho_k = dt * exp(-lam * (t_start + k*dt))."""
    dt = model.dt
    k = np.arange(n_steps)
    return dt * np.exp(-model.lam * (t_start + k * dt))


@dataclass(frozen=True)
class Costate:
    """Dual trajectory in current-value units.

    duals[k] is the H-representer of the state-to-go derivative at step k
    with the discount exp(-lam*t_k) factored out, so the terminal dual equals
    the terminal-cost gradient exactly.  Boundary traces come from the same
    two-cell extrapolation used everywhere else.
    """

    grid: object
    t_start: float
    duals: np.ndarray

    def dual_state(self, k: int) -> DualState:
        v = self.duals[k]
        return DualState(v, boundary_trace(v))

    @property
    def n_steps(self) -> int:
        return self.duals.shape[0] - 1


@dataclass(frozen=True)
class SolveReport:
    value: float
    iterations: int
    prox_grad_norm: float
    epsilon: float
    wall_time: float
    converged: bool
    history: tuple = ()

    def history_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("iteration,objective,prox_grad_norm\n")
            for it, obj, g in self.history:
                fh.write(f"{it},{obj:.17g},{g:.12g}\n")

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "iterations": self.iterations,
            "prox_grad_norm": self.prox_grad_norm,
            "epsilon": self.epsilon,
            "wall_time": self.wall_time,
            "converged": self.converged,
        }


# ---------------------------------------------------------------------------
# Objective, adjoint, gradient (dense array forms)
# ---------------------------------------------------------------------------


def _objective_raw(states: np.ndarray, u0s: np.ndarray, u1s: np.ndarray,
                   model: VintageModel, t_start: float) -> float:
    n_steps = u0s.shape[0]
    ds = model.cell_width
    rho = discount_weights(model, n_steps, t_start)
    q = output_Q(states[:n_steps], model.alpha, ds)
    running = -np.asarray(model.revenue.value(q), dtype=float)
    running = running + 0.5 * model.cost.c0.w * u0s ** 2
    running = running + 0.5 * model.cost.c1.w * ds * np.einsum(
        "ij,ij->i", u1s, u1s)
    total = float(rho @ running)
    term = model.terminal.value(states[n_steps], ds)
    total += math.exp(-model.lam * (t_start + n_steps * model.dt)) * term
    if not math.isfinite(total):
        raise NonFiniteObjective("objective evaluated to a non-finite number")
    return total


def objective_value(x: CapitalState, u: ControlPath,
                    model: VintageModel) -> float:
    states = solve_forward_raw(x.values, u.u0s, u.u1s, model)
    return _objective_raw(states, u.u0s, u.u1s, model, u.t_start)


def _adjoint_raw(states: np.ndarray, model: VintageModel,
                 src: np.ndarray | None = None,
                 terminal: np.ndarray | None = None) -> np.ndarray:
    """Current-value costate for the given state stack.

    src defaults to the running-cost gradient rows g0'(y_k); the recursion is
    p_k = gamma * S^T p_{k+1} + dt * src_k with terminal p_N = phi0'(y_N),
    where S^T shifts one cell younger with the decay factor.  Filled column
    by column from the oldest age so the time axis stays vectorized.
    """
    n_steps = states.shape[0] - 1
    n = model.n_cells
    dt = model.dt
    gamma_c = math.exp(-model.lam * dt) * math.exp(-model.mu * dt)
    if src is None:
        src = g0_grad_stack(states[:n_steps], model)
    if terminal is None:
        terminal = model.terminal.gradient(states[n_steps], model.cell_width)
    duals = np.empty((n_steps + 1, n))
    duals[n_steps] = terminal
    if n_steps > 0:
        duals[:n_steps, n - 1] = dt * src[:, n - 1]
        for j in range(n - 2, -1, -1):
            duals[:n_steps, j] = gamma_c * duals[1:, j + 1] + dt * src[:, j]
    return duals


def solve_adjoint(traj: Trajectory, model: VintageModel) -> Costate:
    duals = _adjoint_raw(traj.values, model)
    return Costate(traj.grid, traj.t_start, duals)


def _gradient_raw(u0s: np.ndarray, u1s: np.ndarray, duals: np.ndarray,
                  model: VintageModel, t_start: float
                  ) -> tuple[np.ndarray, np.ndarray]:
    """U-representer gradient arrays (per step), same shapes as the controls."""
    n_steps = u0s.shape[0]
    dt = model.dt
    gamma = math.exp(-model.lam * dt)
    kap = kappa(model.mu, dt)
    kap_h = kappa(model.mu, dt / 2.0)
    a0 = math.exp(-model.mu * dt / 2.0)
    rho = discount_weights(model, n_steps, t_start)
    p_next = duals[1:]

    g_u0 = rho * (model.cost.c0.w * u0s + gamma * a0 * p_next[:, 0])
    g_u1 = model.cost.c1.w * u1s.copy()
    g_u1[:, :-1] += gamma * (kap / dt) * p_next[:, 1:]
    g_u1[:, 0] += gamma * (kap_h / dt) * p_next[:, 0]
    g_u1 *= rho[:, None]
    return g_u0, g_u1


def objective_gradient(u: ControlPath, traj: Trajectory, costate: Costate,
                       model: VintageModel) -> ControlPath:
    """Gradient of J with respect to the control path, as U-representers.

    The pairing with a perturbation du is sum_k (g_u0_k*du0_k +
    cell_width * g_u1_k . du1_k); discount factors are already included.
    """
    g_u0, g_u1 = _gradient_raw(u.u0s, u.u1s, costate.duals, model, u.t_start)
    return ControlPath(u.grid, u.t_start, g_u0, g_u1)


# ---------------------------------------------------------------------------
# FISTA in discount-scaled coordinates
# ---------------------------------------------------------------------------


class _ScaledProblem:
    """The objective seen through zeta = (d_k*u0_k, d_k*sqrt(ds)*u1_kj).

    With d_k = sqrt(rho_k) the quadratic control cost becomes a diagonal
    form with weights (w0, w1) and the Euclidean zeta-norm is the discounted
    L2 path norm, so the smooth objective is strongly convex with modulus
    min(w0, w1) and box constraints remain per-component intervals.
    """

    def __init__(self, x_values: np.ndarray, n_steps: int,
                 model: VintageModel, t_start: float):
        self.x_values = x_values
        self.n_steps = n_steps
        self.model = model
        self.t_start = t_start
        self.rho = discount_weights(model, n_steps, t_start)
        self.d = np.sqrt(self.rho)
        self.sqrt_ds = math.sqrt(model.cell_width)
        self.mu_strong = model.cost.min_weight
        self.bound0 = model.cost.c0.bound
        self.bound1 = model.cost.c1.bound

    def to_controls(self, zeta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        n = self.model.n_cells
        z = zeta.reshape(self.n_steps, n + 1)
        u0s = z[:, 0] / self.d
        u1s = z[:, 1:] / (self.d[:, None] * self.sqrt_ds)
        return u0s, u1s

    def value_only(self, zeta: np.ndarray) -> float:
        u0s, u1s = self.to_controls(zeta)
        states = solve_forward_raw(self.x_values, u0s, u1s, self.model)
        return _objective_raw(states, u0s, u1s, self.model, self.t_start)

    def value_grad(self, zeta: np.ndarray) -> tuple[float, np.ndarray]:
        u0s, u1s = self.to_controls(zeta)
        states = solve_forward_raw(self.x_values, u0s, u1s, self.model)
        val = _objective_raw(states, u0s, u1s, self.model, self.t_start)
        duals = _adjoint_raw(states, self.model)
        g_u0, g_u1 = _gradient_raw(u0s, u1s, duals, self.model, self.t_start)
        g = np.empty((self.n_steps, self.model.n_cells + 1))
        g[:, 0] = g_u0 / self.d
        g[:, 1:] = (self.sqrt_ds / self.d)[:, None] * g_u1
        return val, g.ravel()

    def project(self, zeta: np.ndarray) -> np.ndarray:
        if self.bound0 is None and self.bound1 is None:
            return zeta
        z = zeta.reshape(self.n_steps, self.model.n_cells + 1).copy()
        if self.bound0 is not None:
            cap = self.bound0 * self.d
            z[:, 0] = np.clip(z[:, 0], -cap, cap)
        if self.bound1 is not None:
            cap = (self.bound1 * self.sqrt_ds) * self.d
            z[:, 1:] = np.clip(z[:, 1:], -cap[:, None], cap[:, None])
        return z.ravel()


def _fista(prob: _ScaledProblem, zeta0: np.ndarray, tol: float,
           max_iter: int) -> tuple[np.ndarray, float, float, float, int, bool, list]:
    """Monotone accelerated proximal gradient with backtracking.

    Returns (zeta, value, prox_grad_norm, epsilon, iterations, converged,
    history) with history rows (iteration, objective, prox_grad_norm).
    """
    lip = prob.model.cost.max_weight
    x = prob.project(zeta0)
    fx = prob.value_only(x)
    y = x.copy()
    t_mom = 1.0
    g_norm = math.inf
    history: list[tuple] = []
    for it in range(1, max_iter + 1):
        fy, gy = prob.value_grad(y)
        while True:
            z = prob.project(y - gy / lip)
            step = z - y
            fz = prob.value_only(z)
            quad = fy + float(gy @ step) + 0.5 * lip * float(step @ step)
            if fz <= quad + 1e-12 * (1.0 + abs(fy)):
                break
            lip *= 2.0
            if lip > 1e16:
                raise NonFiniteObjective("backtracking step collapsed")
        g_norm = lip * math.sqrt(float(step @ step))
        if fz <= fx:
            x_new, fx_new = z, fz
        else:
            x_new, fx_new = x, fx
        t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t_mom * t_mom))
        y = x_new + (t_mom / t_next) * (z - x_new) \
            + ((t_mom - 1.0) / t_next) * (x_new - x)
        # adaptive restart: drop momentum when it points uphill
        if float((y - z) @ (z - x)) > 0.0:
            t_next = 1.0
            y = x_new.copy()
        x, fx, t_mom = x_new, fx_new, t_next
        history.append((it, fx, g_norm))
        if g_norm <= tol * (1.0 + abs(fx)):
            eps = g_norm * g_norm / (2.0 * prob.mu_strong)
            return x, fx, g_norm, eps, it, True, history
    eps = g_norm * g_norm / (2.0 * prob.mu_strong)
    return x, fx, g_norm, eps, max_iter, False, history


def solve_finite_horizon(
    x: CapitalState,
    T: float,
    model: VintageModel,
    tol: float = 1e-8,
    max_iter: int = 20000,
    t_start: float = 0.0,
    u_init: ControlPath | None = None,
) -> tuple[ControlPath, Trajectory, SolveReport]:
    """Minimize the discounted objective on [t_start, t_start + T].

    The returned report certifies J(u) - inf J <= epsilon through the
    prox-gradient norm and the strong convexity of the control cost.
    """
    model.grid.require_same(x.grid)
    t0 = _time.perf_counter()
    n_steps = steps_for(T, model.dt)
    if n_steps == 0:
        u = ControlPath.zeros(model.grid, t_start, 0)
        traj = Trajectory(model.grid, t_start, x.values[None, :].copy())
        val = math.exp(-model.lam * t_start) * model.terminal.value(
            x.values, model.cell_width)
        report = SolveReport(val, 0, 0.0, 0.0,
                             _time.perf_counter() - t0, True)
        return u, traj, report

    prob = _ScaledProblem(x.values, n_steps, model, t_start)
    if u_init is None:
        zeta0 = np.zeros(n_steps * (model.n_cells + 1))
    else:
        z = np.empty((n_steps, model.n_cells + 1))
        z[:, 0] = u_init.u0s * prob.d
        z[:, 1:] = u_init.u1s * (prob.d[:, None] * prob.sqrt_ds)
        zeta0 = z.ravel()
    zeta, val, g_norm, eps, iters, ok, hist = _fista(prob, zeta0, tol,
                                                     max_iter)
    u0s, u1s = prob.to_controls(zeta)
    u = ControlPath(model.grid, t_start, u0s, u1s)
    states = solve_forward_raw(x.values, u0s, u1s, model)
    traj = Trajectory(model.grid, t_start, states)
    report = SolveReport(val, iters, g_norm, eps,
                         _time.perf_counter() - t0, ok, tuple(hist))
    return u, traj, report


def value_finite(x: CapitalState, t: float, model: VintageModel,
                 tol: float = 1e-8, t_start: float = 0.0) -> float:
    """Optimal value of the discounted problem on a horizon of length t."""
    _, _, report = solve_finite_horizon(x, t, model, tol=tol, t_start=t_start)
    return report.value
