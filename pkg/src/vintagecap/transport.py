"""Exact-characteristics propagation of the capital-age density.

The transport operator shifts mass one cell per step while applying the
exponential depreciation factor, so a time step equal to the cell width is
exact along characteristics.  Distributed investment is accumulated with the
exact exponential weight of the Duhamel integral, and boundary investment
enters as inflow data for the age-zero cell.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import MisalignedTau, NonFiniteState
from .model import AgeGrid, CapitalState, ControlPath, VintageModel

__all__ = [
    "Trajectory",
    "apply_semigroup",
    "mild_step",
    "solve_forward",
    "solve_forward_raw",
    "output_Q",
    "kappa",
    "steps_for",
]


def kappa(mu: float, dt: float) -> float:
    """Duhamel weight for a piecewise-constant source: (1 - exp(-mu*dt))/mu.

    The limit as mu -> 0 is dt; expm1 keeps the small-mu evaluation stable.
    """
    if mu == 0.0:
        return dt
    return -math.expm1(-mu * dt) / mu


def steps_for(tau: float, dt: float) -> int:
    """Number of steps covering a duration that must align with the grid."""
    k = tau / dt
    k_round = round(k)
    if k_round < 0 or abs(k - k_round) > 1e-12 * max(1.0, abs(k)):
        raise MisalignedTau(f"duration {tau} is not a multiple of dt={dt}")
    return int(k_round)


@dataclass(frozen=True)
class Trajectory:
    """States at the grid times t_start, t_start + dt, ..., t_start + N*dt.

    values has shape (N + 1, n_cells); row k is the state at step k.
    """

    grid: AgeGrid
    t_start: float
    values: np.ndarray

    @property
    def dt(self) -> float:
        return self.grid.cell_width

    @property
    def n_steps(self) -> int:
        return self.values.shape[0] - 1

    @property
    def times(self) -> np.ndarray:
        return self.t_start + np.arange(self.values.shape[0]) * self.dt

    def state(self, k: int) -> CapitalState:
        return CapitalState(self.values[k], self.grid)

    def h_norms(self) -> np.ndarray:
        ds = self.grid.cell_width
        return np.sqrt(ds * np.einsum("ij,ij->i", self.values, self.values))

    def to_csv(self, path: str | Path) -> None:
        """Write rows (time, age, value), row-major by time, with a header."""
        times = self.times
        ages = self.grid.centers
        n_t, n_s = self.values.shape
        with open(path, "w") as fh:
            fh.write("time,age,value\n")
            for k in range(n_t):
                t = times[k]
                row = self.values[k]
                for j in range(n_s):
                    fh.write(f"{t:.12g},{ages[j]:.12g},{row[j]:.17g}\n")


def apply_semigroup(x: CapitalState, tau: float, mu: float) -> CapitalState:
    """Shift the density older by tau with decay exp(-mu*tau), zero inflow."""
    k = steps_for(tau, x.grid.cell_width)
    n = x.grid.n_cells
    out = np.zeros(n)
    if k < n:
        out[k:] = math.exp(-mu * tau) * x.values[: n - k]
    return CapitalState(out, x.grid)


def mild_step(y: CapitalState, u0: float, u1: np.ndarray,
              model: VintageModel) -> CapitalState:
    """One exact-characteristics step of length dt = cell_width."""
    model.grid.require_same(y.grid)
    dt = model.dt
    mu = model.mu
    c = math.exp(-mu * dt)
    kap = kappa(mu, dt)
    out = np.empty(model.n_cells)
    out[1:] = c * y.values[:-1] + kap * u1[:-1]
    out[0] = math.exp(-mu * dt / 2.0) * u0 + kappa(mu, dt / 2.0) * u1[0]
    return CapitalState(out, y.grid)


def solve_forward_raw(x_values: np.ndarray, u0s: np.ndarray, u1s: np.ndarray,
                      model: VintageModel) -> np.ndarray:
    """Dense forward solve; returns states of shape (n_steps + 1, n_cells).

    Vectorized over the time axis: the recursion is a one-cell shift per
    step, so filling age cell j from age cell j-1 across all times costs one
    array operation, and the whole solve is n_cells such operations.
    """
    n_steps = u0s.shape[0]
    n = model.n_cells
    dt = model.dt
    mu = model.mu
    c = math.exp(-mu * dt)
    kap = kappa(mu, dt)
    a0 = math.exp(-mu * dt / 2.0)
    kap_h = kappa(mu, dt / 2.0)

    states = np.empty((n_steps + 1, n))
    states[0] = x_values
    states[1:, 0] = a0 * u0s + kap_h * u1s[:, 0]
    for j in range(1, n):
        states[1:, j] = c * states[:-1, j - 1] + kap * u1s[:, j - 1]
    if not np.all(np.isfinite(states)):
        raise NonFiniteState("forward solve produced non-finite values")
    return states


def solve_forward(x: CapitalState, u: ControlPath,
                  model: VintageModel) -> Trajectory:
    model.grid.require_same(x.grid)
    model.grid.require_same(u.grid)
    values = solve_forward_raw(x.values, u.u0s, u.u1s, model)
    return Trajectory(model.grid, u.t_start, values)


def output_Q(values: np.ndarray, alpha: np.ndarray, cell_width: float):
    """Output rate Q = cell_width * sum_j alpha_j * y_j (midpoint quadrature).

    Accepts a single state vector or a (n_times, n_cells) stack.
    """
    return cell_width * (np.asarray(values) @ alpha)
