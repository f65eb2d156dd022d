"""Infinite-horizon value function as the limit of finite-horizon solves.

psi_infinity escalates the horizon geometrically until successive values
settle; the time-zero costate of the converged solve realizes the value
gradient.  The scaling-law and horizon-independence audits exploit the fact
that restarting the discounted problem at a later absolute time multiplies
the whole objective by a known factor, so two solver runs must agree up to
their certificates.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .costs import DualState
from .errors import NoConvergence
from .model import CapitalState, VintageModel
from .optimize import (
    discount_weights,
    solve_adjoint,
    solve_finite_horizon,
    value_finite,
)
from .transport import output_Q, steps_for

__all__ = [
    "ValueProbe",
    "psi_infinity",
    "grad_psi_infinity",
    "scaling_law_check",
    "t_independence_check",
    "dpp_residual",
    "fit_delta_rate",
]

INNER_TOL = 1e-9


@dataclass(frozen=True)
class ValueProbe:
    """Finite-horizon values on an escalating horizon ladder, with the limit
    reported as the last converged value."""

    horizons: tuple[float, ...]
    values: tuple[float, ...]
    deltas: tuple[float, ...]
    limit: float
    t_used: float

    def to_dict(self) -> dict:
        return {
            "horizons": list(self.horizons),
            "values": list(self.values),
            "deltas": list(self.deltas),
            "limit": self.limit,
            "t_used": self.t_used,
        }

    def to_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w") as fh:
            fh.write("horizon,value,delta\n")
            for i, (h, v) in enumerate(zip(self.horizons, self.values)):
                d = self.deltas[i - 1] if i > 0 else math.nan
                fh.write(f"{h:.12g},{v:.17g},{d:.12g}\n")


def _align(t: float, dt: float) -> float:
    """Round a horizon up to the grid so every solve is step-aligned."""
    return max(1, int(math.ceil(t / dt - 1e-9))) * dt


def psi_infinity(x: CapitalState, model: VintageModel, tol: float = 1e-4,
                 t0: float | None = None, growth: float = 1.5,
                 inner_tol: float = INNER_TOL,
                 t_start: float = 0.0,
                 t_max: float | None = None) -> ValueProbe:
    """Value at horizon t0, growth*t0, ... until two successive values agree.

    Raises NoConvergence past t_max (default 100/lambda).  Each horizon is
    solved from scratch so the ladder entries are independent measurements.
    """
    if t0 is None:
        t0 = 2.0 / model.lam
    if t_max is None:
        t_max = 100.0 / model.lam
    dt = model.dt
    horizons: list[float] = []
    values: list[float] = []
    deltas: list[float] = []
    t = _align(t0, dt)
    while True:
        v = value_finite(x, t, model, tol=inner_tol, t_start=t_start)
        if values:
            deltas.append(abs(v - values[-1]))
        horizons.append(t)
        values.append(v)
        if deltas and deltas[-1] < tol:
            return ValueProbe(tuple(horizons), tuple(values), tuple(deltas),
                              values[-1], t)
        if t >= t_max:
            raise NoConvergence(
                f"value deltas not below {tol} by horizon {t_max}")
        t = _align(min(t * growth, t_max), dt)


def grad_psi_infinity(x: CapitalState, model: VintageModel,
                      tol: float = 1e-4,
                      inner_tol: float = INNER_TOL) -> DualState:
    """Time-zero costate of the converged-horizon optimal solve."""
    probe = psi_infinity(x, model, tol=tol, inner_tol=inner_tol)
    _, traj, _ = solve_finite_horizon(x, probe.t_used, model, tol=inner_tol)
    costate = solve_adjoint(traj, model)
    return costate.dual_state(0)


def scaling_law_check(x: CapitalState, t: float, model: VintageModel,
                      tol: float = 1e-4,
                      inner_tol: float = INNER_TOL) -> float:
    """Relative defect of value(started at t) = exp(-lam*t) * value(at 0)."""
    probe = psi_infinity(x, model, tol=tol, inner_tol=inner_tol)
    z_val = value_finite(x, probe.t_used, model, tol=inner_tol, t_start=t)
    psi = probe.limit
    return abs(z_val - math.exp(-model.lam * t) * psi) / (1.0 + abs(psi))


def t_independence_check(x: CapitalState, t: float, model: VintageModel,
                         inner_tol: float = 1e-10) -> float:
    """Defect of solving the same horizon-t problem embedded at offset t.

    The embedded run discounts from absolute time t, so its value is exactly
    exp(-lam*t) times the baseline; the residual measures solver and
    floating-point disagreement only.
    """
    v1 = value_finite(x, t, model, tol=inner_tol)
    v2 = value_finite(x, t, model, tol=inner_tol, t_start=t)
    return abs(v1 - math.exp(model.lam * t) * v2)


def dpp_residual(x: CapitalState, s: float, t: float, model: VintageModel,
                 tol: float = 1e-8) -> float:
    """Dynamic-programming split: cost on [0,s) plus discounted value at s."""
    if not 0.0 < s <= t:
        raise ValueError("need 0 < s <= t")
    u, traj, report = solve_finite_horizon(x, t, model, tol=tol)
    m = steps_for(s, model.dt)
    ds = model.cell_width
    rho = discount_weights(model, m)
    q = output_Q(traj.values[:m], model.alpha, ds)
    running = -np.asarray(model.revenue.value(q), dtype=float)
    running = running + 0.5 * model.cost.c0.w * u.u0s[:m] ** 2
    running = running + 0.5 * model.cost.c1.w * ds * np.einsum(
        "ij,ij->i", u.u1s[:m], u.u1s[:m])
    partial = float(rho @ running)
    tail = value_finite(traj.state(m), t - s, model, tol=tol)
    return abs(report.value - (partial + math.exp(-model.lam * s) * tail))


def fit_delta_rate(probe: ValueProbe) -> float:
    """Least-squares decay rate kappa of deltas ~ C*exp(-kappa*t)."""
    if len(probe.deltas) < 2:
        return math.inf
    ts = np.asarray(probe.horizons[1:], dtype=float)
    ys = np.log(np.maximum(np.asarray(probe.deltas, dtype=float), 1e-300))
    slope = np.polyfit(ts, ys, 1)[0]
    return -float(slope)
