"""Registry of runnable audits composing the other modules' checks.

Every mechanically checkable statement gets a named audit returning a
margin; nonnegative margin means pass.  The command-line `verify` runner
iterates the registry, so a check added here is automatically part of the
suite, and the test suite counts the registry to keep the two in sync.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import estimates, hjb, value
from .costs import make_conjugate
from .errors import InfeasibleControl, NotLQ
from .feedback import (
    OnDemand,
    RiccatiAffine,
    ZeroGradient,
    closed_loop_solve,
    feedback_control,
    verification_gap,
)
from .model import CapitalState, ControlPath, VintageModel
from .optimize import (
    objective_gradient,
    objective_value,
    solve_adjoint,
    solve_finite_horizon,
)
from .transport import solve_forward

__all__ = ["AuditResult", "REGISTRY", "run_audit", "run_all", "make_provider",
           "random_state", "random_path"]


@dataclass(frozen=True)
class AuditResult:
    name: str
    margin: float
    passed: bool

    def to_dict(self) -> dict:
        return {"name": self.name, "margin": self.margin, "pass": self.passed}


def random_state(rng: np.random.Generator, model: VintageModel,
                 scale: float = 1.0) -> CapitalState:
    v = scale * rng.standard_normal(model.n_cells)
    return CapitalState(v, model.grid)


def random_path(rng: np.random.Generator, model: VintageModel,
                n_steps: int, scale: float = 1.0) -> ControlPath:
    u0s = scale * rng.standard_normal(n_steps)
    u1s = scale * rng.standard_normal((n_steps, model.n_cells))
    return ControlPath(model.grid, 0.0, u0s, u1s)


def make_provider(model: VintageModel, tol: float = 1e-7):
    """Pick the cheapest valid gradient provider for the instance."""
    if model.revenue.is_zero:
        return ZeroGradient(model.n_cells)
    try:
        sol = hjb.riccati_solve(model)
        return RiccatiAffine.from_solution(sol)
    except NotLQ:
        return OnDemand(model, horizon=6.0 / model.lam, tol=1e-6)


def _is_lq(model: VintageModel) -> bool:
    from .model import QuadraticCost, QuadraticRevenue, ZeroTerminal
    return (isinstance(model.revenue, QuadraticRevenue)
            and isinstance(model.cost.c0, QuadraticCost)
            and isinstance(model.cost.c1, QuadraticCost)
            and isinstance(model.terminal, ZeroTerminal))


# ---------------------------------------------------------------------------
# Individual audits: fn(model, rng, tol) -> margin (>= 0 passes)
# ---------------------------------------------------------------------------

REGISTRY: dict[str, dict] = {}


def _register(name: str, applies: Callable[[VintageModel], bool] = lambda m: True):
    def deco(fn):
        REGISTRY[name] = {"fn": fn, "applies": applies}
        return fn
    return deco


@_register("t_independence")
def _audit_t_independence(model, rng, tol):
    x = random_state(rng, model, 0.5)
    res = value.t_independence_check(x, 1.0, model)
    return 1e-8 - res


@_register("scaling_law")
def _audit_scaling(model, rng, tol):
    x = random_state(rng, model, 0.5)
    res = value.scaling_law_check(x, 0.5, model, tol=tol)
    return 1e-6 - res


@_register("dpp")
def _audit_dpp(model, rng, tol):
    x = random_state(rng, model, 0.5)
    res = value.dpp_residual(x, 1.0, 3.0, model)
    return 1e-4 - res


@_register("value_convergence")
def _audit_value_convergence(model, rng, tol):
    x = random_state(rng, model, 0.7)
    probe = value.psi_infinity(x, model, tol=1e-5)
    if len(probe.deltas) < 2:
        return 0.0
    rate = value.fit_delta_rate(probe)
    return rate - model.lam / 2.0


@_register("hjb_residual",
           applies=lambda m: _is_lq(m) or m.revenue.is_zero)
def _audit_hjb(model, rng, tol):
    if model.revenue.is_zero:
        def value_fn(x):
            return 0.0

        def grad_fn(x):
            from .costs import DualState
            return DualState(np.zeros(model.n_cells), 0.0)
    else:
        sol = hjb.riccati_solve(model)
        value_fn, grad_fn = sol.value, sol.gradient
    margin = math.inf
    for x in hjb.make_test_states(model.grid):
        res = abs(hjb.hjb_residual(x, value_fn, grad_fn, model))
        margin = min(margin, 5e-3 * (1.0 + x.h_norm() ** 2) - res)
    return margin


@_register("riccati_equivalence", applies=_is_lq)
def _audit_riccati(model, rng, tol):
    sol = hjb.riccati_solve(model)
    margin = math.inf
    for _ in range(3):
        x = random_state(rng, model, 0.6)
        probe = value.psi_infinity(x, model, tol=1e-5)
        diff = abs(probe.limit - sol.value(x))
        margin = min(margin, 1e-3 * (1.0 + x.h_norm() ** 2) - diff)
    return margin


@_register("gradient_check")
def _audit_gradient(model, rng, tol):
    x = random_state(rng, model, 0.5)
    u = random_path(rng, model, int(round(2.0 / model.dt)), 0.1)
    if model.cost.boxed:
        u = ControlPath(model.grid, 0.0, np.clip(u.u0s, -0.5, 0.5),
                        np.clip(u.u1s, -0.5, 0.5))
    traj = solve_forward(x, u, model)
    costate = solve_adjoint(traj, model)
    grad = objective_gradient(u, traj, costate, model)
    ds = model.cell_width
    worst = 0.0
    for _ in range(5):
        d = random_path(rng, model, u.n_steps, 1.0)
        exact = float(grad.u0s @ d.u0s
                      + ds * np.sum(grad.u1s * d.u1s))
        h = 1e-5
        up = ControlPath(model.grid, 0.0, u.u0s + h * d.u0s,
                         u.u1s + h * d.u1s)
        dn = ControlPath(model.grid, 0.0, u.u0s - h * d.u0s,
                         u.u1s - h * d.u1s)
        fd = (objective_value(x, up, model)
              - objective_value(x, dn, model)) / (2 * h)
        worst = max(worst, abs(exact - fd) / max(abs(fd), 1e-12))
    return 1e-6 - worst


@_register("verification_gap")
def _audit_verification(model, rng, tol):
    provider = make_provider(model)
    t_sim = (10.0 if not isinstance(provider, OnDemand) else 4.0) / model.lam
    x = random_state(rng, model, 0.5)
    traj, u = closed_loop_solve(x, t_sim, provider, model)
    try:
        gaps = verification_gap(traj, u, provider, model)
    except InfeasibleControl:
        return -math.inf
    min_gap = float(np.min(gaps)) if gaps.size else 0.0
    total = float(np.sum(gaps)) * model.dt
    return min(min_gap + 1e-12, 1e-4 - total)


@_register("holder_random")
def _audit_holder_random(model, rng, tol):
    params = estimates.ThetaParams.of(model)
    margin = math.inf
    for _ in range(200):
        n_steps = int(rng.integers(1, 80))
        u = random_path(rng, model, n_steps, float(rng.uniform(0.1, 3.0)))
        margin = min(margin, estimates.check_holder_bound(u, params))
    return margin


@_register("holder_extremal")
def _audit_holder_extremal(model, rng, tol):
    params = estimates.ThetaParams.of(model)
    u = estimates.holder_extremal_path(model, int(round(1.0 / model.dt)))
    margin = estimates.check_holder_bound(u, params)
    rhs = (estimates.theta(u.t_start, u.t_end, params) ** (1.0 / params.q)
           * u.lp_lambda_norm(params.lam, params.p))
    return 1e-6 - margin / rhs


@_register("state_bound")
def _audit_state_bound(model, rng, tol):
    params = estimates.ThetaParams.of(model)
    margin = math.inf
    for _ in range(30):
        x = random_state(rng, model, float(rng.uniform(0.1, 2.0)))
        u = random_path(rng, model, int(rng.integers(1, 120)),
                        float(rng.uniform(0.1, 2.0)))
        traj = solve_forward(x, u, model)
        margin = min(margin, estimates.check_state_bound(
            x.h_norm(), u, traj, params, model))
    return margin


@_register("box_constraints", applies=lambda m: m.cost.boxed)
def _audit_box(model, rng, tol):
    bound0 = model.cost.c0.bound or math.inf
    bound1 = model.cost.c1.bound or math.inf
    x = random_state(rng, model, 10.0)
    u, _, _ = solve_finite_horizon(x, 2.0, model, tol=1e-6)
    worst = max(float(np.max(np.abs(u.u0s))) - bound0,
                float(np.max(np.abs(u.u1s))) - bound1)
    pair = make_conjugate(model.cost, model.cell_width)
    provider = make_provider(model)
    fb = feedback_control(x, provider, pair)
    worst = max(worst, abs(fb.u0) - bound0,
                float(np.max(np.abs(fb.u1))) - bound1)
    return -worst


# ---------------------------------------------------------------------------
# Runners
# ---------------------------------------------------------------------------


def run_audit(name: str, model: VintageModel, seed: int = 42,
              tol: float = 1e-4) -> AuditResult:
    entry = REGISTRY[name]
    rng = np.random.default_rng(seed)
    margin = float(entry["fn"](model, rng, tol))
    return AuditResult(name, margin, margin >= 0.0)


def run_all(model: VintageModel, seed: int = 42,
            tol: float = 1e-4) -> list[AuditResult]:
    out = []
    for name, entry in REGISTRY.items():
        if entry["applies"](model):
            out.append(run_audit(name, model, seed=seed, tol=tol))
    return out
