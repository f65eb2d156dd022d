"""Running cost, control cost, and the convex conjugate feedback kernel.

The running cost is g0(y) = -R(Q(y)) with Q the age-weighted output.  The
control cost h0(u) = c0(u0) + cell_width * sum_j c1(u1_j) is separable, so
its conjugate and the conjugate's derivative are closed-form per component.
The conjugate derivative evaluated at -B*p is the feedback law.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import InfeasibleControl, MissingTrace
from .model import (
    BoxedQuadraticCost,
    CapitalState,
    Control,
    CostSpec,
    QuadraticCost,
    VintageModel,
)
from .transport import output_Q

__all__ = [
    "DualState",
    "ConjugatePair",
    "g0_eval",
    "g0_grad",
    "h0_eval",
    "make_conjugate",
    "hamiltonian",
    "boundary_trace",
    "adjoint_B",
]


@dataclass(frozen=True)
class DualState:
    """A dual (costate-like) element: grid vector plus its age-zero trace."""

    vector: np.ndarray
    trace: float | None = None

    def require_trace(self) -> float:
        if self.trace is None:
            raise MissingTrace("dual element has no boundary trace attached")
        return self.trace


def boundary_trace(vector: np.ndarray) -> float:
    """Value at age zero by linear extrapolation from the first two cells."""
    return float(1.5 * vector[0] - 0.5 * vector[1])


def with_trace(vector: np.ndarray) -> DualState:
    return DualState(vector, boundary_trace(vector))


def adjoint_B(p: DualState) -> tuple[float, np.ndarray]:
    """B*p = (p(0), p): pair the boundary trace with the grid vector."""
    return p.require_trace(), p.vector


# ---------------------------------------------------------------------------
# Running cost
# ---------------------------------------------------------------------------


def g0_eval(y: CapitalState, model: VintageModel) -> float:
    """g0(y) = -R(Q(y))."""
    q = output_Q(y.values, model.alpha, model.cell_width)
    return -float(model.revenue.value(q))


def g0_grad(y: CapitalState, model: VintageModel) -> np.ndarray:
    """Gradient of g0 in the grid inner product: -R'(Q(y)) * alpha."""
    q = output_Q(y.values, model.alpha, model.cell_width)
    return -float(model.revenue.derivative(q)) * model.alpha


def g0_grad_stack(values: np.ndarray, model: VintageModel) -> np.ndarray:
    """Row-wise g0 gradient for a (n_times, n_cells) stack of states."""
    q = output_Q(values, model.alpha, model.cell_width)
    rp = np.asarray(model.revenue.derivative(q), dtype=float)
    return -rp[:, None] * model.alpha[None, :]


def h0_eval(u: Control, cost: CostSpec, cell_width: float) -> float:
    """Control cost; raises when a boxed component is infeasible."""
    if not (cost.c0.feasible(u.u0) and cost.c1.feasible(u.u1)):
        raise InfeasibleControl("control lies outside the cost box")
    return float(cost.c0.value(u.u0)
                 + cell_width * np.sum(cost.c1.value(u.u1)))


# ---------------------------------------------------------------------------
# Convex conjugates
# ---------------------------------------------------------------------------


def _scalar_conjugate(spec) -> tuple[Callable, Callable]:
    """Closed-form conjugate and conjugate-derivative for one scalar cost."""
    w = spec.w
    if isinstance(spec, QuadraticCost):
        def star(q):
            return np.square(q) / (2.0 * w)

        def star_prime(q):
            return np.asarray(q, dtype=float) / w

        return star, star_prime
    if isinstance(spec, BoxedQuadraticCost):
        m = spec.bound

        def star(q):
            q = np.asarray(q, dtype=float)
            aq = np.abs(q)
            inner = np.square(q) / (2.0 * w)
            outer = m * aq - 0.5 * w * m * m
            return np.where(aq <= w * m, inner, outer)

        def star_prime(q):
            return np.clip(np.asarray(q, dtype=float) / w, -m, m)

        return star, star_prime
    raise TypeError(f"unsupported cost spec {spec!r}")


@dataclass(frozen=True)
class ConjugatePair:
    """h0, its conjugate h0*, and the conjugate's derivative.

    Dual arguments (q0, q1) live in the same weighted space as controls: the
    conjugate of u1 |-> cell_width * sum c1(u1_j) under the cell_width-weighted
    pairing is cell_width * sum c1*(q1_j) with per-cell dual argument.
    """

    cost: CostSpec
    cell_width: float

    def h0(self, u: Control) -> float:
        return h0_eval(u, self.cost, self.cell_width)

    def h0_star(self, q0: float, q1: np.ndarray) -> float:
        s0, _ = _scalar_conjugate(self.cost.c0)
        s1, _ = _scalar_conjugate(self.cost.c1)
        return float(s0(q0) + self.cell_width * np.sum(s1(q1)))

    def h0_star_prime(self, q0: float, q1: np.ndarray) -> Control:
        _, d0 = _scalar_conjugate(self.cost.c0)
        _, d1 = _scalar_conjugate(self.cost.c1)
        return Control(float(d0(q0)), d1(q1))


def make_conjugate(cost: CostSpec, cell_width: float) -> ConjugatePair:
    return ConjugatePair(cost, cell_width)


def hamiltonian(p: DualState, pair: ConjugatePair) -> float:
    """h0*(-B*p), the Hamiltonian term of the stationary equation."""
    trace, vector = adjoint_B(p)
    return pair.h0_star(-trace, -vector)
