"""Domain types and parameter validation.

The state is a capital-age density on a uniform cell-centered grid over
[0, s_max]; controls pair a boundary investment scalar with a distributed
investment vector.  Model construction validates the discount/growth
inequalities and records which parameter regime (constrained controls vs
sublinear revenue) the instance satisfies.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    AlphaBoundary,
    ConfigError,
    GridError,
    GridMismatch,
    RegimeViolation,
)

__all__ = [
    "AgeGrid",
    "CapitalState",
    "Control",
    "ControlPath",
    "QuadraticRevenue",
    "SaturatedQuadraticRevenue",
    "QuadraticCost",
    "BoxedQuadraticCost",
    "CostSpec",
    "ZeroTerminal",
    "QuadraticTerminal",
    "VintageModel",
    "build_model",
    "load_model",
    "canonical_instance",
    "canonical_instances",
    "builtin_state",
    "CANONICAL_NAMES",
]


# ---------------------------------------------------------------------------
# Grid, state, control
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AgeGrid:
    """Uniform cell-centered grid on [0, s_max] with cell_width = s_max/n_cells."""

    s_max: float
    n_cells: int

    def __post_init__(self) -> None:
        if not (self.s_max > 0 and math.isfinite(self.s_max)):
            raise GridError(f"s_max must be a positive finite number, got {self.s_max}")
        if self.n_cells < 2:
            raise GridError(f"n_cells must be at least 2, got {self.n_cells}")

    @property
    def cell_width(self) -> float:
        return self.s_max / self.n_cells

    @property
    def centers(self) -> np.ndarray:
        """Cell-center ages s_j = (j + 1/2) * cell_width."""
        ds = self.cell_width
        return (np.arange(self.n_cells) + 0.5) * ds

    def require_same(self, other: "AgeGrid") -> None:
        if self != other:
            raise GridMismatch(f"grids differ: {self} vs {other}")


@dataclass(frozen=True)
class CapitalState:
    """Capital density per age cell, an element of the discrete L2(0, s_max)."""

    values: np.ndarray
    grid: AgeGrid

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.grid.n_cells,):
            raise GridMismatch(
                f"state has {values.shape} values for a {self.grid.n_cells}-cell grid"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("capital state has non-finite entries")
        values = values.copy()
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    def h_norm(self) -> float:
        """Discrete L2 norm sqrt(cell_width * sum of squares)."""
        return math.sqrt(self.grid.cell_width * float(self.values @ self.values))

    def __add__(self, other: "CapitalState") -> "CapitalState":
        self.grid.require_same(other.grid)
        return CapitalState(self.values + other.values, self.grid)

    def __sub__(self, other: "CapitalState") -> "CapitalState":
        self.grid.require_same(other.grid)
        return CapitalState(self.values - other.values, self.grid)

    def __rmul__(self, scalar: float) -> "CapitalState":
        return CapitalState(float(scalar) * self.values, self.grid)


def h_inner(a: np.ndarray, b: np.ndarray, cell_width: float) -> float:
    """Inner product of the discrete L2(0, s_max)."""
    return cell_width * float(np.dot(a, b))


@dataclass(frozen=True)
class Control:
    """One control value: boundary investment u0 plus distributed investment u1."""

    u0: float
    u1: np.ndarray

    def __post_init__(self) -> None:
        u1 = np.asarray(self.u1, dtype=float)
        if not (math.isfinite(self.u0) and np.all(np.isfinite(u1))):
            raise ValueError("control has non-finite entries")
        u1 = u1.copy()
        u1.flags.writeable = False
        object.__setattr__(self, "u1", u1)

    def u_norm(self, cell_width: float) -> float:
        return math.sqrt(self.u0 ** 2 + cell_width * float(self.u1 @ self.u1))


@dataclass(frozen=True)
class ControlPath:
    """Piecewise-constant control on [t_start, t_end] with dt equal to the cell width.

    Controls are stored densely: u0s has shape (n_steps,) and u1s has shape
    (n_steps, n_cells).  Step k covers [t_start + k*dt, t_start + (k+1)*dt).
    """

    grid: AgeGrid
    t_start: float
    u0s: np.ndarray
    u1s: np.ndarray

    def __post_init__(self) -> None:
        u0s = np.asarray(self.u0s, dtype=float)
        u1s = np.asarray(self.u1s, dtype=float)
        if u1s.shape != (u0s.shape[0], self.grid.n_cells):
            raise GridMismatch(
                f"control arrays have shapes {u0s.shape} / {u1s.shape} "
                f"for a {self.grid.n_cells}-cell grid"
            )
        object.__setattr__(self, "u0s", u0s)
        object.__setattr__(self, "u1s", u1s)

    @property
    def dt(self) -> float:
        return self.grid.cell_width

    @property
    def n_steps(self) -> int:
        return self.u0s.shape[0]

    @property
    def t_end(self) -> float:
        return self.t_start + self.n_steps * self.dt

    def control(self, k: int) -> Control:
        return Control(float(self.u0s[k]), self.u1s[k])

    def u_norms(self) -> np.ndarray:
        """Per-step norms |u_k|_U."""
        ds = self.grid.cell_width
        return np.sqrt(self.u0s ** 2 + ds * np.einsum("ij,ij->i", self.u1s, self.u1s))

    def lp_lambda_norm(self, lam: float, p: float) -> float:
        """Discounted path norm (sum_k exp(-lam*t_k) |u_k|_U^p dt)^(1/p).

        The discount is sampled at the midpoint of each step, consistent with
        the midpoint quadrature used by the a-priori estimate checks.
        """
        dt = self.dt
        mid = self.t_start + (np.arange(self.n_steps) + 0.5) * dt
        total = float(np.sum(np.exp(-lam * mid) * self.u_norms() ** p) * dt)
        return total ** (1.0 / p)

    @staticmethod
    def zeros(grid: AgeGrid, t_start: float, n_steps: int) -> "ControlPath":
        return ControlPath(
            grid, t_start, np.zeros(n_steps), np.zeros((n_steps, grid.n_cells))
        )


# ---------------------------------------------------------------------------
# Revenue
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QuadraticRevenue:
    """R(Q) = eta*Q - beta*Q^2/2.  Concave for beta >= 0; sublinear only if beta = 0."""

    eta: float
    beta: float

    def __post_init__(self) -> None:
        if self.beta < 0:
            raise ConfigError("quadratic revenue needs beta >= 0 for concavity")

    def value(self, q):
        return self.eta * q - 0.5 * self.beta * np.square(q)

    def derivative(self, q):
        return self.eta - self.beta * np.asarray(q, dtype=float)

    @property
    def sublinear(self) -> bool:
        return self.beta == 0.0

    @property
    def curvature_bound(self) -> float:
        return self.beta

    @property
    def is_zero(self) -> bool:
        return self.eta == 0.0 and self.beta == 0.0


@dataclass(frozen=True)
class SaturatedQuadraticRevenue:
    """Quadratic revenue with C1 linear continuations outside [0, q_hat].

    On [0, q_hat] this is eta*Q - beta*Q^2/2; below 0 it continues linearly
    with slope eta, above q_hat with slope eta - beta*q_hat.  The two-sided
    continuation keeps the derivative globally bounded, so the revenue is
    Lipschitz and the induced running cost is sublinear.
    """

    eta: float
    beta: float
    q_hat: float

    def __post_init__(self) -> None:
        if self.beta < 0 or self.q_hat <= 0:
            raise ConfigError("saturated revenue needs beta >= 0 and q_hat > 0")

    def value(self, q):
        q = np.asarray(q, dtype=float)
        qc = np.clip(q, 0.0, self.q_hat)
        core = self.eta * qc - 0.5 * self.beta * qc * qc
        out = core + self.derivative(q) * (q - qc)
        return out if out.ndim else float(out)

    def derivative(self, q):
        qc = np.clip(np.asarray(q, dtype=float), 0.0, self.q_hat)
        return self.eta - self.beta * qc

    @property
    def sublinear(self) -> bool:
        return True

    @property
    def curvature_bound(self) -> float:
        return self.beta

    @property
    def is_zero(self) -> bool:
        return self.eta == 0.0 and self.beta == 0.0

    @property
    def lipschitz_constant(self) -> float:
        return max(abs(self.eta), abs(self.eta - self.beta * self.q_hat))


# ---------------------------------------------------------------------------
# Costs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QuadraticCost:
    """c(v) = w*v^2/2 with w > 0."""

    w: float

    def __post_init__(self) -> None:
        if self.w <= 0:
            raise ConfigError("quadratic cost weight must be positive")

    bound = None

    def value(self, v):
        return 0.5 * self.w * np.square(v)

    def smooth_derivative(self, v):
        return self.w * np.asarray(v, dtype=float)

    def feasible(self, v) -> bool:
        return True


@dataclass(frozen=True)
class BoxedQuadraticCost:
    """c(v) = w*v^2/2 on [-bound, bound], infinite outside."""

    w: float
    bound: float

    def __post_init__(self) -> None:
        if self.w <= 0 or self.bound <= 0:
            raise ConfigError("boxed quadratic cost needs w > 0 and bound > 0")

    def value(self, v):
        return 0.5 * self.w * np.square(v)

    def smooth_derivative(self, v):
        return self.w * np.asarray(v, dtype=float)

    def feasible(self, v) -> bool:
        return bool(np.all(np.abs(v) <= self.bound * (1 + 1e-12)))


@dataclass(frozen=True)
class CostSpec:
    """Control cost h0(u) = c0(u0) + cell_width * sum_j c1(u1_j)."""

    c0: QuadraticCost | BoxedQuadraticCost
    c1: QuadraticCost | BoxedQuadraticCost

    @property
    def boxed(self) -> bool:
        return self.c0.bound is not None or self.c1.bound is not None

    @property
    def min_weight(self) -> float:
        return min(self.c0.w, self.c1.w)

    @property
    def max_weight(self) -> float:
        return max(self.c0.w, self.c1.w)

    def coercivity_witnesses(self, p: float, s_max: float) -> tuple[float, float]:
        """Constants (a, b) with h0(u) >= a*|u|_U^p + b on the domain of h0.

        For p = 2 the quadratic lower bound is direct.  For p > 2 the domain
        must be a box (a quadratic cannot dominate |u|^p globally), and the
        bound follows from |u|_U being capped on the box.  For p in (1, 2)
        the offset b is the (negative) minimum of w*r^2/2 - a*r^p.
        """
        wmin = self.min_weight
        if p == 2.0:
            return 0.5 * wmin, 0.0
        if p > 2.0:
            if self.c0.bound is None or self.c1.bound is None:
                raise RegimeViolation(
                    "coercivity with exponent p > 2 requires boxed costs"
                )
            r_max_sq = self.c0.bound ** 2 + s_max * self.c1.bound ** 2
            a = 0.5 * wmin * r_max_sq ** ((2.0 - p) / 2.0)
            return a, 0.0
        # 1 < p < 2: w*r^2/2 - a*r^p is minimized at r* = (a*p/w)^(1/(2-p))
        a = 0.5 * wmin
        r_star = (a * p / wmin) ** (1.0 / (2.0 - p))
        b = 0.5 * wmin * r_star ** 2 - a * r_star ** p
        return a, b


# ---------------------------------------------------------------------------
# Terminal data
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ZeroTerminal:
    """phi_0 = 0 (the default; the infinite-horizon limit does not see it)."""

    sublinear = True

    def value(self, values: np.ndarray, cell_width: float) -> float:
        return 0.0

    def gradient(self, values: np.ndarray, cell_width: float) -> np.ndarray:
        return np.zeros_like(values)


@dataclass(frozen=True)
class QuadraticTerminal:
    """phi_0(y) = weight * |y|_H^2 / 2, for convergence-rate experiments."""

    weight: float

    sublinear = False

    def value(self, values: np.ndarray, cell_width: float) -> float:
        return 0.5 * self.weight * cell_width * float(values @ values)

    def gradient(self, values: np.ndarray, cell_width: float) -> np.ndarray:
        return self.weight * values


# ---------------------------------------------------------------------------
# The model
# ---------------------------------------------------------------------------

RevenueLike = QuadraticRevenue | SaturatedQuadraticRevenue
TerminalLike = ZeroTerminal | QuadraticTerminal


@dataclass(frozen=True)
class VintageModel:
    """All problem constants, validated against the admissibility assumptions."""

    grid: AgeGrid
    mu: float
    lam: float
    p: float
    omega: float
    alpha: np.ndarray
    revenue: RevenueLike
    cost: CostSpec
    terminal: TerminalLike = field(default_factory=ZeroTerminal)
    name: str = ""
    regime: str = field(init=False)
    coercivity_a: float = field(init=False)
    coercivity_b: float = field(init=False)

    def __post_init__(self) -> None:
        for label, v in (("mu", self.mu), ("lambda", self.lam), ("p", self.p),
                         ("omega", self.omega)):
            if not math.isfinite(v):
                raise ConfigError(f"{label} must be finite, got {v}")
        if self.mu < 0:
            raise ConfigError("depreciation rate mu must be nonnegative")
        if self.p <= 1:
            raise RegimeViolation(f"coercivity exponent must exceed 1, got p={self.p}")
        if self.lam <= 0:
            raise RegimeViolation(f"discount rate must be positive, got {self.lam}")

        alpha = np.asarray(self.alpha, dtype=float)
        if alpha.shape != (self.grid.n_cells,):
            raise GridMismatch("alpha length does not match the grid")
        if alpha[-1] != 0.0:
            raise AlphaBoundary(
                "output coefficient must vanish at s_max (last cell must be 0)"
            )
        alpha = alpha.copy()
        alpha.flags.writeable = False
        object.__setattr__(self, "alpha", alpha)

        q = self.p / (self.p - 1.0)
        if self.lam <= self.omega * max(2.0, q):
            raise RegimeViolation(
                f"need lambda > omega*max(2, p/(p-1)): "
                f"lambda={self.lam}, omega={self.omega}, p={self.p}"
            )
        object.__setattr__(self, "regime", self._determine_regime())
        a, b = self.cost.coercivity_witnesses(self.p, self.grid.s_max)
        object.__setattr__(self, "coercivity_a", a)
        object.__setattr__(self, "coercivity_b", b)

    def _determine_regime(self) -> str:
        sublinear = self.revenue.sublinear and self.terminal.sublinear
        if sublinear and self.lam > self.omega:
            return "8.b"
        if self.p > 2.0 and self.lam > max(2.0 * self.omega, self.omega):
            return "8.a"
        # Contraction semigroup (omega <= 0): the quadratic-growth estimates
        # extend to p = 2, which is the standard LQ case.
        if self.p == 2.0 and self.omega <= 0.0 and self.lam > 0.0:
            return "8.a"
        raise RegimeViolation(
            "parameters satisfy neither the constrained-control regime (8.a) "
            "nor the sublinear-revenue regime (8.b)"
        )

    # -- convenience -------------------------------------------------------

    @property
    def q(self) -> float:
        return self.p / (self.p - 1.0)

    @property
    def n_cells(self) -> int:
        return self.grid.n_cells

    @property
    def cell_width(self) -> float:
        return self.grid.cell_width

    @property
    def dt(self) -> float:
        return self.grid.cell_width

    def state(self, values) -> CapitalState:
        return CapitalState(np.asarray(values, dtype=float), self.grid)

    def growth_exponent(self) -> int:
        """2 under the constrained-control regime, 1 under sublinear revenue."""
        return 2 if self.regime == "8.a" else 1


# ---------------------------------------------------------------------------
# Config parsing (strict JSON)
# ---------------------------------------------------------------------------

_TOP_FIELDS = {"s_max", "n_cells", "mu", "lambda", "p", "omega", "alpha",
               "revenue", "cost", "terminal"}


def _check_fields(obj: dict, allowed: set[str], required: set[str], where: str) -> None:
    unknown = set(obj) - allowed
    if unknown:
        raise ConfigError(f"unknown fields {sorted(unknown)} in {where}")
    missing = required - set(obj)
    if missing:
        raise ConfigError(f"missing fields {sorted(missing)} in {where}")


def _parse_revenue(obj: dict) -> RevenueLike:
    if not isinstance(obj, dict):
        raise ConfigError("revenue must be an object")
    kind = obj.get("kind")
    if kind == "quadratic":
        _check_fields(obj, {"kind", "eta", "beta"}, {"kind", "eta", "beta"}, "revenue")
        return QuadraticRevenue(float(obj["eta"]), float(obj["beta"]))
    if kind == "saturated_quadratic":
        _check_fields(obj, {"kind", "eta", "beta", "q_hat"},
                      {"kind", "eta", "beta", "q_hat"}, "revenue")
        return SaturatedQuadraticRevenue(
            float(obj["eta"]), float(obj["beta"]), float(obj["q_hat"])
        )
    raise ConfigError(f"unknown revenue kind {kind!r}")


def _parse_scalar_cost(obj: dict, where: str) -> QuadraticCost | BoxedQuadraticCost:
    if not isinstance(obj, dict):
        raise ConfigError(f"{where} must be an object")
    kind = obj.get("kind")
    if kind == "quadratic":
        _check_fields(obj, {"kind", "w"}, {"kind", "w"}, where)
        return QuadraticCost(float(obj["w"]))
    if kind == "quadratic_box":
        _check_fields(obj, {"kind", "w", "bound"}, {"kind", "w", "bound"}, where)
        return BoxedQuadraticCost(float(obj["w"]), float(obj["bound"]))
    raise ConfigError(f"unknown cost kind {kind!r} in {where}")


def _parse_terminal(obj: dict) -> TerminalLike:
    if not isinstance(obj, dict):
        raise ConfigError("terminal must be an object")
    kind = obj.get("kind")
    if kind == "zero":
        _check_fields(obj, {"kind"}, {"kind"}, "terminal")
        return ZeroTerminal()
    if kind == "quadratic":
        _check_fields(obj, {"kind", "weight"}, {"kind", "weight"}, "terminal")
        return QuadraticTerminal(float(obj["weight"]))
    raise ConfigError(f"unknown terminal kind {kind!r}")


def _parse_alpha(obj: dict, grid: AgeGrid) -> np.ndarray:
    if not isinstance(obj, dict):
        raise ConfigError("alpha must be an object")
    kind = obj.get("kind")
    if kind == "linear_decay":
        _check_fields(obj, {"kind"}, {"kind"}, "alpha")
        alpha = 2.0 * (1.0 - grid.centers / grid.s_max)
        alpha[-1] = 0.0
        return alpha
    if kind == "explicit":
        _check_fields(obj, {"kind", "values"}, {"kind", "values"}, "alpha")
        return np.asarray(obj["values"], dtype=float)
    raise ConfigError(f"unknown alpha kind {kind!r}")


def build_model(config: dict, name: str = "") -> VintageModel:
    """Construct a validated model from a strict JSON-style configuration."""
    if not isinstance(config, dict):
        raise ConfigError("model config must be a JSON object")
    _check_fields(config, _TOP_FIELDS, _TOP_FIELDS - {"terminal"}, "model config")
    try:
        s_max = float(config["s_max"])
        n_cells = int(config["n_cells"])
        mu = float(config["mu"])
        lam = float(config["lambda"])
        p = float(config["p"])
        omega = float(config["omega"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"non-numeric scalar field: {exc}") from exc
    grid = AgeGrid(s_max, n_cells)
    alpha = _parse_alpha(config["alpha"], grid)
    revenue = _parse_revenue(config["revenue"])
    cost_obj = config["cost"]
    if not isinstance(cost_obj, dict):
        raise ConfigError("cost must be an object")
    _check_fields(cost_obj, {"c0", "c1"}, {"c0", "c1"}, "cost")
    cost = CostSpec(
        _parse_scalar_cost(cost_obj["c0"], "cost.c0"),
        _parse_scalar_cost(cost_obj["c1"], "cost.c1"),
    )
    terminal = _parse_terminal(config.get("terminal", {"kind": "zero"}))
    return VintageModel(
        grid=grid, mu=mu, lam=lam, p=p, omega=omega, alpha=alpha,
        revenue=revenue, cost=cost, terminal=terminal, name=name,
    )


def load_model(path: str | Path) -> VintageModel:
    """Read a model from a JSON file (strict: unknown fields are rejected)."""
    text = Path(path).read_text()
    try:
        config = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
    return build_model(config, name=str(path))


# ---------------------------------------------------------------------------
# Canonical instances
# ---------------------------------------------------------------------------

CANONICAL_NAMES = ("lq-1", "box-1", "null-1", "sat-1")


def _canonical_config(name: str, n_cells: int) -> dict:
    base = {
        "s_max": 1.0,
        "n_cells": n_cells,
        "mu": 0.5,
        "lambda": 1.0,
        "p": 2.0,
        "omega": 0.0,
        "alpha": {"kind": "linear_decay"},
        "revenue": {"kind": "quadratic", "eta": 1.0, "beta": 1.0},
        "cost": {
            "c0": {"kind": "quadratic", "w": 1.0},
            "c1": {"kind": "quadratic", "w": 1.0},
        },
        "terminal": {"kind": "zero"},
    }
    if name == "lq-1":
        return base
    if name == "box-1":
        base["p"] = 3.0
        box = {"kind": "quadratic_box", "w": 1.0, "bound": 1.0}
        base["cost"] = {"c0": dict(box), "c1": dict(box)}
        return base
    if name == "null-1":
        base["revenue"] = {"kind": "quadratic", "eta": 0.0, "beta": 0.0}
        return base
    if name == "sat-1":
        base["revenue"] = {
            "kind": "saturated_quadratic", "eta": 1.0, "beta": 1.0, "q_hat": 0.75,
        }
        return base
    raise ConfigError(f"unknown canonical instance {name!r}")


def canonical_instance(name: str, n_cells: int = 200) -> VintageModel:
    """One of the named test instances, optionally at a different resolution."""
    return build_model(_canonical_config(name, n_cells), name=name)


def canonical_instances(n_cells: int = 200) -> dict[str, VintageModel]:
    return {name: canonical_instance(name, n_cells) for name in CANONICAL_NAMES}


def builtin_state(name: str, grid: AgeGrid) -> CapitalState:
    """Named initial states used by the CLI: 'zero', 'ones', 'bump'."""
    s = grid.centers / grid.s_max
    if name == "zero":
        values = np.zeros(grid.n_cells)
    elif name == "ones":
        values = np.ones(grid.n_cells)
    elif name == "bump":
        values = s ** 2 * np.exp(-((s - 0.5) / 0.2) ** 2)
    else:
        raise ConfigError(f"unknown builtin state {name!r}")
    return CapitalState(values, grid)
