"""Numerical toolkit for infinite-horizon boundary control of
age-structured capital accumulation.

Submodules: model (types and canonical instances), transport (the
exact-characteristics propagator), costs (running cost and convex
conjugates), optimize (finite-horizon solves), value (infinite-horizon
limits and audits), hjb (stationary residuals and the quadratic oracle),
estimates (a-priori bounds), feedback (closed-loop synthesis), audits
(registry), cli (command line).
"""

from .model import (
    AgeGrid,
    CapitalState,
    Control,
    ControlPath,
    VintageModel,
    build_model,
    canonical_instance,
    canonical_instances,
    load_model,
)

__version__ = "0.1.0"

__all__ = [
    "AgeGrid",
    "CapitalState",
    "Control",
    "ControlPath",
    "VintageModel",
    "build_model",
    "canonical_instance",
    "canonical_instances",
    "load_model",
    "__version__",
]
