"""Combinatorial auctions without money under no-overbidding verification.

Library layout:

- model: instances, XOR declarations, valuation extension and inspection
- oracle: exhaustive winner determination and the greedy dual certificate
- mechanisms: greedy, price-update family, composite, rank/cardinality
  randomized mechanisms, per-run invariant checks
- audit: declaration graphs, truthfulness and money-implementability
  checks, monotonicity audits, threshold extraction
- gallery: counterexample instance families with their exact expected facts
- generator / sweep: seeded random instances and batch experiment harness
- kernels / _kernels: exhaustive small-instance verification sweep
  (pure-Python and compiled backends)
"""

from .model import (
    Allocation,
    Bundle,
    Declaration,
    Demand,
    GoodUniverse,
    Instance,
    bundle_of,
    declaration,
    extend_valuation,
    is_feasible,
    members,
    sigma,
    verification_allows,
    welfare,
)

__all__ = [
    "Allocation",
    "Bundle",
    "Declaration",
    "Demand",
    "GoodUniverse",
    "Instance",
    "bundle_of",
    "declaration",
    "extend_valuation",
    "is_feasible",
    "members",
    "sigma",
    "verification_allows",
    "welfare",
]

__version__ = "0.1.0"
