"""Curated counterexample instance families with their exact expected
facts, re-derived at test time by running the mechanisms, the oracle and
the auditor.

The golden ratio is represented by the rational convergent F40/F39 whose
relative error is below 1e-15; the feasibility margins checked at
rho = 1.09 exceed that error by many orders of magnitude.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

from .audit import AuditContext, DeclarationDomain, build_graph, check_money_implementable, check_truthful_no_money
from .mechanisms import greedy
from .model import GoodUniverse, Instance, declaration, welfare
from .oracle import optimal_welfare

# golden ratio surrogate: ratio of consecutive Fibonacci numbers F40/F39
PHI = Fraction(102334155, 63245986)


class BadDelta(Exception):
    """Parameter outside the range the family is defined for."""


@dataclass(frozen=True)
class GalleryCase:
    """A parameterized instance family plus its expected exact facts."""

    name: str
    params: dict
    expected: dict
    recompute: Callable[[], dict]

    def verify(self) -> dict:
        """Recompute every fact; returns {fact: (expected, actual, ok)}."""
        actual = self.recompute()
        report = {}
        for key, want in self.expected.items():
            got = actual.get(key)
            report[key] = (want, got, want == got)
        return report

    @property
    def ok(self) -> bool:
        return all(ok for _, _, ok in self.verify().values())


def _greedy_alloc(instance: Instance):
    alloc, _ = greedy(instance)
    return alloc


def prop10_triple(delta) -> GalleryCase:
    """Three single-bidder deviations showing greedy admits no augmenting
    payments: the complete declaration graph has a negative cycle while
    the inspection-restricted graph has no negative arc."""
    delta = Fraction(delta)
    if not (0 < delta < Fraction(1, 2)):
        raise BadDelta("need 0 < delta < 1/2")

    universe = GoodUniverse(2, 1)
    rival = declaration([([0], 1)], owner=1)
    v1 = declaration([([0], 1 - delta), ([1], 0)], owner=0)
    v1p = declaration([([0], 1 + delta), ([1], 1)], owner=0)
    v1pp = declaration([([0], 1 - delta), ([1], 1 - 2 * delta)], owner=0)
    context = AuditContext(universe, (rival,), bidder=0)
    domain = DeclarationDomain(0, (v1, v1p, v1pp), "unknown")

    expected = {
        "alloc_I": ((1 << 1), (1 << 0)),
        "alloc_Ip": ((1 << 0), 0),
        "alloc_Ipp": ((1 << 1), (1 << 0)),
        "edge_v1_v1p": -(1 - delta),
        "edge_v1p_v1pp": delta,
        "edge_v1pp_v1": Fraction(0),
        "cycle_total": -(1 - 2 * delta),
        "has_negative_cycle": True,
        "verification_negative_edges": False,
        "verification_edge_v1_v1p_present": False,
    }

    def recompute() -> dict:
        complete = build_graph(_greedy_alloc, context, domain, "complete")
        restricted = build_graph(_greedy_alloc, context, domain, "verification")
        cycle = check_money_implementable(complete)
        edges = check_truthful_no_money(restricted)
        return {
            "alloc_I": _greedy_alloc(context.instance_for(v1)),
            "alloc_Ip": _greedy_alloc(context.instance_for(v1p)),
            "alloc_Ipp": _greedy_alloc(context.instance_for(v1pp)),
            "edge_v1_v1p": complete.weights[0][1],
            "edge_v1p_v1pp": complete.weights[1][2],
            "edge_v1pp_v1": complete.weights[2][0],
            "cycle_total": cycle.total,
            "has_negative_cycle": not cycle.ok,
            "verification_negative_edges": not edges.ok,
            "verification_edge_v1_v1p_present": restricted.edges[0][1],
        }

    return GalleryCase("prop10", {"delta": delta}, expected, recompute)


def thm11_pair(delta) -> GalleryCase:
    """Two-bidder, two-good family forcing any deterministic truthful
    mechanism to a factor-2 loss; greedy hits exactly (2+d)/(1+d) on the
    second instance."""
    delta = Fraction(delta)
    if not (0 < delta < 1):
        raise BadDelta("need 0 < delta < 1")

    universe = GoodUniverse(2, 1)
    bidder1 = declaration([([0], 1 + delta), ([1], 1)], owner=0)
    bidder2 = declaration([([0], 1 + delta), ([1], 1)], owner=1)
    bidder2_drop = declaration([([0], 1 + delta), ([1], 0)], owner=1)
    inst1 = Instance(universe, (bidder1, bidder2))
    inst2 = Instance(universe, (bidder1, bidder2_drop))

    expected = {
        "opt_1": 2 + delta,
        "opt_2": 2 + delta,
        "greedy_2": 1 + delta,
        "ratio_2": (2 + delta) / (1 + delta),
    }

    def recompute() -> dict:
        opt1, _ = optimal_welfare(inst1)
        opt2, _ = optimal_welfare(inst2)
        alloc2, _ = greedy(inst2)
        g2 = welfare(inst2, alloc2)
        return {"opt_1": opt1, "opt_2": opt2, "greedy_2": g2, "ratio_2": opt2 / g2}

    return GalleryCase("thm11", {"delta": delta}, expected, recompute)


def thm12_pair(delta) -> GalleryCase:
    """Equiprobable pair bounding universally truthful mechanisms away
    from optimal: greedy takes the big bundle in both instances."""
    delta = Fraction(delta)
    if not (0 < delta < 1):
        raise BadDelta("need 0 < delta < 1")

    universe = GoodUniverse(2, 1)
    rival = declaration([([0], 1)], owner=1)
    v1 = declaration([([0, 1], 2), ([1], 0)], owner=0)
    v1p = declaration([([0, 1], 2), ([1], 2 - delta)], owner=0)
    inst1 = Instance(universe, (v1, rival))
    inst2 = Instance(universe, (v1p, rival))

    expected = {
        "opt_1": Fraction(2),
        "opt_2": 3 - delta,
        "expected_opt": (5 - delta) / 2,
        "greedy_1": Fraction(2),
        "greedy_2": Fraction(2),
        "expected_ratio": (5 - delta) / 4,
    }

    def recompute() -> dict:
        opt1, _ = optimal_welfare(inst1)
        opt2, _ = optimal_welfare(inst2)
        a1, _ = greedy(inst1)
        a2, _ = greedy(inst2)
        g1, g2 = welfare(inst1, a1), welfare(inst2, a2)
        return {
            "opt_1": opt1,
            "opt_2": opt2,
            "expected_opt": (opt1 + opt2) / 2,
            "greedy_1": g1,
            "greedy_2": g2,
            "expected_ratio": (opt1 + opt2) / (g1 + g2) if g1 + g2 else None,
        }

    return GalleryCase("thm12", {"delta": delta}, expected, recompute)


def thm13_pair() -> GalleryCase:
    """Golden-ratio pair underlying the truthful-in-expectation bound."""
    universe = GoodUniverse(2, 1)
    rival = declaration([([0], 1)], owner=1)
    v1 = declaration([([0, 1], PHI), ([1], 0)], owner=0)
    v1p = declaration([([0, 1], PHI), ([1], 1)], owner=0)
    inst1 = Instance(universe, (v1, rival))
    inst2 = Instance(universe, (v1p, rival))

    expected = {"opt_1": PHI, "opt_2": Fraction(2)}

    def recompute() -> dict:
        return {
            "opt_1": optimal_welfare(inst1)[0],
            "opt_2": optimal_welfare(inst2)[0],
        }

    return GalleryCase("thm13", {}, expected, recompute)


def thm13_feasibility(rho) -> dict:
    """Feasibility of the probability system behind the golden-ratio
    lower bound at approximation factor rho.

    Solves for p, q in [0,1] with p >= (phi-rho)/(rho(phi-1)),
    1-q >= (2-rho*phi)/(rho(2-phi)) and q >= (p*phi-1)/(phi-1) by interval
    intersection; infeasible exactly when no such pair exists.
    """
    rho = Fraction(rho)
    if rho < 1:
        raise ValueError("rho must be >= 1")
    p_lo = max((PHI - rho) / (rho * (PHI - 1)), Fraction(0))
    q_hi = min(Fraction(1) - (2 - rho * PHI) / (rho * (2 - PHI)), Fraction(1))
    if p_lo > 1 or q_hi < 0:
        return {"feasible": False, "witness": None}
    q_lo = max((p_lo * PHI - 1) / (PHI - 1), Fraction(0))
    if q_lo > q_hi:
        return {"feasible": False, "witness": None}
    return {"feasible": True, "witness": (p_lo, q_lo)}


CASES = {
    "prop10": lambda delta=Fraction(1, 10), rho=None: prop10_triple(delta),
    "thm11": lambda delta=Fraction(1, 10), rho=None: thm11_pair(delta),
    "thm12": lambda delta=Fraction(1, 10), rho=None: thm12_pair(delta),
    "thm13": lambda delta=None, rho=None: thm13_pair(),
}
