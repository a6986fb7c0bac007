"""Declaration-graph truthfulness auditor.

A mechanism is audited per bidder against a finite declaration domain:
one vertex per candidate declaration, arcs for the lies the inspection
model permits, weights equal to the true-value loss of the lie.  No
negative arc in the inspection-restricted graph certifies truthfulness
without money on the domain; no negative cycle in the complete graph
certifies that payments could make the mechanism truthful.  The direct
monotonicity definitions (known and unknown collections) are implemented
independently so the two routes can be cross-checked.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

from .model import (
    Allocation,
    Bundle,
    Declaration,
    Demand,
    Instance,
    GoodUniverse,
    extend_valuation,
    sigma,
    verification_allows,
)

Mechanism = Callable[[Instance], Allocation]


class WrongMode(Exception):
    """Check requires the other graph mode."""


class NotMonotoneOnGrid(Exception):
    """Threshold structure violated; carries a witness declaration."""

    def __init__(self, message: str, witness=None):
        super().__init__(message)
        self.witness = witness


@dataclass(frozen=True)
class AuditContext:
    """Fixed environment for one audited bidder: the universe and the
    declarations of everybody else, with the audited slot at `bidder`."""

    universe: GoodUniverse
    others: tuple[Declaration, ...]
    bidder: int = 0

    def instance_for(self, decl: Declaration) -> Instance:
        decls = list(self.others)
        decls.insert(self.bidder, decl)
        return Instance(self.universe, tuple(decls))


@dataclass(frozen=True)
class DeclarationDomain:
    """Finite set of candidate declarations of one bidder.

    In known mode every declaration ranges over one public bundle
    collection (values vary); unknown mode lets collections vary too.
    """

    bidder: int
    declarations: tuple[Declaration, ...]
    mode: str  # "known" | "unknown"

    def __post_init__(self):
        if not self.declarations:
            raise ValueError("domain must be non-empty")
        if self.mode not in ("known", "unknown"):
            raise ValueError(f"bad domain mode {self.mode!r}")
        if self.mode == "known":
            collections = {frozenset(d.bundle for d in decl.demands) for decl in self.declarations}
            if len(collections) != 1:
                raise ValueError("known mode requires one shared bundle collection")


@dataclass(frozen=True)
class DeclarationGraph:
    """Per-bidder digraph over a declaration domain.

    outcomes[v] is the bundle the mechanism awards the audited bidder when
    she declares vertex v.  edges[a][b] says whether type a may declare b
    under inspection (always True in complete mode); weights[a][b] is the
    loss z(own outcome) - z(outcome of b), valued by a's declaration.
    """

    domain: DeclarationDomain
    edge_mode: str  # "verification" | "complete"
    outcomes: tuple[Bundle, ...]
    edges: tuple[tuple[bool, ...], ...]
    weights: tuple[tuple[Fraction, ...], ...]

    @property
    def size(self) -> int:
        return len(self.outcomes)


def build_graph(
    mechanism: Mechanism,
    context: AuditContext,
    domain: DeclarationDomain,
    edge_mode: str = "verification",
) -> DeclarationGraph:
    """Run the mechanism once per vertex and assemble arcs and weights."""
    if edge_mode not in ("verification", "complete"):
        raise ValueError(f"bad edge mode {edge_mode!r}")
    decls = domain.declarations
    outcomes = tuple(
        mechanism(context.instance_for(decl))[context.bidder] for decl in decls
    )
    own_value = tuple(
        extend_valuation(decl, out) for decl, out in zip(decls, outcomes)
    )
    edges = []
    weights = []
    for a_idx, a in enumerate(decls):
        edge_row = []
        weight_row = []
        for b_idx, b in enumerate(decls):
            out_b = outcomes[b_idx]
            allowed = True
            if edge_mode == "verification":
                allowed = verification_allows(a, b, out_b)
            edge_row.append(allowed)
            weight_row.append(own_value[a_idx] - extend_valuation(a, out_b))
        edges.append(tuple(edge_row))
        weights.append(tuple(weight_row))
    return DeclarationGraph(domain, edge_mode, outcomes, tuple(edges), tuple(weights))


def build_expected_graph(
    mechanism_distribution,
    context: AuditContext,
    domain: DeclarationDomain,
    edge_mode: str = "complete",
) -> DeclarationGraph:
    """Graph for a randomized mechanism audited in expectation.

    mechanism_distribution maps an instance to an OutcomeDistribution;
    vertex outcomes are replaced by expected true values, with the same
    arc and weight rules applied to the expectations.
    """
    if edge_mode not in ("verification", "complete"):
        raise ValueError(f"bad edge mode {edge_mode!r}")
    decls = domain.declarations
    dists = [mechanism_distribution(context.instance_for(decl)) for decl in decls]

    def expected_value(valuer: Declaration, dist) -> Fraction:
        return sum(
            (p * extend_valuation(valuer, alloc[context.bidder]) for p, alloc in dist.support),
            Fraction(0),
        )

    edges = []
    weights = []
    for a_idx, a in enumerate(decls):
        own = expected_value(a, dists[a_idx])
        edge_row = []
        weight_row = []
        for b_idx, b in enumerate(decls):
            cross = expected_value(a, dists[b_idx])
            declared = expected_value(b, dists[b_idx])
            allowed = True if edge_mode == "complete" else cross >= declared
            edge_row.append(allowed)
            weight_row.append(own - cross)
        edges.append(tuple(edge_row))
        weights.append(tuple(weight_row))
    # expected outcomes have no single bundle; store 0 placeholders
    return DeclarationGraph(
        domain, edge_mode, tuple([0] * len(decls)), tuple(edges), tuple(weights)
    )


@dataclass(frozen=True)
class EdgeVerdict:
    ok: bool
    arc: tuple[int, int] | None = None
    weight: Fraction | None = None


def check_truthful_no_money(graph: DeclarationGraph) -> EdgeVerdict:
    """No negative arc in the inspection-restricted graph.

    Returns the minimum-weight offending arc as witness when violated.
    """
    if graph.edge_mode != "verification":
        raise WrongMode("truthfulness check needs a verification-mode graph")
    worst = None
    for a in range(graph.size):
        for b in range(graph.size):
            if graph.edges[a][b] and graph.weights[a][b] < 0:
                w = graph.weights[a][b]
                if worst is None or w < worst[2]:
                    worst = (a, b, w)
    if worst is None:
        return EdgeVerdict(True)
    return EdgeVerdict(False, (worst[0], worst[1]), worst[2])


@dataclass(frozen=True)
class CycleVerdict:
    ok: bool
    cycle: tuple[int, ...] | None = None  # vertices, first repeated at end
    total: Fraction | None = None


def check_money_implementable(graph: DeclarationGraph) -> CycleVerdict:
    """No negative-weight cycle (shortest-path relaxation over exact
    rationals).  Reports a minimum-length negative cycle, arcs in
    traversal order, when one exists."""
    v = graph.size
    inf = None

    # base[i][j]: weight of the single arc i->j, inf when absent
    base = [
        [graph.weights[i][j] if graph.edges[i][j] else inf for j in range(v)]
        for i in range(v)
    ]
    dist = base  # min weight of an i->j walk with exactly `length` arcs
    parents: list[list[list[int | None]]] = []
    for length in range(1, v + 1):
        if length > 1:
            nxt = [[inf] * v for _ in range(v)]
            par: list[list[int | None]] = [[None] * v for _ in range(v)]
            for i in range(v):
                row = dist[i]
                for k in range(v):
                    dik = row[k]
                    if dik is inf:
                        continue
                    for j in range(v):
                        step = base[k][j]
                        if step is inf:
                            continue
                        cand = dik + step
                        if nxt[i][j] is inf or cand < nxt[i][j]:
                            nxt[i][j] = cand
                            par[i][j] = k
            dist = nxt
            parents.append(par)
        neg = [s for s in range(v) if dist[s][s] is not inf and dist[s][s] < 0]
        if neg:
            start = min(neg)
            # walk back through parents: predecessors of the final vertex
            back = [start]
            target, rem = start, length
            while rem > 1:
                k = parents[rem - 2][start][target]
                back.append(k)
                target, rem = k, rem - 1
            cycle = tuple([start] + back[1:][::-1] + [start])
            return CycleVerdict(False, cycle, dist[start][start])
    return CycleVerdict(True)


@dataclass(frozen=True)
class MonotonicityVerdict:
    ok: bool
    witness: tuple | None = None


def check_k_monotone(
    mechanism: Mechanism, context: AuditContext, domain: DeclarationDomain
) -> MonotonicityVerdict:
    """Direct known-collection monotonicity: if declaring a wins bundle S
    and b values S at least as much, then b must win something b values at
    least as much as S."""
    if domain.mode != "known":
        raise WrongMode("k-monotonicity audits a known-collection domain")
    decls = domain.declarations
    outcomes = [mechanism(context.instance_for(d))[context.bidder] for d in decls]
    for ai, a in enumerate(decls):
        s = outcomes[ai]
        a_s = extend_valuation(a, s)
        for bi, b in enumerate(decls):
            b_s = extend_valuation(b, s)
            if b_s >= a_s:
                if extend_valuation(b, outcomes[bi]) < b_s:
                    return MonotonicityVerdict(False, (ai, bi, s))
    return MonotonicityVerdict(True)


def check_k_set_monotone(
    mechanism: Mechanism, context: AuditContext, domain: DeclarationDomain
) -> MonotonicityVerdict:
    """Direct unknown-collection monotonicity: if declaring a wins T and b
    defines T by U with at least a's value for T, then b must win
    something worth at least U to her."""
    decls = domain.declarations
    outcomes = [mechanism(context.instance_for(d))[context.bidder] for d in decls]
    for ai, a in enumerate(decls):
        t = outcomes[ai]
        z_t = extend_valuation(a, t)
        for bi, b in enumerate(decls):
            u = sigma(b, t)
            w_u = extend_valuation(b, t)
            if w_u >= z_t:
                if extend_valuation(b, outcomes[bi]) < w_u:
                    return MonotonicityVerdict(False, (ai, bi, t, u))
    return MonotonicityVerdict(True)


# ---------------------------------------------------------------------------
# domain builders
# ---------------------------------------------------------------------------


def monotone_consistent(decl: Declaration) -> bool:
    """No demanded superset valued below a demanded subset.

    Declarations representing monotone preferences satisfy this; the
    audit grids are filtered to such declarations so declared values and
    extended values coincide on demanded bundles.
    """
    ds = decl.demands
    for a in ds:
        for b in ds:
            if a.bundle != b.bundle and a.bundle & ~b.bundle == 0 and a.value > b.value:
                return False
    return True


def grid_declarations(
    bundles: Sequence[Bundle],
    grid: Sequence[Fraction],
    bidder: int = 0,
    strict: bool = False,
) -> list[Declaration]:
    """Every value assignment from the grid to the given bundles,
    restricted to monotone-consistent lists (and distinct positive values
    under strict)."""
    out = []
    for combo in itertools.product(grid, repeat=len(bundles)):
        if strict and (len(set(combo)) != len(combo) or any(v <= 0 for v in combo)):
            continue
        decl = Declaration(
            tuple(Demand(mask, Fraction(v)) for mask, v in zip(bundles, combo)),
            owner=bidder,
        )
        if monotone_consistent(decl):
            out.append(decl)
    return out


def known_domain(
    bidder: int,
    collection: Sequence[Bundle],
    grid: Sequence[Fraction],
    strict: bool = False,
) -> DeclarationDomain:
    return DeclarationDomain(
        bidder, tuple(grid_declarations(collection, grid, bidder, strict)), "known"
    )


def unknown_domain(
    bidder: int,
    pool: Sequence[Bundle],
    k: int,
    grid: Sequence[Fraction],
    strict: bool = False,
) -> DeclarationDomain:
    """All subcollections of the pool up to size k, each with every grid
    value assignment."""
    decls: list[Declaration] = []
    pool = list(pool)
    for size in range(1, k + 1):
        for combo in itertools.combinations(pool, size):
            decls.extend(grid_declarations(combo, grid, bidder, strict))
    return DeclarationDomain(bidder, tuple(decls), "unknown")


def domain_from_spec(obj: dict) -> DeclarationDomain:
    """Domain from a JSON spec: {"bidder", "mode", "pool": [[goods],...],
    "grid": [values], "k", "strict"}."""
    from .model import bundle_of, as_value

    bidder = int(obj.get("bidder", 0))
    pool = [bundle_of(goods) for goods in obj["pool"]]
    grid = [as_value(v) for v in obj["grid"]]
    strict = bool(obj.get("strict", False))
    mode = obj.get("mode", "known")
    if mode == "known":
        return known_domain(bidder, pool, grid, strict)
    return unknown_domain(bidder, pool, int(obj.get("k", len(pool))), grid, strict)


# ---------------------------------------------------------------------------
# thresholds
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ThresholdReport:
    """Per-rank interval of threshold positions consistent with the scan."""

    ranks: tuple[Bundle, ...]  # bundles in decreasing true-value order
    brackets: tuple[tuple[Fraction, Fraction], ...]


def _first_clearing_rank(values: Sequence[Fraction], thetas: Sequence[Fraction]) -> int | None:
    for j, (v, th) in enumerate(zip(values, thetas)):
        if v > th:
            return j
    return None


def extract_thresholds(
    mechanism: Mechanism,
    context: AuditContext,
    truth: Declaration,
    value_grid: Sequence[Fraction],
) -> ThresholdReport:
    """Bracket the per-rank critical values implied by monotonicity.

    The truth's bundles are ranked by decreasing true value (strict).  The
    scan enumerates every declaration on the grid that preserves that
    ranking and requires a single threshold vector to explain all of them:
    the bidder receives exactly the first rank whose declared value clears
    its threshold, and nothing when none clears.  The consistent threshold
    positions are reported as one closed bracket per rank.
    """
    truth.validate_strict()
    grid = sorted(Fraction(g) for g in set(value_grid))
    if not grid:
        raise ValueError("empty value grid")
    order = sorted(range(len(truth.demands)), key=lambda j: -truth.demands[j].value)
    ranked = [truth.demands[j].bundle for j in order]
    k = len(ranked)

    # candidate thresholds: below the grid, between grid points, above it
    candidates = [Fraction(0)]
    for lo, hi in zip(grid, grid[1:]):
        candidates.append((lo + hi) / 2)
    candidates.append(grid[-1] + 1)

    # declarations preserving the true ranking
    scans = []
    for combo in itertools.product(grid, repeat=k):
        if any(combo[j] <= combo[j + 1] for j in range(k - 1)):
            continue
        decl = Declaration(
            tuple(Demand(ranked[j], combo[j]) for j in range(k)), owner=truth.owner
        )
        out = mechanism(context.instance_for(decl))[context.bidder]
        defining = sigma(truth, out)
        rank = ranked.index(defining) if defining in ranked else None
        scans.append((combo, rank))

    consistent = []
    witness_for = None
    for thetas in itertools.product(candidates, repeat=k):
        bad = None
        for combo, rank in scans:
            predicted = _first_clearing_rank(combo, thetas)
            if predicted is not None and rank != predicted:
                bad = (combo, rank, predicted)
                break
            if predicted is None and rank is not None:
                bad = (combo, rank, None)
                break
        if bad is None:
            consistent.append(thetas)
        elif witness_for is None:
            witness_for = bad
    if not consistent:
        raise NotMonotoneOnGrid(
            f"no threshold vector explains the scan: {witness_for}", witness_for
        )
    brackets = tuple(
        (min(t[j] for t in consistent), max(t[j] for t in consistent)) for j in range(k)
    )
    return ThresholdReport(tuple(ranked), brackets)
