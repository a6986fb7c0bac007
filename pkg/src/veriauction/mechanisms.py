"""Allocation mechanisms: value-greedy, the multiplicative price-update
family, their randomized roundings, the two-branch composite, and the
rank/cardinality randomized mechanisms.

Every mechanism is a pure function of (instance, parameters, coin vector)
and returns an exact allocation plus a trace sufficient to re-verify the
run: greedy traces record every accept/reject decision, price traces
record the full price and copies-sold history.  Randomized mechanisms
take explicit coins so that a fixed coin vector is a deterministic
mechanism in its own right.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import mpmath

from .model import (
    Allocation,
    Bundle,
    Declaration,
    Demand,
    GoodUniverse,
    Instance,
    is_feasible,
    members,
    sigma,
    welfare,
)
from .numbers import root_of
from .oracle import optimal_welfare, rank_restriction, cardinality_cutoff, restrict_instance

EPS_DEFAULT = Fraction(1, 1024)


class UnsupportedSupply(Exception):
    """Mechanism requires single supply (b == 1)."""


class MuOutOfRange(Exception):
    """The price scale must satisfy mu/2 <= v_max < mu."""


class EmptyInstance(Exception):
    """At least one positively valued demand is required."""


class MechanismInvariantError(AssertionError):
    """A mechanism produced an infeasible or inexact allocation."""


def _guard_output(instance: Instance, alloc: Allocation) -> None:
    if not is_feasible(instance, alloc):
        raise MechanismInvariantError(f"infeasible output {alloc}")


# ---------------------------------------------------------------------------
# value-greedy (single supply)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GreedyRecord:
    value: Fraction
    bundle: Bundle
    bidder: int
    demand_index: int
    accepted: bool


@dataclass(frozen=True)
class GreedyTrace:
    """Bids in processed order with the accept/reject decision for each."""

    records: tuple[GreedyRecord, ...]
    include_zero_bids: bool

    @property
    def accepted_value(self) -> Fraction:
        return sum((r.value for r in self.records if r.accepted), Fraction(0))


def greedy(instance: Instance, include_zero_bids: bool = True) -> tuple[Allocation, GreedyTrace]:
    """Accept bids by value; a bid wins iff its bidder is unserved and its
    bundle is disjoint from everything accepted so far.

    Ties across bidders go to the smaller bidder index, ties within a
    bidder to the smaller demand index.  Zero bids are processed last by
    default (they are needed to reproduce the no-payments counterexample);
    include_zero_bids=False drops them entirely.
    """
    if instance.b != 1:
        raise UnsupportedSupply("greedy requires single supply")

    bids = [
        (dm.value, i, j, dm.bundle)
        for i, decl in enumerate(instance.declarations)
        for j, dm in enumerate(decl.demands)
        if include_zero_bids or dm.value > 0
    ]
    bids.sort(key=lambda t: (-t[0], t[1], t[2]))

    taken = 0
    served: set[int] = set()
    awarded = [0] * instance.n
    records = []
    for value, i, j, mask in bids:
        accept = i not in served and not (mask & taken)
        if accept:
            taken |= mask
            served.add(i)
            awarded[i] = mask
        records.append(GreedyRecord(value, mask, i, j, accept))

    alloc = tuple(awarded)
    _guard_output(instance, alloc)
    return alloc, GreedyTrace(tuple(records), include_zero_bids)


# ---------------------------------------------------------------------------
# multiplicative price-update family
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PriceTrace:
    """Complete history of a price-update run.

    chosen is the priced allocation (the bundles that drove price
    updates); awarded is what bidders actually receive, which differs from
    chosen only under randomized rounding.  copies_priced counts price
    bumps per good, copies_delivered counts delivered copies.  Prices are
    exact (Fraction, or quadratic surds for b == 2) whenever the update
    factor is exact.
    """

    mu: Fraction
    p0: Fraction
    r: object
    order: tuple[int, ...]
    chosen: tuple[Bundle, ...]
    awarded: tuple[Bundle, ...]
    price_rows: tuple[tuple, ...]
    copies_rows: tuple[tuple[int, ...], ...]
    final_prices: tuple
    copies_priced: tuple[int, ...]
    copies_delivered: tuple[int, ...]
    max_bidder: int | None = None
    epsilon: Fraction | None = None
    q: float | None = None

    def priced_value(self, instance: Instance) -> Fraction:
        return sum(
            (
                instance.declarations[i].value_of(mask) or Fraction(0)
                for i, mask in enumerate(self.chosen)
                if mask
            ),
            Fraction(0),
        )


def _check_mu(instance: Instance, mu: Fraction) -> None:
    vmax = instance.max_value
    if not (mu > 0 and mu / 2 <= vmax < mu):
        raise MuOutOfRange(f"need mu/2 <= v_max < mu, got mu={mu}, v_max={vmax}")


def _price_engine(
    instance: Instance,
    mu: Fraction,
    r,
    order: Sequence[int],
    track_supply: bool,
    deliver: Callable[[int], bool],
    max_bidder: int | None = None,
    epsilon: Fraction | None = None,
    q: float | None = None,
) -> PriceTrace:
    m, b, n = instance.m, instance.b, instance.n
    p0 = mu / (4 * b * m)
    prices: list = [p0] * m
    remaining = [b] * m
    copies_priced = [0] * m
    copies_delivered = [0] * m
    chosen = [0] * n
    awarded = [0] * n
    price_rows = [tuple(prices)]
    copies_rows = [tuple(copies_priced)]

    for i in order:
        avail = instance.universe.full_mask
        if track_supply:
            avail = 0
            for g in range(m):
                if remaining[g] > 0:
                    avail |= 1 << g
        decl = instance.declarations[i]
        best_j = -1
        best_value = None
        for j, dm in enumerate(decl.demands):
            if dm.bundle & ~avail:
                continue
            cost = sum((prices[g] for g in members(dm.bundle)), Fraction(0))
            if dm.value >= cost and (best_value is None or dm.value > best_value):
                best_value = dm.value
                best_j = j
        s_i = decl.demands[best_j].bundle if best_j >= 0 else 0
        chosen[i] = s_i
        for g in members(s_i):
            prices[g] = prices[g] * r
            copies_priced[g] += 1
        r_i = s_i if deliver(i) else 0
        awarded[i] = r_i
        if track_supply:
            for g in members(r_i):
                remaining[g] -= 1
                copies_delivered[g] += 1
        price_rows.append(tuple(prices))
        copies_rows.append(tuple(copies_priced))

    if not track_supply:
        copies_delivered = list(copies_priced)

    return PriceTrace(
        mu=mu,
        p0=p0,
        r=r,
        order=tuple(order),
        chosen=tuple(chosen),
        awarded=tuple(awarded),
        price_rows=tuple(price_rows),
        copies_rows=tuple(copies_rows),
        final_prices=tuple(prices),
        copies_priced=tuple(copies_priced),
        copies_delivered=tuple(copies_delivered),
        max_bidder=max_bidder,
        epsilon=epsilon,
        q=q,
    )


def mpu(instance: Instance, mu, update_factor=None) -> tuple[Allocation, PriceTrace]:
    """Deterministic price-update auction with a known value scale mu.

    Bidders are served in declaration order; each receives her most
    valuable demand whose goods she can afford at current prices (ties to
    the smaller demand index), and the prices of those goods rise by the
    update factor r = (4bm)**(1/b).  With that r the output respects the
    supply automatically.  Passing another update_factor (for the
    overselling diagnostic) voids that guarantee.
    """
    mu = Fraction(mu)
    _check_mu(instance, mu)
    default = update_factor is None
    r = root_of(4 * instance.b * instance.m, instance.b) if default else update_factor
    trace = _price_engine(
        instance, mu, r, range(instance.n), track_supply=False, deliver=lambda i: True
    )
    if default:
        _guard_output(instance, trace.awarded)
    return trace.awarded, trace


def mpu_oversell(instance: Instance, mu) -> tuple[Allocation, PriceTrace]:
    """mpu with the slow factor r = 2**(1/b) and no supply cap.

    The output may oversell goods; it is bounded by the logarithmic
    copies-per-good guarantee checked by oversell_bound_ok.
    """
    return mpu(instance, mu, update_factor=root_of(2, instance.b))


def _max_bidder(instance: Instance) -> tuple[int, Fraction]:
    j, best = -1, Fraction(0)
    for i, decl in enumerate(instance.declarations):
        v = decl.max_value
        if v > best:
            j, best = i, v
    if j < 0:
        raise EmptyInstance("no positively valued demand")
    return j, best


def _modified_order(n: int, j: int) -> list[int]:
    return [j] + [i for i in range(n) if i != j]


def mpu_modified(
    instance: Instance,
    eps: Fraction = EPS_DEFAULT,
    update_factor=None,
    track_supply: bool = False,
) -> tuple[Allocation, PriceTrace]:
    """Self-calibrating price-update auction.

    The bidder j with the highest declared value (smallest index on ties)
    fixes mu = (1+eps) * v_max and is served first, so she always receives
    her most valuable demand; the rest follow in index order as in mpu.
    """
    eps = Fraction(eps)
    if not (0 < eps < 1):
        raise ValueError("eps must be in (0, 1)")
    j, vmax = _max_bidder(instance)
    mu = (1 + eps) * vmax
    default = update_factor is None
    r = root_of(4 * instance.b * instance.m, instance.b) if default else update_factor
    trace = _price_engine(
        instance,
        mu,
        r,
        _modified_order(instance.n, j),
        track_supply=track_supply,
        deliver=lambda i: True,
        max_bidder=j,
        epsilon=eps,
    )
    if default or track_supply:
        _guard_output(instance, trace.awarded)
    return trace.awarded, trace


def rounding_probability(d: int, b: int, m: int) -> float:
    """q = 1 / (2e * d**(1/b) * log2(4bm))."""
    return 1.0 / (2 * math.e * d ** (1.0 / b) * math.log2(4 * b * m))


def rounding_probability_mp(d: int, b: int, m: int, dps: int = 50):
    with mpmath.workdps(dps):
        return 1 / (2 * mpmath.e * mpmath.root(d, b) * mpmath.log(4 * b * m, 2))


def mpu_rand(instance: Instance, mu, coins: Sequence[bool]) -> tuple[Allocation, PriceTrace]:
    """Randomized rounding variant with a known scale mu.

    Prices move as if every chosen bundle were sold (factor 2**(1/b)), but
    a bidder actually receives her bundle only when her coin is heads;
    supply is tracked on deliveries, and bidders only see goods with
    remaining copies.
    """
    mu = Fraction(mu)
    _check_mu(instance, mu)
    if instance.d < 1:
        raise EmptyInstance("d >= 1 required")
    if len(coins) != instance.n:
        raise ValueError("one coin per bidder required")
    q = rounding_probability(instance.d, instance.b, instance.m)
    trace = _price_engine(
        instance,
        mu,
        root_of(2, instance.b),
        range(instance.n),
        track_supply=True,
        deliver=lambda i: bool(coins[i]),
        q=q,
    )
    _guard_output(instance, trace.awarded)
    return trace.awarded, trace


def mpu_modified_rand(
    instance: Instance, eps: Fraction = EPS_DEFAULT, coins: Sequence[bool] = (),
    q_override: float | None = None,
) -> tuple[Allocation, PriceTrace]:
    """Self-calibrating randomized rounding.

    The max bidder is always served; every other bidder is served exactly
    when her coin is heads.  coins has one entry per non-max bidder, in
    bidder-index order.  The all-heads realization coincides with
    mpu_modified run at r = 2**(1/b) with supply tracking.
    """
    eps = Fraction(eps)
    if not (0 < eps < 1):
        raise ValueError("eps must be in (0, 1)")
    j, vmax = _max_bidder(instance)
    if instance.d < 1:
        raise EmptyInstance("d >= 1 required")
    others = [i for i in range(instance.n) if i != j]
    if len(coins) != len(others):
        raise ValueError(f"expected {len(others)} coins, got {len(coins)}")
    coin_of = dict(zip(others, map(bool, coins)))
    q = q_override if q_override is not None else rounding_probability(
        instance.d, instance.b, instance.m
    )
    mu = (1 + eps) * vmax
    trace = _price_engine(
        instance,
        mu,
        root_of(2, instance.b),
        _modified_order(instance.n, j),
        track_supply=True,
        deliver=lambda i: True if i == j else coin_of[i],
        max_bidder=j,
        epsilon=eps,
        q=q,
    )
    _guard_output(instance, trace.awarded)
    return trace.awarded, trace


# ---------------------------------------------------------------------------
# outcome distributions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OutcomeDistribution:
    """Support of a universally truthful mechanism: exact probabilities
    over exact allocations."""

    support: tuple[tuple[Fraction, Allocation], ...]

    def __post_init__(self):
        total = sum((p for p, _ in self.support), Fraction(0))
        if total != 1:
            raise ValueError(f"probabilities sum to {total}, not 1")
        if any(p <= 0 for p, _ in self.support):
            raise ValueError("probabilities must be positive")

    def expected_welfare(self, instance: Instance) -> Fraction:
        return sum((p * welfare(instance, a) for p, a in self.support), Fraction(0))


@dataclass(frozen=True)
class CoinRealization:
    coins: tuple[int, ...]
    allocation: Allocation
    welfare: Fraction

    @property
    def heads(self) -> int:
        return sum(self.coins)

    @property
    def tails(self) -> int:
        return len(self.coins) - self.heads


@dataclass(frozen=True)
class RealizationSet:
    """All deterministic realizations of an n_coins-coin mechanism."""

    realizations: tuple[CoinRealization, ...]
    n_coins: int

    def expected_welfare(self, q):
        """Expected welfare at head-probability q.

        q may be a Fraction (exact result) or an mpmath float (high
        precision); each realization weighs q**heads * (1-q)**tails.
        """
        total = 0
        for r in self.realizations:
            total += r.welfare * q**r.heads * (1 - q) ** r.tails
        return total

    def distribution(self, q: Fraction) -> OutcomeDistribution:
        support = tuple(
            (q**r.heads * (1 - q) ** r.tails, r.allocation) for r in self.realizations
        )
        return OutcomeDistribution(support)


def enumerate_mpu_modified_rand(
    instance: Instance, eps: Fraction = EPS_DEFAULT, q_override: float | None = None,
    max_coins: int = 20,
) -> RealizationSet:
    """Run mpu_modified_rand on every coin vector (n-1 coins)."""
    n_coins = instance.n - 1
    if n_coins > max_coins:
        raise ValueError(f"{n_coins} coins exceed the enumeration cap")
    realizations = []
    for coins in itertools.product((0, 1), repeat=n_coins):
        alloc, _ = mpu_modified_rand(instance, eps, coins, q_override=q_override)
        realizations.append(CoinRealization(coins, alloc, welfare(instance, alloc)))
    return RealizationSet(tuple(realizations), n_coins)


# ---------------------------------------------------------------------------
# composite mechanism for unbounded demanded-set sizes
# ---------------------------------------------------------------------------


def _floor_power(m: int, b: int) -> int:
    """floor(m ** (b / (b + 1))) by integer search."""
    t = 1
    while (t + 1) ** (b + 1) <= m**b:
        t += 1
    return t


@dataclass(frozen=True)
class CompositeOutcome:
    """Fair coin over the capped-q rounding run and the super-item run.

    The super-item branch sells b copies of a single item representing the
    whole universe (each bidder bids her best value); a winner receives
    her best declared bundle.  Both branches are full realization sets, so
    exact expectations are available.
    """

    main: RealizationSet
    super_branch: RealizationSet
    d_tilde: int
    q_main: float
    q_super: float

    def expected_welfare(self, q_main=None, q_super=None):
        qm = self.q_main if q_main is None else q_main
        qs = self.q_super if q_super is None else q_super
        return (self.main.expected_welfare(qm) + self.super_branch.expected_welfare(qs)) / 2

    def flat_distribution(self, q_main: Fraction, q_super: Fraction) -> OutcomeDistribution:
        half = Fraction(1, 2)
        support = []
        for p, a in self.main.distribution(q_main).support:
            support.append((half * p, a))
        for p, a in self.super_branch.distribution(q_super).support:
            support.append((half * p, a))
        return OutcomeDistribution(tuple(support))


def composite_any_m(instance: Instance, eps: Fraction = EPS_DEFAULT) -> CompositeOutcome:
    """Two-branch composite: rounding with q computed for the capped set
    size floor(m**(b/(b+1))), or the super-item auction, each with
    probability 1/2."""
    m, b = instance.m, instance.b
    d_tilde = _floor_power(m, b)
    q_main = rounding_probability(d_tilde, b, m)
    main = enumerate_mpu_modified_rand(instance, eps, q_override=q_main)

    # super-item auction: one good in b copies, each bidder single-minded
    # for it at her best extended value
    full = instance.universe.full_mask
    super_decls = []
    best_bundles = []
    for i, decl in enumerate(instance.declarations):
        v = decl.max_value
        best_bundles.append(sigma(decl, full))
        demands = (Demand(1, v),) if v > 0 else ()
        super_decls.append(Declaration(demands, owner=i))
    super_instance = Instance(GoodUniverse(1, b), tuple(super_decls))
    q_super = rounding_probability(1, b, 1)
    raw = enumerate_mpu_modified_rand(super_instance, eps, q_override=q_super)

    mapped = []
    for r in raw.realizations:
        alloc = tuple(
            best_bundles[i] if mask else 0 for i, mask in enumerate(r.allocation)
        )
        _guard_output(instance, alloc)
        mapped.append(CoinRealization(r.coins, alloc, welfare(instance, alloc)))
    super_branch = RealizationSet(tuple(mapped), raw.n_coins)

    return CompositeOutcome(main, super_branch, d_tilde, q_main, q_super)


# ---------------------------------------------------------------------------
# rank and cardinality randomized mechanisms
# ---------------------------------------------------------------------------


def rand_exp(instance: Instance, budget: int | None = None) -> OutcomeDistribution:
    """Optimum of the rank-l single-minded sub-instance with probability
    1/k for each rank l."""
    k = instance.k
    if k == 0:
        return OutcomeDistribution(((Fraction(1), tuple([0] * instance.n)),))
    support = []
    p = Fraction(1, k)
    for ell in range(1, k + 1):
        sub = rank_restriction(instance, ell)
        _, alloc = optimal_welfare(sub, budget)
        _guard_output(instance, alloc)
        support.append((p, alloc))
    return OutcomeDistribution(tuple(support))


def rand_poly(instance: Instance) -> OutcomeDistribution:
    """Fair coin between the single best bid and greedy restricted to
    bundles of at most floor(sqrt(m)) goods (single supply only)."""
    if instance.b != 1:
        raise UnsupportedSupply("rand_poly requires single supply")

    best = None  # (value, bidder, demand_idx, bundle)
    for i, decl in enumerate(instance.declarations):
        for j, dm in enumerate(decl.demands):
            if best is None or dm.value > best[0]:
                best = (dm.value, i, j, dm.bundle)
    top_alloc = [0] * instance.n
    if best is not None:
        top_alloc[best[1]] = best[3]
    top_alloc = tuple(top_alloc)
    _guard_output(instance, top_alloc)

    cutoff = math.isqrt(instance.m)
    sub = restrict_instance(instance, cardinality_cutoff(cutoff))
    greedy_alloc, _ = greedy(sub)
    _guard_output(instance, greedy_alloc)

    half = Fraction(1, 2)
    return OutcomeDistribution(((half, top_alloc), (half, greedy_alloc)))


# ---------------------------------------------------------------------------
# per-run checks
# ---------------------------------------------------------------------------


def lemma3_checks(instance: Instance, trace: PriceTrace, opt: Fraction) -> dict:
    """The two exact welfare lower bounds of a deterministic price run:
    (r-1)*v >= sum(p*) - m*p0  and  v >= OPT - b*sum(p*)."""
    v = trace.priced_value(instance)
    p_star = sum(trace.final_prices, Fraction(0))
    ineq1 = (trace.r - 1) * v >= p_star - instance.m * trace.p0
    ineq2 = v + instance.b * p_star >= opt
    return {"lemma3_price_sum": bool(ineq1), "lemma3_opt_gap": bool(ineq2)}


def mpu_ratio_ok(instance: Instance, trace: PriceTrace, opt: Fraction) -> bool:
    """welfare * 2*(b*(r-1)+1) >= OPT for the default update factor."""
    v = trace.priced_value(instance)
    factor = 2 * (instance.b * (trace.r - 1) + 1)
    return bool(v * factor >= opt)


def oversell_bound_ok(instance: Instance, trace: PriceTrace) -> bool:
    """No good sells a copy at a price at or above mu: equivalently
    2**(copies-1) < (4bm)**b for every good (exact integers)."""
    cap = (4 * instance.b * instance.m) ** instance.b
    return all(ell == 0 or 2 ** (ell - 1) < cap for ell in trace.copies_priced)


def price_monotone_ok(trace: PriceTrace) -> bool:
    """Prices never decrease and move only by the update factor."""
    for row, nxt in zip(trace.price_rows, trace.price_rows[1:]):
        for p, pn in zip(row, nxt):
            if not (pn == p or pn == p * trace.r):
                return False
    return True
