"""Core auction semantics shared by every other module.

Goods are dense integer indices ``0..m-1`` and bundles are int bitmasks
(``0`` is the empty bundle), which caps the universe at 64 goods for the
default build.  A bidder's declaration is an XOR list of at most ``k``
distinct non-empty bundles with nonnegative values; the value of an
arbitrary bundle extends to the best declared bundle contained in it.
All values are exact ``Fraction``s so that audit weights and cycle sums
compare exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Sequence

MAX_GOODS = 64

Bundle = int  # bitmask over goods; 0 is the empty bundle
Allocation = tuple  # one awarded Bundle per bidder


def bundle_of(goods: Iterable[int]) -> Bundle:
    """Bitmask for a collection of good indices."""
    mask = 0
    for g in goods:
        if g < 0 or g >= MAX_GOODS:
            raise ValueError(f"good index {g} out of range")
        mask |= 1 << g
    return mask


def members(mask: Bundle) -> tuple[int, ...]:
    """Sorted good indices in a bundle."""
    out = []
    g = 0
    while mask:
        if mask & 1:
            out.append(g)
        mask >>= 1
        g += 1
    return tuple(out)


def bundle_size(mask: Bundle) -> int:
    return bin(mask).count("1")


def lex_key(mask: Bundle) -> tuple[int, ...]:
    """Lexicographic order on the sorted member tuple; used for tie-breaks."""
    return members(mask)


def as_value(v) -> Fraction:
    """Coerce a JSON-ish value ('p/q' string, int, float, Fraction) to Fraction."""
    if isinstance(v, Fraction):
        return v
    if isinstance(v, int):
        return Fraction(v)
    if isinstance(v, str):
        return Fraction(v)
    if isinstance(v, float):
        return Fraction(str(v))
    raise TypeError(f"cannot interpret {v!r} as a value")


def value_to_json(v: Fraction):
    return int(v) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"


@dataclass(frozen=True)
class Demand:
    """One (bundle, value) pair of an XOR declaration."""

    bundle: Bundle
    value: Fraction

    def __post_init__(self):
        if self.bundle == 0:
            raise ValueError("demanded bundles must be non-empty")
        if not isinstance(self.value, Fraction):
            object.__setattr__(self, "value", as_value(self.value))
        if self.value < 0:
            raise ValueError("demand values must be nonnegative")


@dataclass(frozen=True)
class Declaration:
    """An XOR list of demands.  Ownership is positional in an Instance;
    the informational ``owner`` field does not take part in equality."""

    demands: tuple[Demand, ...]
    owner: int = field(default=-1, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "demands", tuple(self.demands))
        masks = [d.bundle for d in self.demands]
        if len(set(masks)) != len(masks):
            raise ValueError("demanded bundles must be pairwise distinct")

    def validate_strict(self) -> None:
        """Distinct positive values, as assumed by the threshold audit."""
        vals = [d.value for d in self.demands]
        if any(v <= 0 for v in vals):
            raise ValueError("strict mode requires positive values")
        if len(set(vals)) != len(vals):
            raise ValueError("strict mode requires pairwise distinct values")

    @property
    def max_value(self) -> Fraction:
        return max((d.value for d in self.demands), default=Fraction(0))

    def value_of(self, mask: Bundle) -> Fraction | None:
        """Declared value of an exactly demanded bundle, else None."""
        for d in self.demands:
            if d.bundle == mask:
                return d.value
        return None


def declaration(demands: Sequence[tuple[Iterable[int] | int, object]], owner: int = -1) -> Declaration:
    """Convenience constructor from (goods, value) pairs."""
    ds = []
    for goods, v in demands:
        mask = goods if isinstance(goods, int) else bundle_of(goods)
        ds.append(Demand(mask, as_value(v)))
    return Declaration(tuple(ds), owner)


@dataclass(frozen=True)
class GoodUniverse:
    """m goods, each available in b identical copies."""

    m: int
    b: int = 1

    def __post_init__(self):
        if self.m < 1 or self.m > MAX_GOODS:
            raise ValueError(f"m must be in [1, {MAX_GOODS}]")
        if self.b < 1:
            raise ValueError("b must be >= 1")

    @property
    def full_mask(self) -> Bundle:
        return (1 << self.m) - 1


@dataclass(frozen=True)
class Instance:
    """A universe together with one declaration per bidder."""

    universe: GoodUniverse
    declarations: tuple[Declaration, ...]

    def __post_init__(self):
        object.__setattr__(self, "declarations", tuple(self.declarations))
        full = self.universe.full_mask
        for decl in self.declarations:
            for d in decl.demands:
                if d.bundle & ~full:
                    raise ValueError("demand outside the good universe")

    @property
    def n(self) -> int:
        return len(self.declarations)

    @property
    def m(self) -> int:
        return self.universe.m

    @property
    def b(self) -> int:
        return self.universe.b

    @property
    def k(self) -> int:
        """Max demands per bidder (the 'mindedness' of the instance)."""
        return max((len(d.demands) for d in self.declarations), default=0)

    @property
    def d(self) -> int:
        """Max cardinality of a positively valued demanded bundle (0 if none)."""
        best = 0
        for decl in self.declarations:
            for dm in decl.demands:
                if dm.value > 0:
                    best = max(best, bundle_size(dm.bundle))
        return best

    @property
    def max_value(self) -> Fraction:
        return max((d.max_value for d in self.declarations), default=Fraction(0))

    def to_json(self) -> dict:
        return {
            "m": self.universe.m,
            "b": self.universe.b,
            "bidders": [
                {
                    "demands": [
                        {"set": list(members(dm.bundle)), "value": value_to_json(dm.value)}
                        for dm in decl.demands
                    ]
                }
                for decl in self.declarations
            ],
        }

    @staticmethod
    def from_json(obj: dict) -> "Instance":
        universe = GoodUniverse(int(obj["m"]), int(obj.get("b", 1)))
        decls = []
        for i, bd in enumerate(obj.get("bidders", [])):
            demands = tuple(
                Demand(bundle_of(entry["set"]), as_value(entry["value"]))
                for entry in bd.get("demands", [])
            )
            decls.append(Declaration(demands, owner=i))
        return Instance(universe, tuple(decls))

    def dump(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=2)

    @staticmethod
    def load(path) -> "Instance":
        with open(path) as fh:
            return Instance.from_json(json.load(fh))


def extend_valuation(decl: Declaration, mask: Bundle) -> Fraction:
    """Value of an arbitrary bundle: best demanded bundle contained in it.

    Total and monotone in the bundle regardless of the shape of the XOR
    list; equals the declared value on demanded bundles whenever the list
    is consistent (no superset demanded below a subset).
    """
    best = Fraction(0)
    for dm in decl.demands:
        if dm.bundle & ~mask == 0 and dm.value > best:
            best = dm.value
    return best


def sigma(decl: Declaration, mask: Bundle) -> Bundle:
    """The demanded bundle that defines extend_valuation(decl, mask).

    Inclusion-maximal among the demanded subsets attaining the extended
    value; 0 when the extended value is 0.  Ties among maximal bundles go
    to the lexicographically smallest member set, so the choice never
    depends on bid values of other bidders.
    """
    best = extend_valuation(decl, mask)
    if best == 0:
        return 0
    cands = [dm.bundle for dm in decl.demands if dm.bundle & ~mask == 0 and dm.value == best]
    maximal = [
        c for c in cands if not any(o != c and c & ~o == 0 for o in cands)
    ]
    return min(maximal, key=lex_key)


def verification_allows(truth: Declaration, declared: Declaration, awarded: Bundle) -> bool:
    """Whether declaring `declared` with true type `truth` survives inspection
    of the awarded bundle.

    Inspection catches exactly an overbid on the awarded bundle: the value
    the declaration assigns to it must not exceed the value the true type
    assigns to it.  An empty award is never inspected.
    """
    if awarded == 0:
        return True
    return extend_valuation(truth, awarded) >= extend_valuation(declared, awarded)


def welfare(instance: Instance, alloc: Allocation) -> Fraction:
    """Social welfare of an allocation under the instance's declarations."""
    if len(alloc) != instance.n:
        raise ValueError("allocation size mismatch")
    return sum(
        (extend_valuation(decl, mask) for decl, mask in zip(instance.declarations, alloc)),
        Fraction(0),
    )


def is_feasible(instance: Instance, alloc: Allocation) -> bool:
    """Supply respected and every non-empty award exactly a declared bundle."""
    if len(alloc) != instance.n:
        return False
    counts = [0] * instance.m
    for decl, mask in zip(instance.declarations, alloc):
        if mask == 0:
            continue
        if decl.value_of(mask) is None:
            return False
        for g in members(mask):
            counts[g] += 1
            if counts[g] > instance.b:
                return False
    return True


MechanismFn = Callable[[Instance], Allocation]
