"""Seeded random instance generation.

The RNG is numpy's PCG64 behind default_rng, so a (spec, seed) pair
replays byte-identically across platforms.  Bundles are sampled without
replacement per bidder with cardinality at most d_cap; values come from a
uniform integer range or a log-uniform integer range, with per-bidder
distinctness enforced by rejection in strict mode.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .model import Declaration, Demand, GoodUniverse, Instance


class SpecInvalid(Exception):
    pass


@dataclass(frozen=True)
class GeneratorSpec:
    n: int
    m: int
    k: int
    b: int = 1
    d_cap: int | None = None
    value_dist: str = "uniform"  # "uniform" | "log_uniform"
    value_lo: int = 1
    value_hi: int = 100
    seed: int = 0
    strict: bool = False

    def validate(self) -> None:
        if self.n < 1 or self.m < 1 or self.m > 64 or self.k < 1 or self.b < 1:
            raise SpecInvalid("need n,k,b >= 1 and 1 <= m <= 64")
        cap = self.d_cap if self.d_cap is not None else self.m
        if not (1 <= cap <= self.m):
            raise SpecInvalid("d_cap must be in [1, m]")
        if self.value_lo < 0 or self.value_hi < self.value_lo:
            raise SpecInvalid("bad value range")
        if self.value_dist not in ("uniform", "log_uniform"):
            raise SpecInvalid(f"unknown value distribution {self.value_dist!r}")
        if self.value_dist == "log_uniform" and self.value_lo < 1:
            raise SpecInvalid("log_uniform needs value_lo >= 1")
        if self.strict and self.value_hi - self.value_lo + 1 < self.k:
            raise SpecInvalid("value range too small for distinct values")


def _draw_value(rng: np.random.Generator, spec: GeneratorSpec) -> int:
    if spec.value_dist == "uniform":
        return int(rng.integers(spec.value_lo, spec.value_hi + 1))
    u = rng.uniform(math.log(spec.value_lo), math.log(spec.value_hi + 1))
    return min(spec.value_hi, max(spec.value_lo, int(math.exp(u))))


def generate(spec: GeneratorSpec) -> Instance:
    """Deterministic instance for (spec, spec.seed)."""
    spec.validate()
    rng = np.random.default_rng(np.random.PCG64(spec.seed))
    cap = spec.d_cap if spec.d_cap is not None else spec.m

    available = sum(math.comb(spec.m, c) for c in range(1, cap + 1))

    decls = []
    for i in range(spec.n):
        n_demands = min(int(rng.integers(1, spec.k + 1)), available)
        bundles: list[int] = []
        while len(bundles) < n_demands:
            card = int(rng.integers(1, cap + 1))
            goods = rng.choice(spec.m, size=card, replace=False)
            mask = 0
            for g in goods:
                mask |= 1 << int(g)
            if mask not in bundles:
                bundles.append(mask)
        while True:
            values = [_draw_value(rng, spec) for _ in bundles]
            if not spec.strict or len(set(values)) == len(values):
                break
        decls.append(
            Declaration(
                tuple(Demand(mask, Fraction(v)) for mask, v in zip(bundles, values)),
                owner=i,
            )
        )
    return Instance(GoodUniverse(spec.m, spec.b), tuple(decls))
