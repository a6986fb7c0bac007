import itertools
from fractions import Fraction

import mpmath

from veriauction import GoodUniverse, Instance, bundle_of, declaration, welfare
from veriauction.family import declaration_table, instance_from_indices, table_size
from veriauction.mechanisms import (
    composite_any_m,
    enumerate_mpu_modified_rand,
    rand_exp,
    rand_poly,
    rounding_probability_mp,
)
from veriauction.model import extend_valuation, is_feasible
from veriauction.oracle import optimal_welfare


def test_rand_exp_single_minded_is_deterministic_optimum():
    inst = Instance(
        GoodUniverse(2, 1),
        (declaration([([0], 4)], owner=0), declaration([([1], 3)], owner=1)),
    )
    dist = rand_exp(inst)
    assert len(dist.support) == 1
    assert dist.support[0][0] == 1
    assert dist.expected_welfare(inst) == 7


def test_rand_exp_probabilities_and_bound_small_exhaustive():
    table = declaration_table(2, 3)
    nd = table_size(2, 3)
    for idxs in itertools.product(range(0, nd, 7), repeat=2):
        inst = instance_from_indices(table, idxs)
        dist = rand_exp(inst)
        k = inst.k
        assert all(p == Fraction(1, k) for p, _ in dist.support)
        assert len(dist.support) == k
        opt, _ = optimal_welfare(inst)
        assert dist.expected_welfare(inst) * k >= opt


def test_rand_exp_equal_rank_optima_when_symmetric():
    inst = Instance(
        GoodUniverse(2, 1),
        (
            declaration([([0], 3), ([1], 3)], owner=0),
            declaration([([1], 3), ([0], 3)], owner=1),
        ),
    )
    dist = rand_exp(inst)
    values = [welfare(inst, a) for _, a in dist.support]
    assert values[0] == values[1] == 6


def test_rand_poly_single_bidder_both_branches_award():
    inst = Instance(GoodUniverse(2, 1), (declaration([([0], 4)], owner=0),))
    dist = rand_poly(inst)
    assert [a for _, a in dist.support] == [(bundle_of([0]),), (bundle_of([0]),)]
    assert dist.expected_welfare(inst) == 4


def test_rand_poly_top_branch_recovers_large_bundle():
    # a full-universe demand above sqrt(m) is invisible to the capped
    # greedy branch but carried by the top-bid branch
    m = 4
    inst = Instance(
        GoodUniverse(m, 1),
        (
            declaration([([0, 1, 2, 3], 100), ([0], 1)], owner=0),
            declaration([([1], 2)], owner=1),
        ),
    )
    dist = rand_poly(inst)
    top_alloc = dist.support[0][1]
    greedy_alloc = dist.support[1][1]
    assert top_alloc[0] == bundle_of([0, 1, 2, 3])
    assert greedy_alloc[0] in (0, bundle_of([0]))
    opt, _ = optimal_welfare(inst)
    ew = dist.expected_welfare(inst)
    gap = opt - 2 * ew
    assert gap <= 0 or (2 * ew) ** 2 * m >= gap**2


def test_rand_poly_bound_on_small_exhaustive_family():
    table = declaration_table(3, 2)
    nd = table_size(3, 2)
    for idxs in itertools.product(range(0, nd, 11), repeat=2):
        inst = instance_from_indices(table, idxs)
        dist = rand_poly(inst)
        opt, _ = optimal_welfare(inst)
        ew = dist.expected_welfare(inst)
        t = 2 * ew
        gap = opt - t
        assert gap <= 0 or t * t * inst.m >= gap * gap


def test_realization_set_enumerates_all_vectors():
    inst = Instance(
        GoodUniverse(2, 1),
        (
            declaration([([0], 9)], owner=0),
            declaration([([1], 5)], owner=1),
            declaration([([0], 4), ([1], 3)], owner=2),
        ),
    )
    rs = enumerate_mpu_modified_rand(inst)
    assert rs.n_coins == 2
    assert len(rs.realizations) == 4
    assert all(is_feasible(inst, r.allocation) for r in rs.realizations)
    # exact expectation at q = 1/2 equals the plain average
    avg = sum((r.welfare for r in rs.realizations), Fraction(0)) / 4
    assert rs.expected_welfare(Fraction(1, 2)) == avg
    dist = rs.distribution(Fraction(1, 2))
    assert sum((p for p, _ in dist.support), Fraction(0)) == 1


def test_modified_rand_expected_welfare_bound_small_batch():
    from veriauction.generator import GeneratorSpec, generate

    for seed in range(40):
        inst = generate(
            GeneratorSpec(n=1 + seed % 4, m=1 + seed % 4, k=2, b=1 + seed % 2, seed=seed)
        )
        if inst.d < 1:
            continue
        rs = enumerate_mpu_modified_rand(inst)
        q = rounding_probability_mp(inst.d, inst.b, inst.m)
        opt, _ = optimal_welfare(inst)
        assert rs.expected_welfare(q) >= q / 8 * float(opt) - mpmath.mpf("1e-12")


def test_composite_single_good_branches_coincide():
    inst = Instance(
        GoodUniverse(1, 1),
        (declaration([([0], 5)], owner=0), declaration([([0], 3)], owner=1)),
    )
    outcome = composite_any_m(inst)
    assert outcome.d_tilde == 1
    assert outcome.q_main == outcome.q_super
    main = [(r.coins, r.welfare) for r in outcome.main.realizations]
    sup = [(r.coins, r.welfare) for r in outcome.super_branch.realizations]
    assert main == sup


def test_composite_super_branch_bids_best_extended_value():
    # two-good family: the super-item branch values each bidder at her
    # best bundle value, so the max bidder always recovers welfare 2
    rival = declaration([([0], 1)], owner=1)
    v1 = declaration([([0, 1], 2), ([1], 0)], owner=0)
    inst = Instance(GoodUniverse(2, 1), (v1, rival))
    full = inst.universe.full_mask
    assert extend_valuation(v1, full) == 2
    assert extend_valuation(rival, full) == 1
    outcome = composite_any_m(inst)
    for r in outcome.super_branch.realizations:
        assert r.allocation[0] == bundle_of([0, 1])
        assert r.welfare == 2
        assert is_feasible(inst, r.allocation)


def test_composite_empirical_ratio_envelope():
    # worst observed OPT / E[welfare], normalized by m**(1/(b+1)) * log2(4bm),
    # stays under a frozen constant on a seeded sweep
    import math

    from veriauction.generator import GeneratorSpec, generate

    worst = 0.0
    for seed in range(60):
        inst = generate(
            GeneratorSpec(n=1 + seed % 3, m=1 + seed % 4, k=2, b=1 + seed % 2,
                          seed=40_000 + seed, value_hi=20)
        )
        if inst.max_value == 0:
            continue
        outcome = composite_any_m(inst)
        expected = float(outcome.expected_welfare())
        opt, _ = optimal_welfare(inst)
        envelope = inst.m ** (1 / (inst.b + 1)) * math.log2(4 * inst.b * inst.m)
        worst = max(worst, float(opt) / expected / envelope)
    assert worst <= 4.0


def test_composite_supply_two_super_branch_feasible():
    inst = Instance(
        GoodUniverse(2, 2),
        (
            declaration([([0, 1], 6)], owner=0),
            declaration([([0, 1], 5)], owner=1),
            declaration([([0], 4)], owner=2),
        ),
    )
    outcome = composite_any_m(inst)
    for r in outcome.main.realizations + outcome.super_branch.realizations:
        assert is_feasible(inst, r.allocation)
    assert float(outcome.expected_welfare()) > 0
