from fractions import Fraction

import pytest

from veriauction.gallery import (
    PHI,
    BadDelta,
    prop10_triple,
    thm11_pair,
    thm12_pair,
    thm13_feasibility,
    thm13_pair,
)


def test_phi_surrogate_precision():
    exact = (1 + 5**0.5) / 2
    assert abs(float(PHI) - exact) / exact < 1e-15


def test_prop10_facts_at_tenth():
    case = prop10_triple(Fraction(1, 10))
    assert case.ok, case.verify()


def test_prop10_limit_form():
    # cycle total is -(1 - 2*delta): -0.5 at delta = 1/4
    case = prop10_triple(Fraction(1, 4))
    assert case.expected["cycle_total"] == -Fraction(1, 2)
    assert case.ok


def test_prop10_rejects_bad_delta():
    with pytest.raises(BadDelta):
        prop10_triple(Fraction(1, 2))
    with pytest.raises(BadDelta):
        prop10_triple(0)


def test_thm11_facts():
    case = thm11_pair(Fraction(1, 10))
    report = case.verify()
    assert report["ratio_2"][0] == Fraction(21, 11)
    assert case.ok, report


def test_thm12_facts():
    case = thm12_pair(Fraction(1, 10))
    report = case.verify()
    assert report["expected_ratio"][0] == Fraction(49, 40)
    assert case.ok, report


def test_thm13_facts():
    assert thm13_pair().ok


def test_thm13_feasibility_boundary():
    assert not thm13_feasibility(Fraction(109, 100))["feasible"]
    out = thm13_feasibility(Fraction(12, 10))
    assert out["feasible"]
    p, q = out["witness"]
    assert 0 <= p <= 1 and 0 <= q <= 1
    assert p >= (PHI - Fraction(12, 10)) / (Fraction(12, 10) * (PHI - 1))
    assert 1 - q >= (2 - Fraction(12, 10) * PHI) / (Fraction(12, 10) * (2 - PHI))
    assert q >= (p * PHI - 1) / (PHI - 1)
    assert thm13_feasibility(PHI)["feasible"]


def test_thm13_feasibility_monotone_in_rho():
    grid = [Fraction(n, 100) for n in range(100, 170, 3)]
    last = False
    for rho in grid:
        now = thm13_feasibility(rho)["feasible"]
        assert now or not last  # once feasible, stays feasible
        last = last or now
    assert last
