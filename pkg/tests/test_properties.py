"""Property tests for the valuation extension, its defining bundles and
the inspection predicate, plus the exact surd arithmetic."""

from fractions import Fraction

from hypothesis import given
from hypothesis import strategies as st

from veriauction.model import (
    Declaration,
    Demand,
    extend_valuation,
    sigma,
    verification_allows,
)
from veriauction.numbers import Quad, root_of

M = 6


@st.composite
def declarations(draw, max_demands=4, max_value=12):
    n_demands = draw(st.integers(1, max_demands))
    masks = draw(
        st.lists(st.integers(1, (1 << M) - 1), min_size=n_demands, max_size=n_demands, unique=True)
    )
    values = draw(
        st.lists(st.integers(0, max_value), min_size=n_demands, max_size=n_demands)
    )
    return Declaration(
        tuple(Demand(mask, Fraction(v)) for mask, v in zip(masks, values))
    )


bundles = st.integers(0, (1 << M) - 1)


@given(declarations(), bundles, bundles)
def test_extension_monotone(decl, s, t):
    lo, hi = s & t, s | t
    assert extend_valuation(decl, lo) <= extend_valuation(decl, hi)


@given(declarations(), bundles)
def test_sigma_subset_and_fixed_point(decl, s):
    defining = sigma(decl, s)
    assert defining & ~s == 0
    assert extend_valuation(decl, defining) == extend_valuation(decl, s)
    assert defining == 0 or any(d.bundle == defining for d in decl.demands)


@given(declarations(), bundles)
def test_sigma_idempotent(decl, s):
    defining = sigma(decl, s)
    assert sigma(decl, defining) == defining


@given(declarations(), bundles)
def test_truth_telling_never_caught(decl, s):
    assert verification_allows(decl, decl, sigma(decl, s))


@given(declarations(), declarations(), bundles)
def test_verification_matches_extension_comparison(truth, lie, s):
    allowed = verification_allows(truth, lie, s)
    if s == 0:
        assert allowed
    else:
        assert allowed == (extend_valuation(truth, s) >= extend_valuation(lie, s))


fractions = st.fractions(min_value=-20, max_value=20)


@given(fractions, fractions, fractions, fractions)
def test_quad_ordering_matches_floats(a1, c1, a2, c2):
    x = Quad(a1, c1, 2)
    y = Quad(a2, c2, 2)
    fx = float(a1) + float(c1) * 2**0.5
    fy = float(a2) + float(c2) * 2**0.5
    if abs(fx - fy) > 1e-9:
        assert (x < y) == (fx < fy)
    assert (x - y).sign() in (-1, 0, 1)


@given(fractions, fractions, fractions, fractions)
def test_quad_product_matches_floats(a1, c1, a2, c2):
    x = Quad(a1, c1, 2)
    y = Quad(a2, c2, 2)
    assert abs(float(x * y) - float(x) * float(y)) < 1e-6


def test_root_of_exactness():
    assert root_of(4, 1) == 4
    assert root_of(16, 2) == 4
    assert root_of(Fraction(9, 4), 2) == Fraction(3, 2)
    r = root_of(8, 2)
    assert isinstance(r, Quad)
    assert r * r == 8
    assert isinstance(root_of(7, 3), float)
