import itertools

import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from tvws_pricing.contract import (
    ScreeningCoefficients,
    complete_info_menu,
    incomplete_info_menu,
    ironed_queries,
    ironing_optimal_menu,
    price_recursion,
    screening_coefficients,
    screening_revenue,
    valid_query_sequence,
    verify_menu,
)
from tvws_pricing.model import (
    ContractViolationError,
    CostModel,
    InvalidStateError,
    MarketConfig,
    PlanMenu,
    PricePoint,
    TypeProfile,
)

CFG = MarketConfig()
FREE = CostModel()
PP0 = PricePoint(0, 0)


def _coeffs(g):
    return ScreeningCoefficients(tuple(g), (1.0,) * (len(g) - 1) + (0.0,), 0)


@st.composite
def ladders(draw, max_types=6, max_count=12):
    t = draw(st.integers(1, max_types))
    thetas = sorted(draw(st.sets(st.integers(1, 40), min_size=t, max_size=t)))
    counts = draw(st.lists(st.integers(0, max_count), min_size=t, max_size=t))
    assume(sum(counts) > 0)
    return TypeProfile(tuple(float(x) for x in thetas), tuple(counts))


def test_complete_info_threshold_examples():
    cost = CostModel(0, 1.2, 0.05)
    high = complete_info_menu([10.0], PP0, 100, CFG, cost)
    low = complete_info_menu([5.0], PP0, 100, CFG, cost)
    assert high.plans[0][0] == 100
    assert high.plans[0][1] == pytest.approx(10 * 60 / 100)
    assert low.plans == ((0, 0.0),)
    every = complete_info_menu([1.0, 3.0, 7.0], PricePoint(30, 0), 3, CFG, FREE)
    assert every.queries == (100, 100, 100)
    assert complete_info_menu([4.0], PP0, 0, CFG, FREE).items == ((0, 0.0),)


def test_screening_coefficients_examples():
    tp = TypeProfile((1.0, 2.0), (5, 5))
    c = screening_coefficients(tp, PP0, 10, CFG, FREE)
    assert c.g == pytest.approx((0.0, 0.6))
    assert c.deltas == (1.0, 0.0)
    full = screening_coefficients(tp, PricePoint(60, 0), 10, CFG, CostModel(0, 1.2, 0.1))
    assert all(g <= 0 for g in full.g)
    assert full.g[0] == pytest.approx(-10 * 0.5 * 0.1)
    with pytest.raises(InvalidStateError):
        screening_coefficients(tp, PP0, 0, CFG, FREE)


def test_valid_query_sequence_examples():
    assert valid_query_sequence(_coeffs((0.0, 0.6)), CFG) == (0, 100)
    assert valid_query_sequence(_coeffs((1, 2, 3)), CFG) == (100, 100, 100)
    assert valid_query_sequence(_coeffs((-1, 0, 0)), CFG) == (0, 0, 0)
    # the scan stops at the first non-positive value from the top
    assert valid_query_sequence(_coeffs((5, -1, 2)), CFG) == (0, 0, 100)


def test_price_recursion_examples():
    tp = TypeProfile((1.0, 2.0), (5, 5))
    assert price_recursion((0, 100), tp, PP0, 10, CFG).prices == pytest.approx((0, 12))
    assert price_recursion((0, 0), tp, PP0, 10, CFG).prices == (0, 0)
    assert price_recursion((100, 100), tp, PP0, 10, CFG).prices == pytest.approx((6, 6))
    with pytest.raises(ContractViolationError):
        price_recursion((100, 0), tp, PP0, 10, CFG)


@pytest.mark.parametrize(
    "g, expected", [((-1, 2), (0, 5)), ((2, -1), (5, 5)), ((2, -3), (0, 0))]
)
def test_ironing_examples(g, expected):
    assert ironed_queries(g, 5) == expected


def test_ironing_needs_service_population():
    with pytest.raises(InvalidStateError):
        ironing_optimal_menu(TypeProfile((1.0,), (1,)), PP0, 0, CFG, FREE)


def test_verify_menu_catches_violations():
    tp = TypeProfile((1.0, 2.0), (5, 5))
    good = price_recursion((0, 100), tp, PP0, 10, CFG)
    assert verify_menu(good, tp, PP0, 10, CFG).passed
    greedy = PlanMenu.from_plans([(100, 6.5), (100, 6.5)])
    report = verify_menu(greedy, tp, PP0, 10, CFG)
    assert not report.ir[0] and "IR(1)" in report.failures()
    twin = PlanMenu.from_plans([(100, 6.0), (100, 9.0)])
    report = verify_menu(twin, tp, PP0, 10, CFG)
    assert not report.ic[(1, 0)] and report.ic[(0, 1)]


def test_incomplete_menu_skips_empty_types():
    tp = TypeProfile((1.0, 2.0, 3.0, 4.0), (0, 6, 0, 4))
    menu = incomplete_info_menu(tp, PP0, 10, CFG, FREE)
    reduced = TypeProfile((2.0, 4.0), (6, 4))
    small = incomplete_info_menu(reduced, PP0, 10, CFG, FREE)
    assert menu.plans[1] == small.plans[0]
    assert menu.plans[3] == small.plans[1]
    assert menu.plans[0] == (0, 0.0)
    assert verify_menu(menu, tp, PP0, 10, CFG).passed


def _menu_revenue(menu, tp, mu1, eps1):
    # direct sum over buyers; independent of the g coefficients
    return sum(
        mu1 * c / tp.n_sus * (p - eps1 * q) for c, (q, p) in zip(tp.counts, menu.plans)
    )


@given(
    tp=ladders(max_types=3, max_count=6),
    m=st.integers(1, 5),
    b_r=st.sampled_from([0.0, 6.0, 30.0]),
    mu1=st.integers(1, 12),
    eps1=st.sampled_from([0.0, 0.01, 0.2]),
)
def test_ironing_matches_exhaustive_search(tp, m, b_r, mu1, eps1):
    cfg = MarketConfig(n_periods=m)
    pp = PricePoint(b_r, 0)
    cost = CostModel(0, 1.2, eps1)
    menu, revenue = ironing_optimal_menu(tp, pp, mu1, cfg, cost)
    best = max(
        _menu_revenue(price_recursion(qs, tp, pp, mu1, cfg), tp, mu1, eps1)
        for qs in itertools.product(range(m + 1), repeat=tp.n_types)
        if all(a <= b for a, b in zip(qs, qs[1:]))
    )
    assert revenue == pytest.approx(best, abs=1e-9)
    assert _menu_revenue(menu, tp, mu1, eps1) == pytest.approx(best, abs=1e-9)
    valid = incomplete_info_menu(tp, pp, mu1, cfg, cost)
    assert _menu_revenue(valid, tp, mu1, eps1) <= revenue + 1e-9


@given(
    tp=ladders(), b_r=st.sampled_from(CFG.reserve_grid()),
    mu1=st.integers(1, 100), eps1=st.sampled_from([0.0, 0.02, 0.05]),
)
def test_screening_menu_is_sound(tp, b_r, mu1, eps1):
    pp = PricePoint(b_r, 0)
    menu = incomplete_info_menu(tp, pp, mu1, CFG, CostModel(0, 1.2, eps1))
    qs = menu.queries
    assert all(a <= b for a, b in zip(qs, qs[1:]))
    assert set(qs) <= {0, CFG.n_periods}
    assert verify_menu(menu, tp, pp, mu1, CFG).passed


@given(tp=ladders(), mu1=st.integers(1, 99), extra=st.integers(1, 50), eps1=st.floats(0, 0.1))
def test_threshold_moves_up_with_more_buyers(tp, mu1, extra, eps1):
    cost = CostModel(0, 1.2, eps1)
    a = screening_coefficients(tp, PP0, mu1, CFG, cost)
    b = screening_coefficients(tp, PP0, mu1 + extra, CFG, cost)
    assert b.threshold_index >= a.threshold_index
    qa, qb = valid_query_sequence(a, CFG), valid_query_sequence(b, CFG)
    assert all(y <= x for x, y in zip(qa, qb))


@given(tp=ladders(), b_r=st.sampled_from([0.0, 12.0]), mu1=st.integers(1, 60), eps1=st.floats(0, 0.1))
def test_screening_revenue_equals_menu_revenue(tp, b_r, mu1, eps1):
    pp = PricePoint(b_r, 0)
    cost = CostModel(0, 1.2, eps1)
    coeffs = screening_coefficients(tp, pp, mu1, CFG, cost)
    qs = valid_query_sequence(coeffs, CFG)
    menu = price_recursion(qs, tp, pp, mu1, CFG)
    assert screening_revenue(coeffs, qs) == pytest.approx(
        _menu_revenue(menu, tp, mu1, eps1), abs=1e-7
    )
