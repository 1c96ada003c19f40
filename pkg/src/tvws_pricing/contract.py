"""Stage-II query-plan design.

Complete information lets the operator extract each SU's whole surplus with
a boundary plan (0 or M queries).  Under incomplete information the menu has
to screen types: the virtual coefficients ``g_i`` decide which types receive
the full horizon, prices follow from the binding downward IC chain, and an
ironing routine provides the revenue-optimal monotone assignment used as a
benchmark.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .model import (
    TOL,
    ContractViolationError,
    CostModel,
    InvalidStateError,
    MarketConfig,
    PlanMenu,
    PricePoint,
    TypeProfile,
    valuation,
)


@dataclass(frozen=True)
class ScreeningCoefficients:
    """Virtual per-query margins ``g`` with the ladder gaps and threshold index.

    ``threshold_index`` counts types from the bottom: the lowest
    ``threshold_index`` types get zero queries under the valid-sequence rule.
    """

    g: tuple[float, ...]
    deltas: tuple[float, ...]
    threshold_index: int


def complete_info_menu(
    unregistered_types: Sequence[float],
    price_point: PricePoint,
    mu1: int,
    cfg: MarketConfig,
    cost: CostModel,
) -> PlanMenu:
    """One IR-binding boundary plan per listed SU.

    ``mu1`` is the number of SUs sharing the unreserved band.  It normally
    equals ``len(unregistered_types)``; callers that only need one plan per
    distinct type may pass the distinct types with the true head count.
    """
    if mu1 < 1 or not unregistered_types:
        return PlanMenu()
    m = cfg.n_periods
    per_query = (cfg.total_bandwidth - price_point.reserved_bandwidth) / (mu1 * m)
    plans = []
    for theta in unregistered_types:
        q = m if per_query * theta - cost.query_marginal_cost > TOL else 0
        plans.append((q, theta * valuation(q, price_point, mu1, cfg)))
    return PlanMenu.from_plans(plans)


def screening_coefficients(
    types: TypeProfile,
    price_point: PricePoint,
    mu1: int,
    cfg: MarketConfig,
    cost: CostModel,
) -> ScreeningCoefficients:
    """Coefficients of each ``q_i`` in the operator's screening objective.

    The type fractions are taken from ``types`` as given; ``mu1`` only scales
    the query-cost term.
    """
    if mu1 < 1:
        raise InvalidStateError("screening coefficients need mu1 >= 1")
    thetas = types.thetas
    betas = types.fractions
    t = len(thetas)
    per_query = (cfg.total_bandwidth - price_point.reserved_bandwidth) / cfg.n_periods
    deltas = tuple(thetas[i + 1] - thetas[i] for i in range(t - 1)) + (0.0,)

    g = []
    upper_mass = 0.0
    masses_above = [0.0] * t
    for i in range(t - 1, -1, -1):
        masses_above[i] = upper_mass
        upper_mass += betas[i]
    for i in range(t):
        g.append(
            betas[i] * thetas[i] * per_query
            - deltas[i] * per_query * masses_above[i]
            - mu1 * betas[i] * cost.query_marginal_cost
        )
    return ScreeningCoefficients(tuple(g), deltas, _threshold(g))


def _threshold(g: Sequence[float]) -> int:
    i_s = len(g)
    while i_s > 0 and g[i_s - 1] > TOL:
        i_s -= 1
    return i_s


def valid_query_sequence(coeffs: ScreeningCoefficients, cfg: MarketConfig) -> tuple[int, ...]:
    """Zero queries up to the highest non-positive coefficient, M above it."""
    i_s = _threshold(coeffs.g)
    t = len(coeffs.g)
    return (0,) * i_s + (cfg.n_periods,) * (t - i_s)


def price_recursion(
    qs: Sequence[int],
    types: TypeProfile,
    price_point: PricePoint,
    mu1: int,
    cfg: MarketConfig,
) -> PlanMenu:
    """Prices that bind the lowest type's IR and every adjacent downward IC."""
    if len(qs) != types.n_types:
        raise ContractViolationError(f"expected {types.n_types} query levels, got {len(qs)}")
    for lo, hi in zip(qs, qs[1:]):
        if hi < lo:
            raise ContractViolationError(f"query sequence {tuple(qs)} is not monotone")
    if mu1 < 1:
        if any(qs):
            raise InvalidStateError("cannot price queries with no unregistered SU")
        return PlanMenu.from_plans((0, 0.0) for _ in qs)

    plans = []
    price = 0.0
    prev_value = 0.0
    for theta, q in zip(types.thetas, qs):
        value = valuation(q, price_point, mu1, cfg)
        price += theta * (value - prev_value)
        prev_value = value
        plans.append((q, price))
    return PlanMenu.from_plans(plans)


def incomplete_info_menu(
    types: TypeProfile,
    price_point: PricePoint,
    mu1: int,
    cfg: MarketConfig,
    cost: CostModel,
) -> PlanMenu:
    """Screening menu from the valid query sequence and the price recursion.

    Types with no members are skipped when locating the threshold and then
    inherit the plan of the nearest populated type below them.
    """
    if mu1 < 1:
        return PlanMenu.from_plans((0, 0.0) for _ in types.thetas)
    present = [i for i, c in enumerate(types.counts) if c > 0]
    reduced = TypeProfile(
        tuple(types.thetas[i] for i in present), tuple(types.counts[i] for i in present)
    )
    coeffs = screening_coefficients(reduced, price_point, mu1, cfg, cost)
    reduced_q = valid_query_sequence(coeffs, cfg)

    qs = []
    current = 0
    it = iter(zip(present, reduced_q))
    nxt = next(it, None)
    for i in range(types.n_types):
        if nxt is not None and nxt[0] == i:
            current = nxt[1]
            nxt = next(it, None)
        qs.append(current)
    return price_recursion(qs, types, price_point, mu1, cfg)


def screening_revenue(coeffs: ScreeningCoefficients, qs: Sequence[int]) -> float:
    """Plan revenue net of query cost when ``mu1 * beta_i`` SUs buy item ``i``."""
    return sum(g * q for g, q in zip(coeffs.g, qs))


def ironed_queries(g: Sequence[float], n_periods: int) -> tuple[int, ...]:
    """Maximise ``sum(g_i * q_i)`` over monotone integer ``q`` in ``[0, M]``.

    Starts from the pointwise optimum and pools adjacent blocks whose levels
    decrease, re-optimising the pooled coefficient, until the levels are
    monotone.  Each block's objective is linear, so every level is 0 or M.
    """
    blocks: list[list] = []  # [coefficient sum, size, level]
    for gi in g:
        blocks.append([gi, 1, n_periods if gi > TOL else 0])
        while len(blocks) > 1 and blocks[-2][2] > blocks[-1][2]:
            coef, size, _ = blocks.pop()
            blocks[-1][0] += coef
            blocks[-1][1] += size
            blocks[-1][2] = n_periods if blocks[-1][0] > TOL else 0
    out: list[int] = []
    for _, size, level in blocks:
        out.extend([level] * size)
    return tuple(out)


def ironing_optimal_menu(
    types: TypeProfile,
    price_point: PricePoint,
    mu1: int,
    cfg: MarketConfig,
    cost: CostModel,
) -> tuple[PlanMenu, float]:
    """Revenue-optimal monotone menu and its service revenue.

    Serves as the optimality benchmark for the valid-sequence menu; it is not
    used inside equilibrium search.
    """
    if mu1 < 1:
        raise InvalidStateError("ironing needs mu1 >= 1")
    coeffs = screening_coefficients(types, price_point, mu1, cfg, cost)
    qs = ironed_queries(coeffs.g, cfg.n_periods)
    menu = price_recursion(qs, types, price_point, mu1, cfg)
    return menu, screening_revenue(coeffs, qs)


@dataclass(frozen=True)
class MenuReport:
    ir: tuple[bool, ...]
    ic: dict

    @property
    def passed(self) -> bool:
        return all(self.ir) and all(self.ic.values())

    def failures(self) -> list[str]:
        out = [f"IR({i + 1})" for i, ok in enumerate(self.ir) if not ok]
        out += [f"IC({i + 1}->{j + 1})" for (i, j), ok in sorted(self.ic.items()) if not ok]
        return out


def verify_menu(
    menu: PlanMenu,
    types: TypeProfile,
    price_point: PricePoint,
    mu1: int,
    cfg: MarketConfig,
) -> MenuReport:
    """Check every IR and every pairwise IC constraint within ``TOL``.

    Type ``i`` (zero-based) is matched with ``menu.items[i + 1]``.
    """
    plans = menu.plans
    if len(plans) != types.n_types:
        raise ContractViolationError(
            f"menu has {len(plans)} items for {types.n_types} types"
        )

    def util(theta, plan):
        q, p = plan
        if mu1 < 1:
            return -p
        return theta * valuation(q, price_point, mu1, cfg) - p

    ir = tuple(util(theta, plans[i]) >= -TOL for i, theta in enumerate(types.thetas))
    ic = {}
    for i, theta in enumerate(types.thetas):
        own = util(theta, plans[i])
        for j in range(len(plans)):
            if j != i:
                ic[(i, j)] = own >= util(theta, plans[j]) - TOL
    return MenuReport(ir, ic)
