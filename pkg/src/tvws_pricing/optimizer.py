"""Stage-I operator decision: exhaustive search over (reservation, fee).

The equilibrium at a grid point does not depend on the reservation-cost
coefficient or exponent, so the revenue side of the whole grid is computed
once per (scenario, population, market, query cost) and cached; sweeping the
reservation cost then only subtracts a different cost column.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Sequence

import numpy as np

from .contract import complete_info_menu, incomplete_info_menu
from .estimator import closed_form_mu_complete, estimate_mu, estimate_mu_over_fees
from .game import GameContext, Information, payoff_table
from .model import (
    TOL,
    CostModel,
    MarketConfig,
    PlanMenu,
    PricePoint,
    TypeProfile,
    do_utility,
    reservation_cost,
)


class Scenario(Enum):
    NON_STRATEGIC_COMPLETE = "non_strategic_complete"
    STRATEGIC_COMPLETE = "strategic_complete"
    STRATEGIC_INCOMPLETE = "strategic_incomplete"


@dataclass(frozen=True)
class PointOutcome:
    price_point: PricePoint
    do_utility: float
    mu0: int
    mu1: int
    menu: PlanMenu
    uptake: tuple[float, ...]
    mean_su_utility: float


@dataclass
class GridResult:
    best_point: PricePoint
    best_do_utility: float
    reserves: np.ndarray
    fees: np.ndarray
    do_utility: np.ndarray  # shape (len(reserves), len(fees))
    mu0: np.ndarray
    mu1: np.ndarray
    best: PointOutcome

    def surface_rows(self):
        """(B_R, r, U_DO, mu0, mu1) for every grid point, reserve-major."""
        for i, b_r in enumerate(self.reserves):
            for j, fee in enumerate(self.fees):
                yield (
                    float(b_r),
                    float(fee),
                    float(self.do_utility[i, j]),
                    int(self.mu0[i, j]),
                    int(self.mu1[i, j]),
                )


def nonstrategic_registration_count(types: TypeProfile, price_point: PricePoint) -> int:
    """Committed registrants who still pay once the fee is known.

    Each SU judges the fee against the share it expects from the full
    committed pool.
    """
    pools = types.registration_pools
    expected = sum(pools)
    if expected == 0:
        return 0
    share = price_point.reserved_bandwidth / expected
    return sum(
        pool
        for pool, theta in zip(pools, types.thetas)
        if share * theta - price_point.registration_fee >= -TOL
    )


def _payers(types: TypeProfile, price_point: PricePoint) -> tuple[int, ...]:
    pools = types.registration_pools
    expected = sum(pools)
    if expected == 0:
        return (0,) * types.n_types
    share = price_point.reserved_bandwidth / expected
    return tuple(
        pool if share * theta - price_point.registration_fee >= -TOL else 0
        for pool, theta in zip(pools, types.thetas)
    )


def _complete_info_service(
    types: TypeProfile, unregistered: Sequence[int], price_point, cfg, cost
) -> tuple[PlanMenu, tuple[float, ...]]:
    mu1 = sum(unregistered)
    if mu1 == 0:
        return PlanMenu.from_plans((0, 0.0) for _ in types.thetas), tuple(float(u) for u in unregistered)
    menu = complete_info_menu(types.thetas, price_point, mu1, cfg, cost)
    return menu, tuple(float(u) for u in unregistered)


def evaluate_point(
    scenario: Scenario,
    price_point: PricePoint,
    types: TypeProfile,
    cfg: MarketConfig,
    cost: CostModel,
) -> PointOutcome:
    """Equilibrium head counts, stage-II menu and operator profit at one point."""
    cfg.check_point(price_point)
    n = types.n_sus
    b_r = price_point.reserved_bandwidth
    fee = price_point.registration_fee

    if scenario is Scenario.NON_STRATEGIC_COMPLETE:
        payers = _payers(types, price_point)
        mu0 = sum(payers)
        service_pool = tuple(c - p for c, p in zip(types.counts, types.registration_pools))
        mu1 = sum(service_pool)
        menu, uptake = _complete_info_service(types, service_pool, price_point, cfg, cost)
        su_total = sum(x * (b_r / mu0 * theta - fee) for x, theta in zip(payers, types.thetas) if x)

    elif scenario is Scenario.STRATEGIC_COMPLETE:
        ctx = GameContext(Information.COMPLETE, price_point, types, cfg, cost)
        est = closed_form_mu_complete(ctx)
        mu0, mu1 = est.mu0, est.mu1
        unregistered = tuple(c - x for c, x in zip(types.counts, est.representative))
        menu, uptake = _complete_info_service(types, unregistered, price_point, cfg, cost)
        su_total = sum(
            x * (b_r / mu0 * theta - fee) for x, theta in zip(est.representative, types.thetas) if x
        )

    else:
        ctx = GameContext(Information.INCOMPLETE, price_point, types, cfg, cost)
        est = estimate_mu(ctx)
        mu0, mu1 = est.mu0, est.mu1
        menu = incomplete_info_menu(types, price_point, mu1, cfg, cost)
        uptake = tuple(mu1 * beta for beta in types.fractions)
        table = payoff_table(ctx)
        su_total = 0.0
        for k, x in enumerate(est.representative):
            if x:
                su_total += x * table.registration[k][mu0]
            if types.counts[k] - x:
                su_total += (types.counts[k] - x) * table.service[k][mu1]

    profit = do_utility(price_point, mu0, zip(uptake, menu.plans), cost)
    return PointOutcome(price_point, profit, mu0, mu1, menu, uptake, su_total / n)


def _service_net(menu: PlanMenu, uptake: Sequence[float], eps1: float) -> float:
    return sum(u * (p - eps1 * q) for u, (q, p) in zip(uptake, menu.plans))


@lru_cache(maxsize=128)
def _revenue_surface(
    scenario: Scenario, types: TypeProfile, cfg: MarketConfig, eps1: float
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Fee income plus net plan income, and head counts, over the full grid."""
    cost = CostModel(query_marginal_cost=eps1)
    reserves = cfg.reserve_grid()
    fees = np.asarray(cfg.fee_grid())
    revenue = np.zeros((len(reserves), len(fees)))
    mu0 = np.zeros((len(reserves), len(fees)), dtype=np.int64)
    n = types.n_sus

    for i, b_r in enumerate(reserves):
        if scenario is Scenario.STRATEGIC_INCOMPLETE:
            row_mu0 = estimate_mu_over_fees(types, cfg, cost, b_r, fees)
        else:
            row_mu0 = np.empty(len(fees), dtype=np.int64)
        service_cache: dict = {}
        for j, fee in enumerate(fees):
            point = PricePoint(b_r, float(fee))
            if scenario is Scenario.NON_STRATEGIC_COMPLETE:
                m0 = nonstrategic_registration_count(types, point)
                key = None
            elif scenario is Scenario.STRATEGIC_COMPLETE:
                ctx = GameContext(Information.COMPLETE, point, types, cfg, cost)
                est = closed_form_mu_complete(ctx)
                m0 = est.mu0
                key = est.representative
            else:
                m0 = int(row_mu0[j])
                key = m0
            if key not in service_cache:
                if scenario is Scenario.NON_STRATEGIC_COMPLETE:
                    pool = tuple(c - p for c, p in zip(types.counts, types.registration_pools))
                    menu, uptake = _complete_info_service(types, pool, point, cfg, cost)
                elif scenario is Scenario.STRATEGIC_COMPLETE:
                    unreg = tuple(c - x for c, x in zip(types.counts, key))
                    menu, uptake = _complete_info_service(types, unreg, point, cfg, cost)
                else:
                    m1 = n - m0
                    menu = incomplete_info_menu(types, point, m1, cfg, cost)
                    uptake = tuple(m1 * beta for beta in types.fractions)
                service_cache[key] = _service_net(menu, uptake, eps1)
            row_mu0[j] = m0
            revenue[i, j] = m0 * fee + service_cache[key]
        mu0[i] = row_mu0

    if scenario is Scenario.NON_STRATEGIC_COMPLETE:
        mu1 = np.full_like(mu0, n - sum(types.registration_pools))
    else:
        mu1 = n - mu0
    for arr in (revenue, mu0, mu1):
        arr.setflags(write=False)
    return revenue, mu0, mu1


def grid_search(
    scenario: Scenario,
    types: TypeProfile,
    cfg: MarketConfig,
    cost: CostModel,
    reserves: Sequence[float] | None = None,
) -> GridResult:
    """Best (B_R, r) on the channel x fee grid.

    Ties within ``TOL`` go to the smaller reservation, then the smaller fee.
    ``reserves`` restricts the search to a subset of the reservation grid,
    e.g. ``[0]`` or ``[B]`` for the single-scheme baselines.
    """
    if types.n_sus != cfg.n_sus:
        raise ValueError(f"type profile has {types.n_sus} SUs, market has {cfg.n_sus}")
    revenue, mu0, mu1 = _revenue_surface(scenario, types, cfg, cost.query_marginal_cost)
    all_reserves = np.asarray(cfg.reserve_grid())
    fees = np.asarray(cfg.fee_grid())
    if reserves is None:
        rows = np.arange(len(all_reserves))
    else:
        rows = np.asarray(
            [int(np.argmin(np.abs(all_reserves - b))) for b in reserves], dtype=np.int64
        )
        rows = np.unique(rows)
    costs = np.asarray([reservation_cost(float(b), cost) for b in all_reserves[rows]])
    profit = revenue[rows] - costs[:, None]

    best_value = profit.max()
    flat = np.flatnonzero(profit.ravel() >= best_value - TOL)[0]
    i, j = divmod(int(flat), len(fees))
    point = PricePoint(float(all_reserves[rows][i]), float(fees[j]))
    best = evaluate_point(scenario, point, types, cfg, cost)
    return GridResult(
        best_point=point,
        best_do_utility=float(profit[i, j]),
        reserves=all_reserves[rows],
        fees=fees,
        do_utility=profit,
        mu0=mu0[rows],
        mu1=mu1[rows],
        best=best,
    )
