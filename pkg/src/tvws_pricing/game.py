"""Stage-I registration game between secondary users.

Each SU either registers (sharing the reserved band with the other
registrants for a flat fee) or stays on the service-plan side.  Payoffs only
depend on the SU's own type and on how many SUs picked each side, which makes
the game an unweighted congestion game with player-specific payoffs.

Under incomplete information nobody observes which types ended up
unregistered, so the stage-II menu an SU anticipates is designed for the
population-wide type distribution and the current unregistered head count.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import numpy as np

from .contract import complete_info_menu, incomplete_info_menu
from .model import (
    TOL,
    CostModel,
    EquilibriumOutcome,
    InvalidStateError,
    InvariantViolationError,
    MarketConfig,
    PlanMenu,
    PricePoint,
    Scheme,
    SizeLimitError,
    StrategyProfile,
    TypeProfile,
    do_utility,
    valuation,
)

BRUTE_FORCE_LIMIT = 20


class Information(Enum):
    COMPLETE = "complete"
    INCOMPLETE = "incomplete"


@dataclass(frozen=True)
class GameContext:
    scenario: Information
    price_point: PricePoint
    types: TypeProfile
    cfg: MarketConfig
    cost: CostModel

    def __post_init__(self):
        if self.types.n_sus != self.cfg.n_sus:
            raise InvalidStateError(
                f"type profile holds {self.types.n_sus} SUs but the market has {self.cfg.n_sus}"
            )
        self.cfg.check_point(self.price_point)


def su_type_indices(types: TypeProfile) -> tuple[int, ...]:
    """Ladder position of each SU ID; IDs run from the highest type down."""
    out: list[int] = []
    for k in range(types.n_types - 1, -1, -1):
        out.extend([k] * types.counts[k])
    return tuple(out)


def stage_two_menu(ctx: GameContext, unregistered_counts, mu1: int) -> PlanMenu:
    """Menu with one item per type that the operator posts to ``mu1`` SUs.

    ``unregistered_counts`` is only consulted under complete information,
    where the operator sees who stayed unregistered.
    """
    if ctx.scenario is Information.COMPLETE:
        if mu1 < 1:
            return PlanMenu.from_plans((0, 0.0) for _ in ctx.types.thetas)
        return complete_info_menu(ctx.types.thetas, ctx.price_point, mu1, ctx.cfg, ctx.cost)
    return incomplete_info_menu(ctx.types, ctx.price_point, mu1, ctx.cfg, ctx.cost)


class PayoffTable:
    """Per-type payoffs for every head count on each side.

    ``registration[k][m]`` is a type-``k`` registrant's utility when ``m`` SUs
    register; ``service[k][m]`` is the service-plan utility when ``m`` SUs
    stay unregistered.  Index 0 is undefined and holds NaN.
    """

    def __init__(self, ctx: GameContext):
        n = ctx.cfg.n_sus
        pp = ctx.price_point
        thetas = ctx.types.thetas
        nan = float("nan")
        self.registration = [
            [nan] + [pp.reserved_bandwidth / m * theta - pp.registration_fee for m in range(1, n + 2)]
            for theta in thetas
        ]
        self.service = [[nan] + [0.0] * (n + 1) for _ in thetas]
        if ctx.scenario is Information.INCOMPLETE:
            for m in range(1, n + 2):
                menu = incomplete_info_menu(ctx.types, pp, m, ctx.cfg, ctx.cost)
                for k, (theta, plan) in enumerate(zip(thetas, menu.plans)):
                    q, p = plan
                    self.service[k][m] = theta * valuation(q, pp, m, ctx.cfg) - p

    def current(self, k: int, choice: Scheme, mu0: int, mu1: int) -> float:
        if choice == Scheme.REGISTRATION:
            return self.registration[k][mu0]
        return self.service[k][mu1]

    def deviation(self, k: int, choice: Scheme, mu0: int, mu1: int) -> float:
        """Utility after switching sides; the joined side gains one member."""
        if choice == Scheme.REGISTRATION:
            return self.service[k][mu1 + 1]
        return self.registration[k][mu0 + 1]


@lru_cache(maxsize=256)
def payoff_table(ctx: GameContext) -> PayoffTable:
    return PayoffTable(ctx)


def _check_profile(ctx: GameContext, profile: StrategyProfile) -> None:
    if profile.n_sus != ctx.cfg.n_sus:
        raise InvalidStateError(
            f"profile has {profile.n_sus} SUs, market has {ctx.cfg.n_sus}"
        )
    seen = [0] * ctx.types.n_types
    for k in profile.type_index:
        if not 0 <= k < ctx.types.n_types:
            raise InvalidStateError(f"type index {k} outside the ladder")
        seen[k] += 1
    if tuple(seen) != ctx.types.counts:
        raise InvalidStateError("profile type indices do not match the type counts")


def payoff(ctx: GameContext, profile: StrategyProfile, su_index: int) -> float:
    _check_profile(ctx, profile)
    if not 0 <= su_index < profile.n_sus:
        raise InvalidStateError(f"no SU with index {su_index}")
    table = payoff_table(ctx)
    return table.current(
        profile.type_index[su_index], profile.choices[su_index], profile.mu0, profile.mu1
    )


def is_nash(ctx: GameContext, profile: StrategyProfile) -> bool:
    """True when no SU gains more than ``TOL`` by switching sides alone."""
    _check_profile(ctx, profile)
    table = payoff_table(ctx)
    mu0, mu1 = profile.mu0, profile.mu1
    for a, k in zip(profile.choices, profile.type_index):
        if table.deviation(k, a, mu0, mu1) > table.current(k, a, mu0, mu1) + TOL:
            return False
    return True


def registration_equilibrium_complete(ctx: GameContext) -> StrategyProfile:
    """Admit types from the top while the whole class still profits, then
    admit members of the marginal type one at a time in ID order."""
    if ctx.scenario is not Information.COMPLETE:
        raise InvalidStateError("the descending-admission rule needs complete information")
    b_r = ctx.price_point.reserved_bandwidth
    fee = ctx.price_point.registration_fee
    thetas, counts = ctx.types.thetas, ctx.types.counts
    ids = su_type_indices(ctx.types)

    admitted = 0
    marginal = ctx.types.n_types - 1
    while b_r * thetas[marginal] > (admitted + counts[marginal]) * fee:
        admitted += counts[marginal]
        marginal -= 1
        if marginal < 0:
            break

    choices = [Scheme.SERVICE_PLAN] * len(ids)
    for su, k in enumerate(ids):
        if k > marginal:
            choices[su] = Scheme.REGISTRATION
    if marginal >= 0:
        for su, k in enumerate(ids):
            if k == marginal and b_r * thetas[k] > (admitted + 1) * fee:
                admitted += 1
                choices[su] = Scheme.REGISTRATION
    return StrategyProfile(tuple(choices), ids)


def realized_outcome(
    ctx: GameContext, profile: StrategyProfile, steps: int = 0
) -> EquilibriumOutcome:
    """Utilities and operator profit once stage II is played on ``profile``."""
    _check_profile(ctx, profile)
    table = payoff_table(ctx)
    mu0, mu1 = profile.mu0, profile.mu1
    utilities = tuple(
        table.current(k, a, mu0, mu1) for a, k in zip(profile.choices, profile.type_index)
    )
    registered = profile.registered_counts(ctx.types.n_types)
    unregistered = tuple(c - x for c, x in zip(ctx.types.counts, registered))
    menu = stage_two_menu(ctx, unregistered, mu1)
    profit = do_utility(ctx.price_point, mu0, zip(unregistered, menu.plans), ctx.cost)
    return EquilibriumOutcome(profile, utilities, profit, menu, steps, unregistered)


def best_response_dynamics(
    ctx: GameContext,
    initial: StrategyProfile | None = None,
    rng_seed: int | None = None,
) -> EquilibriumOutcome:
    """Round-robin improvement path over SU IDs until nobody wants to switch.

    Without ``initial`` every SU picks a side uniformly at random from a
    generator seeded with ``rng_seed``.  ``converged_in_steps`` counts the
    strategy switches made.
    """
    ids = su_type_indices(ctx.types)
    n = len(ids)
    if initial is None:
        rng = np.random.default_rng(rng_seed)
        choices = [int(a) for a in rng.integers(0, 2, size=n)]
    else:
        _check_profile(ctx, initial)
        choices = [int(a) for a in initial.choices]
        ids = initial.type_index

    reg = payoff_table(ctx).registration
    serv = payoff_table(ctx).service
    mu0 = choices.count(0)
    mu1 = n - mu0
    bound = n * (n + 1)
    switches = 0
    quiet = 0
    t = 0
    while quiet < n:
        i = t % n
        k = ids[i]
        if choices[i] == 0:
            move = reg[k][mu0] < serv[k][mu1 + 1] - TOL
        else:
            move = serv[k][mu1] < reg[k][mu0 + 1] - TOL
        if move:
            if choices[i] == 0:
                mu0, mu1 = mu0 - 1, mu1 + 1
            else:
                mu0, mu1 = mu0 + 1, mu1 - 1
            choices[i] = 1 - choices[i]
            switches += 1
            quiet = 0
            if switches > bound:
                raise InvariantViolationError(
                    f"improvement path exceeded N(N+1)={bound} switches"
                )
        else:
            quiet += 1
        t += 1
    profile = StrategyProfile(tuple(choices), ids)
    return realized_outcome(ctx, profile, switches)


def enumerate_nash_bruteforce(ctx: GameContext) -> list[StrategyProfile]:
    """Every pure NE, found by checking all ``2^N`` profiles in lexicographic order."""
    n = ctx.cfg.n_sus
    if n > BRUTE_FORCE_LIMIT:
        raise SizeLimitError(f"brute force limited to N <= {BRUTE_FORCE_LIMIT}, got {n}")
    ids = su_type_indices(ctx.types)
    found = []
    for bits in itertools.product((0, 1), repeat=n):
        profile = StrategyProfile(bits, ids)
        if is_nash(ctx, profile):
            found.append(profile)
    return found
