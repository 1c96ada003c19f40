"""Domain types and closed-form utility, valuation and cost functions.

Every other module builds on the dataclasses defined here. Money and
bandwidth are plain floats; equality tests on them go through ``TOL``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Iterable, Sequence

TOL = 1e-9


class PricingError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(PricingError, ValueError):
    """An argument lies outside the domain of a function or type."""


class InvalidStateError(PricingError):
    """A quantity was requested for a market state where it is undefined."""


class ContractViolationError(PricingError):
    """A contract menu violates a structural requirement."""


class InvariantViolationError(PricingError):
    """An algorithm broke a guarantee it is supposed to uphold."""


class SizeLimitError(PricingError):
    """An exhaustive routine was asked to enumerate too large a space."""


class Scheme(IntEnum):
    REGISTRATION = 0
    SERVICE_PLAN = 1


def _is_multiple(value: float, unit: float) -> bool:
    ratio = value / unit
    return abs(ratio - round(ratio)) <= 1e-9 * max(1.0, abs(ratio))


@dataclass(frozen=True)
class MarketConfig:
    """Population, horizon, bandwidth and pricing-grid parameters."""

    n_sus: int = 100
    n_periods: int = 100
    total_bandwidth: float = 60.0
    channel_width: float = 6.0
    fee_min: float = 0.0
    fee_max: float = 600.0
    fee_step: float = 1.0

    def __post_init__(self):
        if self.n_sus < 1:
            raise DomainError(f"n_sus must be >= 1, got {self.n_sus}")
        if self.n_periods < 1:
            raise DomainError(f"n_periods must be >= 1, got {self.n_periods}")
        if self.total_bandwidth <= 0:
            raise DomainError(f"total_bandwidth must be > 0, got {self.total_bandwidth}")
        if self.channel_width <= 0:
            raise DomainError(f"channel_width must be > 0, got {self.channel_width}")
        if not _is_multiple(self.total_bandwidth, self.channel_width):
            raise DomainError(
                f"total_bandwidth {self.total_bandwidth} is not a multiple of "
                f"channel_width {self.channel_width}"
            )
        if self.fee_min > self.fee_max:
            raise DomainError(f"fee_min {self.fee_min} exceeds fee_max {self.fee_max}")
        if self.fee_step <= 0:
            raise DomainError(f"fee_step must be > 0, got {self.fee_step}")

    @property
    def n_channels(self) -> int:
        return int(round(self.total_bandwidth / self.channel_width))

    def reserve_grid(self) -> tuple[float, ...]:
        """All admissible reservations 0, b0, 2*b0, ..., B."""
        return tuple(k * self.channel_width for k in range(self.n_channels + 1))

    def fee_grid(self) -> tuple[float, ...]:
        n = int(math.floor((self.fee_max - self.fee_min) / self.fee_step + 1e-9))
        return tuple(self.fee_min + k * self.fee_step for k in range(n + 1))

    def check_point(self, point: "PricePoint") -> None:
        b_r = point.reserved_bandwidth
        if b_r > self.total_bandwidth + TOL:
            raise DomainError(f"reserved bandwidth {b_r} exceeds B={self.total_bandwidth}")
        if not _is_multiple(b_r, self.channel_width) and b_r > 0:
            raise DomainError(f"reserved bandwidth {b_r} is not a whole number of channels")
        fee = point.registration_fee
        if not (self.fee_min - TOL <= fee <= self.fee_max + TOL):
            raise DomainError(
                f"registration fee {fee} outside [{self.fee_min}, {self.fee_max}]"
            )


@dataclass(frozen=True)
class TypeProfile:
    """The type ladder with integer per-type counts.

    ``reg_fractions`` holds the share of each type that is committed to
    registration in the non-strategic scenario; ``counts[i] * reg_fractions[i]``
    must be a whole number of SUs.
    """

    thetas: tuple[float, ...]
    counts: tuple[int, ...]
    reg_fractions: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "thetas", tuple(float(t) for t in self.thetas))
        object.__setattr__(self, "counts", tuple(int(c) for c in self.counts))
        if not self.reg_fractions:
            object.__setattr__(self, "reg_fractions", (0.0,) * len(self.thetas))
        else:
            object.__setattr__(self, "reg_fractions", tuple(float(g) for g in self.reg_fractions))

        if not self.thetas:
            raise DomainError("a type profile needs at least one type")
        if not (len(self.thetas) == len(self.counts) == len(self.reg_fractions)):
            raise DomainError("thetas, counts and reg_fractions must have equal length")
        if self.thetas[0] <= 0:
            raise DomainError(f"types must be positive, got theta^1={self.thetas[0]}")
        for lo, hi in zip(self.thetas, self.thetas[1:]):
            if not lo < hi:
                raise DomainError(f"types must be strictly increasing ({lo} !< {hi})")
        for i, c in enumerate(self.counts):
            if c < 0:
                raise DomainError(f"counts[{i}] is negative ({c})")
        if sum(self.counts) < 1:
            raise DomainError("a type profile needs at least one SU")
        for i, (c, g) in enumerate(zip(self.counts, self.reg_fractions)):
            if not 0.0 <= g <= 1.0:
                raise DomainError(f"reg_fractions[{i}]={g} outside [0, 1]")
            if abs(c * g - round(c * g)) > 1e-9:
                raise DomainError(
                    f"reg_fractions[{i}]={g} gives a fractional pool of {c * g} SUs"
                )

    @classmethod
    def with_registration_share(
        cls, thetas: Sequence[float], counts: Sequence[int], gamma: float
    ) -> "TypeProfile":
        """Profile whose registration pools approximate ``gamma`` of every type.

        Pools are apportioned with the largest-remainder rule so that each one
        is a whole number of SUs and the total is ``round(gamma * N)``.
        """
        if not 0.0 <= gamma <= 1.0:
            raise DomainError(f"gamma={gamma} outside [0, 1]")
        ideal = [c * gamma for c in counts]
        pools = [math.floor(x + 1e-12) for x in ideal]
        short = int(round(gamma * sum(counts))) - sum(pools)
        order = sorted(range(len(ideal)), key=lambda i: (-(ideal[i] - pools[i]), i))
        for i in order[: max(short, 0)]:
            pools[i] += 1
        fractions = [p / c if c else 0.0 for p, c in zip(pools, counts)]
        return cls(tuple(thetas), tuple(counts), tuple(fractions))

    @property
    def n_types(self) -> int:
        return len(self.thetas)

    @property
    def n_sus(self) -> int:
        return sum(self.counts)

    @property
    def fractions(self) -> tuple[float, ...]:
        n = self.n_sus
        return tuple(c / n for c in self.counts)

    @property
    def registration_pools(self) -> tuple[int, ...]:
        return tuple(int(round(c * g)) for c, g in zip(self.counts, self.reg_fractions))

    def with_counts(self, counts: Sequence[int]) -> "TypeProfile":
        """Same ladder, different population (used for the unregistered subset)."""
        return TypeProfile(self.thetas, tuple(counts))


@dataclass(frozen=True)
class CostModel:
    reservation_coeff: float = 0.0
    reservation_exponent: float = 1.2
    query_marginal_cost: float = 0.0

    def __post_init__(self):
        if self.reservation_coeff < 0:
            raise DomainError(f"reservation_coeff must be >= 0, got {self.reservation_coeff}")
        if self.reservation_exponent < 1:
            raise DomainError(
                f"reservation_exponent must be >= 1, got {self.reservation_exponent}"
            )
        if self.query_marginal_cost < 0:
            raise DomainError(
                f"query_marginal_cost must be >= 0, got {self.query_marginal_cost}"
            )


@dataclass(frozen=True)
class PricePoint:
    reserved_bandwidth: float
    registration_fee: float

    def __post_init__(self):
        if self.reserved_bandwidth < 0:
            raise DomainError(f"reserved bandwidth must be >= 0, got {self.reserved_bandwidth}")


Plan = tuple[int, float]
NULL_PLAN: Plan = (0, 0.0)


@dataclass(frozen=True)
class PlanMenu:
    """Query-price items; ``items[0]`` is always the null plan."""

    items: tuple[Plan, ...] = (NULL_PLAN,)

    def __post_init__(self):
        items = tuple((int(q), float(p)) for q, p in self.items)
        object.__setattr__(self, "items", items)
        if not items or items[0] != NULL_PLAN:
            raise ContractViolationError(f"item 0 must be the null plan, got {items[:1]}")
        for q, _ in items:
            if q < 0:
                raise ContractViolationError(f"negative query count {q}")

    @classmethod
    def from_plans(cls, plans: Iterable[Plan]) -> "PlanMenu":
        return cls((NULL_PLAN, *plans))

    @property
    def plans(self) -> tuple[Plan, ...]:
        """Non-null items in order."""
        return self.items[1:]

    @property
    def queries(self) -> tuple[int, ...]:
        return tuple(q for q, _ in self.plans)

    @property
    def prices(self) -> tuple[float, ...]:
        return tuple(p for _, p in self.plans)

    def check_horizon(self, n_periods: int) -> None:
        for q, _ in self.items:
            if q > n_periods:
                raise ContractViolationError(f"query count {q} exceeds M={n_periods}")


@dataclass(frozen=True)
class StrategyProfile:
    """Scheme choice and ladder position of every SU, indexed by SU ID."""

    choices: tuple[Scheme, ...]
    type_index: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "choices", tuple(Scheme(int(a)) for a in self.choices))
        object.__setattr__(self, "type_index", tuple(int(k) for k in self.type_index))
        if len(self.choices) != len(self.type_index):
            raise InvalidStateError("choices and type_index differ in length")

    @property
    def n_sus(self) -> int:
        return len(self.choices)

    @property
    def mu0(self) -> int:
        return sum(1 for a in self.choices if a == Scheme.REGISTRATION)

    @property
    def mu1(self) -> int:
        return self.n_sus - self.mu0

    def registered_counts(self, n_types: int) -> tuple[int, ...]:
        out = [0] * n_types
        for a, k in zip(self.choices, self.type_index):
            if a == Scheme.REGISTRATION:
                out[k] += 1
        return tuple(out)


@dataclass(frozen=True)
class EquilibriumOutcome:
    profile: StrategyProfile
    su_utilities: tuple[float, ...]
    do_utility: float
    menu: PlanMenu
    converged_in_steps: int = 0
    uptake: tuple[float, ...] = field(default=())


def compute_type(valuation_weight: float, signal_power: float, noise_power: float) -> float:
    """Per-unit-bandwidth revenue capacity ``w * log2(1 + S / n0)``."""
    if valuation_weight <= 0 or signal_power <= 0 or noise_power <= 0:
        raise DomainError(
            "valuation weight, signal power and noise power must all be positive"
        )
    return valuation_weight * math.log2(1.0 + signal_power / noise_power)


def valuation(q: int, price_point: PricePoint, mu1: int, cfg: MarketConfig) -> float:
    """Value of ``q`` queries when ``mu1`` SUs time-share the unreserved band."""
    if mu1 < 1:
        raise InvalidStateError("a service-plan valuation needs at least one unregistered SU")
    if not 0 <= q <= cfg.n_periods:
        raise DomainError(f"query count {q} outside [0, {cfg.n_periods}]")
    return (cfg.total_bandwidth - price_point.reserved_bandwidth) * q / (mu1 * cfg.n_periods)


def su_utility(
    su_type: float,
    choice: Scheme,
    price_point: PricePoint,
    mu0: int,
    plan: Plan,
    mu1: int,
    cfg: MarketConfig,
) -> float:
    if choice == Scheme.REGISTRATION:
        if mu0 < 1:
            raise InvalidStateError("registration utility needs mu0 >= 1")
        return price_point.reserved_bandwidth / mu0 * su_type - price_point.registration_fee
    q, p = plan
    if q == 0 and p == 0:
        return 0.0
    if mu1 < 1:
        raise InvalidStateError("service-plan utility needs mu1 >= 1")
    return su_type * valuation(q, price_point, mu1, cfg) - p


def reservation_cost(b: float, cost: CostModel) -> float:
    if b < 0:
        raise DomainError(f"bandwidth must be >= 0, got {b}")
    if b == 0:
        return 0.0
    return cost.reservation_coeff * b**cost.reservation_exponent


def do_utility(
    price_point: PricePoint,
    mu0: int,
    plan_uptake: Iterable[tuple[float, Plan]],
    cost: CostModel,
) -> float:
    """Operator profit: fees plus plan sales minus reservation and query costs.

    Uptake counts may be fractional when they are expectations over a type
    distribution rather than head counts.
    """
    revenue = mu0 * price_point.registration_fee
    queries = 0.0
    for count, (q, p) in plan_uptake:
        if count < 0:
            raise DomainError(f"negative plan uptake {count}")
        revenue += count * p
        queries += count * q
    return (
        revenue
        - reservation_cost(price_point.reserved_bandwidth, cost)
        - cost.query_marginal_cost * queries
    )
