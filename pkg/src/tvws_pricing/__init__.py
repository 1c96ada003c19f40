"""Hybrid registration / query-plan pricing for TV white-space database access."""

from .model import (
    TOL,
    ContractViolationError,
    CostModel,
    DomainError,
    EquilibriumOutcome,
    InvalidStateError,
    InvariantViolationError,
    MarketConfig,
    PlanMenu,
    PricePoint,
    PricingError,
    Scheme,
    SizeLimitError,
    StrategyProfile,
    TypeProfile,
)

__version__ = "0.1.0"
