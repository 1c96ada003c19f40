"""Operator-side prediction of how many SUs register in equilibrium.

Under incomplete information the operator checks only "structured"
configurations: every type class but one acts as a block, and the remaining
class is split ``j`` / ``count - j``.  Any equilibrium can be reshuffled into
such a configuration without changing the head counts, so the set of
equilibrium registration counts is recovered in time linear in N for a fixed
number of types.

The structured scan fixes which registration counts occur.  How often each
one occurs is counted over SU-level profiles: at a fixed count, every type
class is either forced out, forced in or free to split, so the number of
equilibrium profiles is a single binomial coefficient.

Whether a configuration is an equilibrium depends on the registration fee
only through two linear bounds, so a whole column of fees can be settled from
one pass over the configurations (``estimate_mu_over_fees``).
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .game import GameContext, Information, payoff_table
from .model import (
    TOL,
    CostModel,
    InvalidStateError,
    InvariantViolationError,
    MarketConfig,
    PricePoint,
    SizeLimitError,
    TypeProfile,
)

MAX_TYPES = 16


@dataclass(frozen=True)
class MuEstimate:
    """``candidate_multiset`` holds ``(mu0, multiplicity)`` pairs sorted by value."""

    mu0: int
    mu1: int
    candidate_multiset: tuple[tuple[int, int], ...]
    representative: tuple[int, ...] = ()

    def counts(self) -> Counter:
        return Counter(dict(self.candidate_multiset))

    def support(self) -> tuple[int, ...]:
        return tuple(v for v, _ in self.candidate_multiset)


def _mode(tally: dict[int, int]) -> int:
    best = max(tally.values())
    return min(v for v, n in tally.items() if n == best)


def structured_configurations(counts: Sequence[int], split: int) -> np.ndarray:
    """Registered head count per type for every configuration with ``split`` as
    the free class, in enumeration order.

    Bit ``b`` of the block counter is the scheme (0 register, 1 service) of the
    ``b``-th remaining type in ladder order; the split class then sweeps
    ``j = 0..count`` registered members.
    """
    t = len(counts)
    others = [k for k in range(t) if k != split]
    masks = np.arange(2 ** (t - 1), dtype=np.int64)
    bits = (masks[:, None] >> np.arange(t - 1)) & 1
    blocks = np.zeros((len(masks), t), dtype=np.int64)
    blocks[:, others] = (1 - bits) * np.asarray([counts[k] for k in others], dtype=np.int64)
    sweep = counts[split] + 1
    out = np.repeat(blocks, sweep, axis=0)
    out[:, split] = np.tile(np.arange(sweep), len(masks))
    return out


class _Bounds:
    """Fee interval ``[lo, hi]`` over which each configuration is an NE."""

    def __init__(self, ctx: GameContext):
        table = payoff_table(ctx)
        self.counts = np.asarray(ctx.types.counts, dtype=np.int64)
        self.n = ctx.cfg.n_sus
        thetas = np.asarray(ctx.types.thetas)
        heads = np.arange(self.n + 2, dtype=float)
        heads[0] = np.nan
        # registration value before the fee, per type and registrant count
        self.gross = ctx.price_point.reserved_bandwidth * thetas[:, None] / heads[None, :]
        self.service = np.asarray(table.service)

    def __call__(self, configs: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        mu0 = configs.sum(axis=1)
        mu1 = self.n - mu0
        has_reg = configs > 0
        has_unreg = configs < self.counts[None, :]
        with np.errstate(invalid="ignore"):
            stay_reg = self.gross[:, mu0].T - self.service[:, np.minimum(mu1 + 1, self.n + 1)].T
            join_reg = self.gross[:, np.minimum(mu0 + 1, self.n + 1)].T - self.service[:, mu1].T
        hi = np.where(has_reg, stay_reg, np.inf).min(axis=1) + TOL
        lo = np.where(has_unreg, join_reg, -np.inf).max(axis=1) - TOL
        return mu0, lo, hi

    def profile_count(self, mu0: int, fee: float) -> int:
        """Number of SU-level NE profiles with exactly ``mu0`` registrants."""
        mu1 = self.n - mu0
        with np.errstate(invalid="ignore"):
            stay = self.gross[:, mu0] - self.service[:, min(mu1 + 1, self.n + 1)]
            join = self.gross[:, min(mu0 + 1, self.n + 1)] - self.service[:, mu1]
        # NaN marks an empty side, where the comparison is False as needed
        may_reg = stay + TOL >= fee
        may_stay_out = join - TOL <= fee
        forced_in = free = 0
        for c, r, u in zip(self.counts.tolist(), may_reg, may_stay_out):
            if c == 0:
                continue
            if r and u:
                free += c
            elif r:
                forced_in += c
            elif not u:
                return 0
        extra = mu0 - forced_in
        return math.comb(free, extra) if 0 <= extra <= free else 0


def _check_incomplete(ctx: GameContext) -> None:
    if ctx.scenario is not Information.INCOMPLETE:
        raise InvalidStateError("structured estimation is defined for incomplete information")
    if ctx.types.n_types > MAX_TYPES:
        raise SizeLimitError(f"structured estimation supports at most {MAX_TYPES} types")


def estimate_mu(ctx: GameContext) -> MuEstimate:
    """Most common registration count among equilibrium profiles.

    The candidate counts come from the structured configurations; each is
    weighted by the number of SU-level equilibrium profiles that share it.
    """
    _check_incomplete(ctx)
    bounds = _Bounds(ctx)
    fee = ctx.price_point.registration_fee
    first_config: dict[int, tuple[int, ...]] = {}
    for split in range(ctx.types.n_types):
        configs = structured_configurations(ctx.types.counts, split)
        mu0, lo, hi = bounds(configs)
        for row in np.flatnonzero((lo <= fee) & (fee <= hi)):
            first_config.setdefault(int(mu0[row]), tuple(int(x) for x in configs[row]))
    if not first_config:
        raise InvariantViolationError("no structured configuration is an equilibrium")
    tally = {m: bounds.profile_count(m, fee) for m in first_config}
    if min(tally.values()) == 0:
        raise InvariantViolationError("structured equilibrium with no matching profile")
    mode = _mode(tally)
    return MuEstimate(mode, ctx.cfg.n_sus - mode, tuple(sorted(tally.items())), first_config[mode])


def estimate_mu_over_fees(
    types: TypeProfile,
    cfg: MarketConfig,
    cost: CostModel,
    reserved_bandwidth: float,
    fees: Sequence[float],
) -> np.ndarray:
    """``estimate_mu(...).mu0`` for every fee in the ascending list ``fees``."""
    fees = np.asarray(fees, dtype=float)
    ctx = GameContext(
        Information.INCOMPLETE, PricePoint(reserved_bandwidth, float(fees[0])), types, cfg, cost
    )
    _check_incomplete(ctx)
    bounds = _Bounds(ctx)
    n_fees = len(fees)
    diff = np.zeros((cfg.n_sus + 1, n_fees + 1), dtype=np.int64)
    for split in range(types.n_types):
        mu0, lo, hi = bounds(structured_configurations(types.counts, split))
        start = np.searchsorted(fees, lo, side="left")
        stop = np.searchsorted(fees, hi, side="right")
        live = start < stop
        np.add.at(diff, (mu0[live], start[live]), 1)
        np.add.at(diff, (mu0[live], stop[live]), -1)
    hits = np.cumsum(diff, axis=1)[:, :n_fees] > 0
    if not hits.any(axis=0).all():
        raise InvariantViolationError("no structured configuration is an equilibrium")
    out = np.empty(n_fees, dtype=np.int64)
    for j, fee in enumerate(fees):
        support = np.flatnonzero(hits[:, j])
        if len(support) == 1:
            out[j] = support[0]
        else:
            out[j] = _mode({int(m): bounds.profile_count(int(m), float(fee)) for m in support})
    return out


def closed_form_mu_complete(ctx: GameContext) -> MuEstimate:
    """Registration count of the descending-admission equilibrium, in closed form."""
    if ctx.scenario is not Information.COMPLETE:
        raise InvalidStateError("the closed form applies to complete information")
    b_r = ctx.price_point.reserved_bandwidth
    fee = ctx.price_point.registration_fee
    thetas, counts = ctx.types.thetas, ctx.types.counts
    t = len(thetas)

    if fee == 0:
        mu0 = ctx.cfg.n_sus if b_r > 0 else 0
        reps = tuple(counts) if mu0 else (0,) * t
        return MuEstimate(mu0, ctx.cfg.n_sus - mu0, ((mu0, 1),), reps)

    # 1-based ladder positions k whose whole upper class profits at full size
    admitted = [
        k for k in range(1, t + 1) if b_r * thetas[k - 1] > fee * sum(counts[k - 1 :])
    ]
    marginal = (min(admitted) - 1) if admitted else t
    above = sum(counts[marginal:])
    extra = 0
    if marginal >= 1:
        slack = b_r * thetas[marginal - 1] / fee - above
        extra = min(max(0, math.ceil(slack) - 1), counts[marginal - 1])
    mu0 = above + extra

    reps = [0] * t
    for k in range(marginal, t):
        reps[k] = counts[k]
    if marginal >= 1:
        reps[marginal - 1] = extra
    return MuEstimate(mu0, ctx.cfg.n_sus - mu0, ((mu0, 1),), tuple(reps))
