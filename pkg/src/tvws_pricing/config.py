"""Experiment configuration files.

A config is plain text, one ``key = value`` per line.  ``#`` starts a
comment; blank lines are ignored.  List values are comma separated, and a
numeric list may also be written as an inclusive range ``start:stop:step``.

    # reservation vs. maintenance cost, both information scenarios
    experiment     = pricing
    scenarios      = strategic_complete, strategic_incomplete
    distributions  = distr1, distr2, distr3
    sweep_param    = eps0
    sweep_values   = 0:5.2:0.2
    seed           = 7

Recognised keys, by experiment kind:

* every kind: ``name``, ``experiment``, ``seed`` (required), ``output``,
  ``n_sus``, ``n_periods``, ``total_bandwidth``, ``channel_width``,
  ``fee_min``, ``fee_max``, ``fee_step``, ``eps0``, ``alpha``, ``eps1``,
  ``distributions``, ``thetas``, ``counts``, ``repetitions``,
  ``sweep_param``, ``sweep_values``
* ``pricing``: ``scenarios``, ``schemes``, ``gamma``
* ``contract_items``: ``reserved_bandwidth``, ``registration_fee``,
  ``unregistered``, ``information``
* ``convergence``: ``reserved_bandwidth``, ``registration_fee``,
  ``information``
* ``suboptimal``: ``reserved_bandwidth``

``eps0``, ``alpha`` and ``eps1`` accept lists; every combination is run.
Distributions are ``distr1`` .. ``distr5`` (the ten-type reference
populations), ``uniform`` (equal counts), ``random`` (a fresh multinomial
draw per repetition) or ``custom`` (``counts`` and optionally ``thetas``).
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .model import CostModel, DomainError, MarketConfig, PricePoint, TypeProfile
from .optimizer import Scenario

EXPERIMENTS = ("pricing", "contract_items", "suboptimal", "convergence")
SCHEMES = ("hybrid", "service_only", "registration_only")
INFORMATION = ("complete", "incomplete")

NAMED_DISTRIBUTIONS = {
    "distr1": (10, 10, 10, 10, 10, 10, 10, 10, 10, 10),
    "distr2": (1, 3, 5, 7, 9, 11, 13, 15, 17, 19),
    "distr3": (19, 17, 15, 13, 11, 9, 7, 5, 3, 1),
    "distr4": (2, 6, 10, 14, 18, 18, 14, 10, 6, 2),
    "distr5": (18, 14, 10, 6, 2, 2, 6, 10, 14, 18),
}
DISTRIBUTIONS = tuple(NAMED_DISTRIBUTIONS) + ("uniform", "random", "custom")

SWEEPABLE = {
    "pricing": ("none", "eps0", "eps1", "alpha"),
    "contract_items": ("none", "unregistered"),
    "suboptimal": ("n_types",),
    "convergence": ("n_sus",),
}


class ConfigError(ValueError):
    """Malformed or inconsistent experiment configuration."""


@dataclass(frozen=True)
class ExperimentSpec:
    name: str
    experiment: str
    seed: int
    market: MarketConfig = field(default_factory=MarketConfig)
    scenarios: tuple[str, ...] = ("strategic_complete",)
    schemes: tuple[str, ...] = ("hybrid",)
    gammas: tuple[float, ...] = (0.2, 0.5)
    eps0: tuple[float, ...] = (0.0,)
    alpha: tuple[float, ...] = (1.2,)
    eps1: tuple[float, ...] = (0.0,)
    distributions: tuple[str, ...] = ("distr1",)
    thetas: tuple[float, ...] = ()
    counts: tuple[int, ...] = ()
    sweep_param: str = "none"
    sweep_values: tuple[float, ...] = (0.0,)
    repetitions: int = 1
    reserved_bandwidth: float = 30.0
    registration_fee: float = 200.0
    unregistered: int = 50
    information: str = "incomplete"
    output: str | None = None

    def scenario_enums(self) -> tuple[Scenario, ...]:
        return tuple(Scenario(s) for s in self.scenarios)

    def cost_models(self) -> list[CostModel]:
        return [
            CostModel(e0, a, e1) for e0 in self.eps0 for a in self.alpha for e1 in self.eps1
        ]

    def default_thetas(self, n_types: int) -> tuple[float, ...]:
        if self.thetas:
            return self.thetas
        return tuple(float(k) for k in range(1, n_types + 1))

    def canonical(self) -> dict:
        """Everything that determines the output, as plain JSON types."""
        out = asdict(self)
        out.pop("output")
        return out

    def config_hash(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _floats(key: str, raw: str) -> tuple[float, ...]:
    values: list[float] = []
    for part in (p.strip() for p in raw.split(",")):
        if not part:
            raise ConfigError(f"{key}: empty list element")
        if ":" in part:
            bits = part.split(":")
            if len(bits) != 3:
                raise ConfigError(f"{key}: range must be start:stop:step, got {part!r}")
            start, stop, step = (_number(key, b) for b in bits)
            if step <= 0 or stop < start:
                raise ConfigError(f"{key}: bad range {part!r}")
            n = int(math.floor((stop - start) / step + 1e-9)) + 1
            # rounding keeps 0.2-style steps free of binary drift
            values.extend(round(start + k * step, 10) for k in range(n))
        else:
            values.append(_number(key, part))
    return tuple(values)


def _number(key: str, raw: str) -> float:
    try:
        value = float(raw)
    except ValueError:
        raise ConfigError(f"{key}: {raw!r} is not a number") from None
    if not math.isfinite(value):
        raise ConfigError(f"{key}: value must be finite")
    return value


def _int(key: str, raw: str) -> int:
    value = _number(key, raw)
    if value != int(value):
        raise ConfigError(f"{key}: {raw!r} is not an integer")
    return int(value)


def _names(key: str, raw: str, allowed: tuple[str, ...]) -> tuple[str, ...]:
    names = tuple(p.strip().lower() for p in raw.split(","))
    for n in names:
        if n not in allowed:
            raise ConfigError(f"{key}: unknown value {n!r}; expected one of {', '.join(allowed)}")
    return names


MARKET_KEYS = {
    "n_sus": ("n_sus", _int),
    "n_periods": ("n_periods", _int),
    "total_bandwidth": ("total_bandwidth", _number),
    "channel_width": ("channel_width", _number),
    "fee_min": ("fee_min", _number),
    "fee_max": ("fee_max", _number),
    "fee_step": ("fee_step", _number),
}


def parse_config(text: str) -> ExperimentSpec:
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.lower()
        if not key or not value:
            raise ConfigError(f"line {lineno}: empty key or value")
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        raw[key] = value

    if "experiment" not in raw:
        raise ConfigError("experiment: missing")
    if "seed" not in raw:
        raise ConfigError("seed: missing (every run must be reproducible)")
    experiment = _names("experiment", raw.pop("experiment"), EXPERIMENTS)[0]
    seed = _int("seed", raw.pop("seed"))
    if seed < 0:
        raise ConfigError("seed: must be non-negative")
    kwargs: dict = {"experiment": experiment, "seed": seed, "name": raw.pop("name", experiment)}

    market_kwargs = {}
    for key, (attr, conv) in MARKET_KEYS.items():
        if key in raw:
            market_kwargs[attr] = conv(key, raw.pop(key))

    simple = {
        "scenarios": lambda v: _names("scenarios", v, tuple(s.value for s in Scenario)),
        "schemes": lambda v: _names("schemes", v, SCHEMES),
        "gamma": lambda v: _floats("gamma", v),
        "eps0": lambda v: _floats("eps0", v),
        "alpha": lambda v: _floats("alpha", v),
        "eps1": lambda v: _floats("eps1", v),
        "distributions": lambda v: _names("distributions", v, DISTRIBUTIONS),
        "thetas": lambda v: _floats("thetas", v),
        "counts": lambda v: tuple(_int("counts", p) for p in v.split(",")),
        "sweep_param": lambda v: v.strip().lower(),
        "sweep_values": lambda v: _floats("sweep_values", v),
        "repetitions": lambda v: _int("repetitions", v),
        "reserved_bandwidth": lambda v: _number("reserved_bandwidth", v),
        "registration_fee": lambda v: _number("registration_fee", v),
        "unregistered": lambda v: _int("unregistered", v),
        "information": lambda v: _names("information", v, INFORMATION)[0],
        "output": lambda v: v,
    }
    for key in list(raw):
        if key in simple:
            target = "gammas" if key == "gamma" else key
            kwargs[target] = simple[key](raw.pop(key))
    if raw:
        raise ConfigError(f"{sorted(raw)[0]}: unknown key")

    try:
        kwargs["market"] = MarketConfig(**market_kwargs)
    except (DomainError, ValueError) as exc:
        raise ConfigError(f"market: {exc}") from None
    if "counts" in kwargs and "distributions" not in kwargs:
        kwargs["distributions"] = ("custom",)
    if experiment != "pricing" and "sweep_param" not in kwargs:
        kwargs["sweep_param"] = SWEEPABLE[experiment][0]
    spec = ExperimentSpec(**kwargs)
    validate_spec(spec)
    return spec


def load_config(path: str | Path) -> ExperimentSpec:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return parse_config(text)


def validate_spec(spec: ExperimentSpec) -> None:
    """Check every cross-field rule; errors name the offending key."""
    if spec.sweep_param not in SWEEPABLE[spec.experiment]:
        raise ConfigError(
            f"sweep_param: {spec.sweep_param!r} not valid for {spec.experiment}; "
            f"expected one of {', '.join(SWEEPABLE[spec.experiment])}"
        )
    if not spec.sweep_values:
        raise ConfigError("sweep_values: empty")
    if spec.repetitions < 1:
        raise ConfigError("repetitions: must be >= 1")
    for g in spec.gammas:
        if not 0.0 <= g <= 1.0:
            raise ConfigError(f"gamma: {g} outside [0, 1]")
    for key in ("eps0", "alpha", "eps1"):
        values = getattr(spec, key)
        if not values:
            raise ConfigError(f"{key}: empty")
    try:
        spec.cost_models()
    except (DomainError, ValueError) as exc:
        raise ConfigError(f"cost: {exc}") from None

    sweep = spec.sweep_param
    values = spec.sweep_values
    if sweep in ("eps0", "eps1") and min(values) < 0:
        raise ConfigError(f"sweep_values: {sweep} must be >= 0")
    if sweep == "alpha" and min(values) <= 0:
        raise ConfigError("sweep_values: alpha must be > 0")
    if sweep in ("n_types", "n_sus", "unregistered"):
        if any(v != int(v) or v < 1 for v in values):
            raise ConfigError(f"sweep_values: {sweep} needs positive integers")

    if spec.experiment in ("contract_items", "convergence"):
        try:
            spec.market.check_point(_point(spec))
        except DomainError as exc:
            raise ConfigError(f"reserved_bandwidth/registration_fee: {exc}") from None
    if spec.experiment == "contract_items" and spec.unregistered < 1:
        raise ConfigError("unregistered: must be >= 1")
    if spec.experiment == "suboptimal" and spec.reserved_bandwidth not in spec.market.reserve_grid():
        raise ConfigError("reserved_bandwidth: not on the channel grid")

    if "custom" in spec.distributions and not spec.counts:
        raise ConfigError("counts: required by the custom distribution")
    if spec.thetas and spec.counts and len(spec.thetas) != len(spec.counts):
        raise ConfigError("thetas: length differs from counts")

    # build every fixed population once so bad ones fail before any work
    if spec.experiment in ("pricing", "contract_items"):
        for name in spec.distributions:
            if name != "random":
                try:
                    fixed_profile(spec, name, spec.market.n_sus)
                except (DomainError, ValueError) as exc:
                    raise ConfigError(f"distributions: {name}: {exc}") from None
    if spec.experiment == "convergence":
        for n in values:
            for name in spec.distributions:
                if name != "random":
                    try:
                        fixed_profile(spec, name, int(n))
                    except (DomainError, ValueError) as exc:
                        raise ConfigError(f"distributions: {name} at n_sus={int(n)}: {exc}") from None
    if spec.experiment == "suboptimal" and spec.distributions != ("random",):
        raise ConfigError("distributions: the suboptimal experiment draws random populations only")


def _point(spec: ExperimentSpec) -> PricePoint:
    return PricePoint(spec.reserved_bandwidth, spec.registration_fee)


def fixed_profile(spec: ExperimentSpec, name: str, n_sus: int) -> TypeProfile:
    """Population for a non-random distribution name with ``n_sus`` SUs."""
    if name == "custom":
        counts = spec.counts
    elif name == "uniform":
        n_types = len(spec.thetas) if spec.thetas else 10
        if n_sus % n_types:
            raise ConfigError(f"uniform: {n_sus} SUs do not split evenly over {n_types} types")
        counts = (n_sus // n_types,) * n_types
    else:
        counts = NAMED_DISTRIBUTIONS[name]
    if sum(counts) != n_sus:
        raise ConfigError(f"{name}: counts sum to {sum(counts)}, market has {n_sus} SUs")
    return TypeProfile(spec.default_thetas(len(counts)), counts)


def random_profile(
    thetas: tuple[float, ...], n_sus: int, seed_key: tuple[int, ...]
) -> TypeProfile:
    """Multinomial head counts over ``thetas`` with equal type probabilities."""
    rng = np.random.default_rng(np.random.SeedSequence(list(seed_key)))
    counts = rng.multinomial(n_sus, [1.0 / len(thetas)] * len(thetas))
    return TypeProfile(thetas, tuple(int(c) for c in counts))


def with_seed(spec: ExperimentSpec, seed: int) -> ExperimentSpec:
    if seed < 0:
        raise ConfigError("seed: must be non-negative")
    return replace(spec, seed=seed)
