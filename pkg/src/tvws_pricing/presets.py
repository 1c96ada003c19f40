"""Built-in experiment configs, written in the same grammar as user configs."""

from __future__ import annotations

from .config import ExperimentSpec, parse_config

DEFAULT_SEED = 2015

PRESETS = {
    "strategy_reservation": """
        # optimal reservation, non-strategic vs. strategic SUs
        experiment    = pricing
        scenarios     = non_strategic_complete, strategic_complete
        gamma         = 0.2, 0.5
        distributions = distr1
        eps1          = 0.05, 0.1
        sweep_param   = eps0
        sweep_values  = 0:7:0.2
    """,
    "hybrid_vs_single": """
        # hybrid pricing against the two single-scheme baselines
        experiment    = pricing
        scenarios     = strategic_complete, strategic_incomplete
        schemes       = hybrid, service_only, registration_only
        distributions = distr1, distr2, distr3, random
        repetitions   = 100
        eps0          = 3.0
    """,
    "reservation_vs_cost": """
        # optimal reservation as the maintenance cost grows
        experiment    = pricing
        scenarios     = strategic_complete, strategic_incomplete
        distributions = distr1, distr2, distr3
        sweep_param   = eps0
        sweep_values  = 0:5.2:0.2
    """,
    "strategy_utility": """
        # operator and mean SU utility, non-strategic vs. strategic
        experiment    = pricing
        scenarios     = non_strategic_complete, strategic_complete
        gamma         = 0.2, 0.5
        distributions = distr1
        eps1          = 0.05
        sweep_param   = eps0
        sweep_values  = 0:7:0.2
    """,
    "information_gap": """
        # complete vs. incomplete information
        experiment    = pricing
        scenarios     = strategic_complete, strategic_incomplete
        distributions = distr1
        sweep_param   = eps0
        sweep_values  = 0:7:0.2
    """,
    "contract_items": """
        # screening menus for fixed prices and 50 unregistered SUs
        experiment         = contract_items
        distributions      = distr1, distr2, distr3, distr4, distr5
        reserved_bandwidth = 30
        registration_fee   = 200
        unregistered       = 50
        eps0               = 3.0
        information        = incomplete
    """,
    "suboptimal_menus": """
        # threshold menu vs. the ironed optimum, random populations
        experiment         = suboptimal
        distributions      = random
        reserved_bandwidth = 0
        sweep_param        = n_types
        sweep_values       = 5:30:1
        repetitions        = 100
    """,
    "convergence": """
        # improvement-path length under incomplete information
        experiment         = convergence
        distributions      = uniform
        reserved_bandwidth = 30
        registration_fee   = 200
        information        = incomplete
        sweep_param        = n_sus
        sweep_values       = 100:1000:100
        repetitions        = 200
    """,
}


def preset_text(name: str, seed: int = DEFAULT_SEED) -> str:
    if name not in PRESETS:
        raise KeyError(name)
    return f"name = {name}\nseed = {seed}\n" + PRESETS[name]


def load_preset(name: str, seed: int = DEFAULT_SEED) -> ExperimentSpec:
    return parse_config(preset_text(name, seed))
