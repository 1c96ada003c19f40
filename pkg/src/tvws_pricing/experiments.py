"""Experiment runners and their CSV output.

Every runner returns ``(columns, rows, summary_columns, summary_rows)``;
``write_outputs`` turns that into ``<out>/<name>/rows.csv``, ``summary.csv``
and ``run_manifest.json``.  Rows are produced in a fixed loop order and floats
are written with ``repr``, so identical specs give byte-identical files.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import replace
from pathlib import Path
from statistics import fmean
from typing import Iterator

import numpy as np

from . import __version__
from .config import ExperimentSpec, fixed_profile, random_profile
from .contract import complete_info_menu, incomplete_info_menu, ironing_optimal_menu
from .game import GameContext, Information, best_response_dynamics
from .model import CostModel, PlanMenu, PricePoint, TypeProfile, valuation
from .optimizer import Scenario, grid_search

PRICING_COLUMNS = (
    "sweep_value", "repetition", "distribution", "scenario", "scheme", "gamma",
    "eps0", "alpha", "eps1", "reserved_bandwidth", "registration_fee",
    "do_utility", "mean_su_utility", "mu0", "mu1", "menu", "uptake",
)
PRICING_SUMMARY = (
    "sweep_value", "distribution", "scenario", "scheme", "gamma", "eps0", "alpha",
    "eps1", "runs", "mean_reserved_bandwidth", "mean_registration_fee",
    "mean_do_utility", "mean_su_utility", "mean_mu0", "mean_mu1",
)
CONTRACT_COLUMNS = (
    "sweep_value", "distribution", "information", "eps0", "alpha", "eps1",
    "reserved_bandwidth", "registration_fee", "mu1", "type_index", "theta",
    "count", "q", "p", "su_utility",
)
CONTRACT_SUMMARY = (
    "sweep_value", "distribution", "information", "eps1", "served_types",
    "lowest_served_theta", "plan_revenue",
)
SUBOPTIMAL_COLUMNS = (
    "sweep_value", "repetition", "counts", "algorithm_revenue", "ironing_revenue", "ratio",
)
SUBOPTIMAL_SUMMARY = (
    "sweep_value", "runs", "mean_algorithm_revenue", "mean_ironing_revenue",
    "mean_ratio", "min_ratio",
)
CONVERGENCE_COLUMNS = (
    "sweep_value", "repetition", "information", "steps", "bound", "mu0", "mu1", "do_utility",
)
CONVERGENCE_SUMMARY = ("sweep_value", "runs", "mean_steps", "max_steps", "bound")


def encode_menu(menu: PlanMenu) -> str:
    return "|".join(f"{q}:{p!r}" for q, p in menu.plans)


def decode_menu(text: str) -> PlanMenu:
    plans = []
    for item in text.split("|") if text else ():
        q, p = item.split(":")
        plans.append((int(q), float(p)))
    return PlanMenu.from_plans(plans)


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _cost_grid(spec: ExperimentSpec) -> Iterator[tuple[float, CostModel]]:
    """``(sweep value, cost)`` in order: fixed cost combos outer, sweep inner."""
    swept = spec.sweep_param if spec.sweep_param in ("eps0", "alpha", "eps1") else None
    lists = {
        "eps0": (None,) if swept == "eps0" else spec.eps0,
        "alpha": (None,) if swept == "alpha" else spec.alpha,
        "eps1": (None,) if swept == "eps1" else spec.eps1,
    }
    sweep = spec.sweep_values if swept else (None,)
    for e0 in lists["eps0"]:
        for a in lists["alpha"]:
            for e1 in lists["eps1"]:
                for v in sweep:
                    vals = {"eps0": e0, "alpha": a, "eps1": e1}
                    if swept:
                        vals[swept] = v
                    yield (v if swept else 0.0), CostModel(vals["eps0"], vals["alpha"], vals["eps1"])


def _populations(spec: ExperimentSpec, n_sus: int) -> Iterator[tuple[str, int, TypeProfile]]:
    for name in spec.distributions:
        if name == "random":
            thetas = spec.default_thetas(10)
            for rep in range(spec.repetitions):
                yield name, rep, random_profile(thetas, n_sus, (spec.seed, rep))
        else:
            yield name, 0, fixed_profile(spec, name, n_sus)


def run_pricing(spec: ExperimentSpec):
    cfg = spec.market
    reserves = {"hybrid": None, "service_only": [0.0], "registration_only": [cfg.total_bandwidth]}
    populations = list(_populations(spec, cfg.n_sus))
    rows = []
    for sweep_value, cost in _cost_grid(spec):
        for dist, rep, types in populations:
            for scenario in spec.scenario_enums():
                if scenario is Scenario.NON_STRATEGIC_COMPLETE:
                    variants = [
                        (g, TypeProfile.with_registration_share(types.thetas, types.counts, g))
                        for g in spec.gammas
                    ]
                else:
                    variants = [(None, types)]
                for gamma, profile in variants:
                    for scheme in spec.schemes:
                        res = grid_search(scenario, profile, cfg, cost, reserves[scheme])
                        best = res.best
                        rows.append({
                            "sweep_value": sweep_value,
                            "repetition": rep,
                            "distribution": dist,
                            "scenario": scenario.value,
                            "scheme": scheme,
                            "gamma": gamma,
                            "eps0": cost.reservation_coeff,
                            "alpha": cost.reservation_exponent,
                            "eps1": cost.query_marginal_cost,
                            "reserved_bandwidth": res.best_point.reserved_bandwidth,
                            "registration_fee": res.best_point.registration_fee,
                            "do_utility": best.do_utility,
                            "mean_su_utility": best.mean_su_utility,
                            "mu0": best.mu0,
                            "mu1": best.mu1,
                            "menu": encode_menu(best.menu),
                            "uptake": "|".join(repr(float(u)) for u in best.uptake),
                        })

    groups: dict[tuple, list[dict]] = {}
    for row in rows:
        key = tuple(row[c] for c in PRICING_SUMMARY[:8])
        groups.setdefault(key, []).append(row)
    summary = []
    for key, members in groups.items():
        out = dict(zip(PRICING_SUMMARY[:8], key))
        out["runs"] = len(members)
        for src, dst in (
            ("reserved_bandwidth", "mean_reserved_bandwidth"),
            ("registration_fee", "mean_registration_fee"),
            ("do_utility", "mean_do_utility"),
            ("mean_su_utility", "mean_su_utility"),
            ("mu0", "mean_mu0"),
            ("mu1", "mean_mu1"),
        ):
            out[dst] = fmean(float(m[src]) for m in members)
        summary.append(out)
    return PRICING_COLUMNS, rows, PRICING_SUMMARY, summary


def run_contract_items(spec: ExperimentSpec):
    cfg = spec.market
    point = PricePoint(spec.reserved_bandwidth, spec.registration_fee)
    sweep = spec.sweep_values if spec.sweep_param == "unregistered" else (float(spec.unregistered),)
    rows, summary = [], []
    for _, cost in _cost_grid(spec):
        for v in sweep:
            mu1 = int(v)
            for dist, _, types in _populations(spec, cfg.n_sus):
                if spec.information == "incomplete":
                    menu = incomplete_info_menu(types, point, mu1, cfg, cost)
                else:
                    menu = complete_info_menu(types.thetas, point, mu1, cfg, cost)
                revenue = 0.0
                for k, (theta, count, (q, p)) in enumerate(zip(types.thetas, types.counts, menu.plans)):
                    rows.append({
                        "sweep_value": float(v),
                        "distribution": dist,
                        "information": spec.information,
                        "eps0": cost.reservation_coeff,
                        "alpha": cost.reservation_exponent,
                        "eps1": cost.query_marginal_cost,
                        "reserved_bandwidth": point.reserved_bandwidth,
                        "registration_fee": point.registration_fee,
                        "mu1": mu1,
                        "type_index": k + 1,
                        "theta": theta,
                        "count": count,
                        "q": q,
                        "p": p,
                        "su_utility": theta * valuation(q, point, mu1, cfg) - p,
                    })
                    # the stage-II population is mu1 SUs drawn with the same mix
                    revenue += mu1 * types.fractions[k] * (p - cost.query_marginal_cost * q)
                served = [t for t, (q, _) in zip(types.thetas, menu.plans) if q > 0]
                summary.append({
                    "sweep_value": float(v),
                    "distribution": dist,
                    "information": spec.information,
                    "eps1": cost.query_marginal_cost,
                    "served_types": len(served),
                    "lowest_served_theta": min(served) if served else None,
                    "plan_revenue": revenue,
                })
    return CONTRACT_COLUMNS, rows, CONTRACT_SUMMARY, summary


def service_revenue(menu: PlanMenu, types: TypeProfile, mu1: int, eps1: float) -> float:
    """Plan income net of query cost when ``mu1 * beta_i`` SUs buy item ``i``."""
    return sum(
        mu1 * beta * (p - eps1 * q) for beta, (q, p) in zip(types.fractions, menu.plans)
    )


def run_suboptimal(spec: ExperimentSpec):
    cfg = spec.market
    point = PricePoint(spec.reserved_bandwidth, cfg.fee_min)
    mu1 = cfg.n_sus
    rows, summary = [], []
    for _, cost in _cost_grid(spec):
        for v in spec.sweep_values:
            n_types = int(v)
            thetas = tuple(float(k) for k in range(1, n_types + 1))
            ratios, alg_revs, iron_revs = [], [], []
            for rep in range(spec.repetitions):
                types = random_profile(thetas, cfg.n_sus, (spec.seed, n_types, rep))
                alg = service_revenue(
                    incomplete_info_menu(types, point, mu1, cfg, cost), types, mu1,
                    cost.query_marginal_cost,
                )
                iron_menu, _ = ironing_optimal_menu(types, point, mu1, cfg, cost)
                iron = service_revenue(iron_menu, types, mu1, cost.query_marginal_cost)
                ratio = alg / iron if iron > 0 else 1.0
                ratios.append(ratio)
                alg_revs.append(alg)
                iron_revs.append(iron)
                rows.append({
                    "sweep_value": float(n_types),
                    "repetition": rep,
                    "counts": "|".join(str(c) for c in types.counts),
                    "algorithm_revenue": alg,
                    "ironing_revenue": iron,
                    "ratio": ratio,
                })
            summary.append({
                "sweep_value": float(n_types),
                "runs": spec.repetitions,
                "mean_algorithm_revenue": fmean(alg_revs),
                "mean_ironing_revenue": fmean(iron_revs),
                "mean_ratio": fmean(ratios),
                "min_ratio": min(ratios),
            })
    return SUBOPTIMAL_COLUMNS, rows, SUBOPTIMAL_SUMMARY, summary


def run_convergence(spec: ExperimentSpec):
    point = PricePoint(spec.reserved_bandwidth, spec.registration_fee)
    info = Information(spec.information)
    rows, summary = [], []
    for _, cost in _cost_grid(spec):
        for v in spec.sweep_values:
            n = int(v)
            cfg = replace(spec.market, n_sus=n)
            for dist in spec.distributions:
                reps = range(spec.repetitions)
                steps = []
                for rep in reps:
                    if dist == "random":
                        types = random_profile(spec.default_thetas(10), n, (spec.seed, n, rep))
                    else:
                        types = fixed_profile(spec, dist, n)
                    ctx = GameContext(info, point, types, cfg, cost)
                    seed = int(np.random.SeedSequence([spec.seed, n, rep]).generate_state(1)[0])
                    out = best_response_dynamics(ctx, rng_seed=seed)
                    steps.append(out.converged_in_steps)
                    rows.append({
                        "sweep_value": float(n),
                        "repetition": rep,
                        "information": spec.information,
                        "steps": out.converged_in_steps,
                        "bound": n * (n + 1),
                        "mu0": out.profile.mu0,
                        "mu1": out.profile.mu1,
                        "do_utility": out.do_utility,
                    })
                summary.append({
                    "sweep_value": float(n),
                    "runs": len(steps),
                    "mean_steps": fmean(steps),
                    "max_steps": max(steps),
                    "bound": n * (n + 1),
                })
    return CONVERGENCE_COLUMNS, rows, CONVERGENCE_SUMMARY, summary


RUNNERS = {
    "pricing": run_pricing,
    "contract_items": run_contract_items,
    "suboptimal": run_suboptimal,
    "convergence": run_convergence,
}


def run_experiment(spec: ExperimentSpec):
    return RUNNERS[spec.experiment](spec)


def _write_csv(path: Path, columns, rows) -> str:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_cell(row[c]) for c in columns])
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_outputs(spec: ExperimentSpec, out_dir: Path, result) -> list[Path]:
    """Write the row and summary CSVs plus the manifest under
    ``out_dir/<name>``; returns the paths."""
    columns, rows, summary_columns, summary = result
    out_dir = Path(out_dir) / spec.name
    out_dir.mkdir(parents=True, exist_ok=True)
    main = out_dir / "rows.csv"
    side = out_dir / "summary.csv"
    digests = {
        main.name: _write_csv(main, columns, rows),
        side.name: _write_csv(side, summary_columns, summary),
    }
    manifest = {
        "name": spec.name,
        "experiment": spec.experiment,
        "seed": spec.seed,
        "config_hash": spec.config_hash(),
        "version": __version__,
        "rows": len(rows),
        "files": digests,
    }
    man = out_dir / "run_manifest.json"
    man.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return [main, side, man]
