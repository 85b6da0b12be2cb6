"""Seeded experiment presets, one per figure family.

Each preset runs a per-seed pipeline (seeds may run on a thread pool) and
returns two tables: ``runs`` with one row per (seed, grid point, method) and
``aggregate`` with means and standard errors over seeds. Both are plain lists
of dicts with fixed column orders so that CSV bodies are reproducible.
"""

from __future__ import annotations

import dataclasses
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Sequence, Tuple

import numpy as np

from .config import TABLE_LAMBDA0, TABLE_LAMBDA1, Config, build_model
from .optimizers import (
    MAX_EXHAUSTIVE_BITS,
    ce_optimize,
    exhaustive_search,
    greedy_assign,
    random_assign,
)
from .simulator import comparison_rows, simulate
from .throughput import SSR, Scheme, SchedulingProblem

__all__ = [
    "PRESETS",
    "Preset",
    "ExperimentResult",
    "GuardError",
    "run_experiment",
    "preset_config",
    "DELTA_GRID_MW",
    "TAU_GRID_MS",
    "RHO_GRID",
    "M_GRID",
    "SCHEMES",
]

DELTA_GRID_MW = tuple(range(1, 11))
TAU_GRID_MS = tuple(range(2, 16))
RHO_GRID = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)
M_GRID = tuple(range(2, 21))
SCHEMES = ("ssr", "ccs_opt", "ccs_or", "ccs_and")


class GuardError(ValueError):
    """A preset would exceed a size guard (e.g. exhaustive search)."""


def _mean_se(values) -> Tuple[float, float]:
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        return float(v.mean()), 0.0
    return float(v.mean()), float(v.std(ddof=1) / np.sqrt(v.size))


def _problem(cfg: Config, seed: int, scheme: Scheme = SSR) -> SchedulingProblem:
    return SchedulingProblem(build_model(cfg, seed), cfg.throughput_params(), scheme)


def _with_channels(cfg: Config, k: int) -> Config:
    return cfg.replace(K=k, lambda0=cfg.lambda0[:k], lambda1=cfg.lambda1[:k])


def _with_tau(cfg: Config, tau_ms: float) -> Config:
    """Sensing phase of ``tau_ms``: t_s = tau - t_r, U grows with t_s at a fixed sampling rate."""
    t_s = tau_ms * 1e-3 - cfg.t_r
    return cfg.replace(t_s=t_s, U=max(1, int(round(cfg.sampling_rate * t_s))))


def _with_m(cfg: Config, m: int) -> Config:
    delta = cfg.delta if np.isscalar(cfg.delta) else cfg.delta[0]
    return cfg.replace(M=m, delta=delta)


def _trace_curve(result, length: int) -> np.ndarray:
    """Best-so-far per iteration 0..length, held flat after the run stopped."""
    curve = np.empty(length + 1)
    curve[0] = 0.0
    values = [r.best_value for r in result.trace]
    curve[1 : len(values) + 1] = values
    curve[len(values) + 1 :] = values[-1] if values else 0.0
    return curve


# -- per-seed pipelines ----------------------------------------------------

def _seed_throughput_vs_channels(cfg: Config, seed: int, frames: int) -> List[Dict]:
    rows = []
    for k in range(1, cfg.K + 1):
        sub = _with_channels(cfg, k)
        prob = _problem(sub, seed)
        ce = ce_optimize(prob, sub.ce_params(), seed=seed)
        ex = exhaustive_search(prob)
        rnd = random_assign(prob, seed=seed)
        for method, res in (("ce", ce), ("exhaustive", ex), ("random", rnd)):
            rows.append({"seed": seed, "K": k, "method": method, "value": res.best_value,
                         "evals": res.objective_evaluations, "iterations": res.iterations})
    return rows


def _seed_ce_vs_greedy(cfg: Config, seed: int, frames: int) -> List[Dict]:
    rows = []
    for d in DELTA_GRID_MW:
        sub = cfg.replace(delta=d * 1e-3)
        prob = _problem(sub, seed)
        for method, res in (("ce", ce_optimize(prob, sub.ce_params(), seed=seed)),
                            ("greedy", greedy_assign(prob)),
                            ("random", random_assign(prob, seed=seed))):
            rows.append({"seed": seed, "delta_mW": d, "method": method, "value": res.best_value,
                         "evals": res.objective_evaluations, "iterations": res.iterations})
    return rows


def _convergence(cfg_for: Callable[[object], Config], grid, key: str, scheme_for=None):
    def run(cfg: Config, seed: int, frames: int) -> List[Dict]:
        rows = []
        for x in grid:
            sub = cfg_for(cfg, x)
            scheme = Scheme.parse(scheme_for(x)) if scheme_for else SSR
            res = ce_optimize(_problem(sub, seed, scheme), sub.ce_params(), seed=seed)
            rows.append({"seed": seed, key: x, "value": res.best_value, "iterations": res.iterations,
                         "evals": res.objective_evaluations, "_trace": res})
        return rows
    return run


def _seed_rho_sweep(cfg: Config, seed: int, frames: int) -> List[Dict]:
    rows = []
    for rho in RHO_GRID:
        sub = cfg.replace(rho=rho)
        for name in ("ssr", "ccs_opt"):
            res = ce_optimize(_problem(sub, seed, Scheme.parse(name)), sub.ce_params(), seed=seed)
            rows.append({"seed": seed, "rho": rho, "scheme": name, "value": res.best_value,
                         "iterations": res.iterations, "evals": res.objective_evaluations})
    return rows


def _seed_crossover(cfg: Config, seed: int, frames: int) -> List[Dict]:
    rows = []
    for m in M_GRID:
        sub = _with_m(cfg, m)
        for name in SCHEMES:
            res = ce_optimize(_problem(sub, seed, Scheme.parse(name)), sub.ce_params(), seed=seed)
            rows.append({"seed": seed, "M": m, "scheme": name, "value": res.best_value,
                         "iterations": res.iterations, "evals": res.objective_evaluations})
    return rows


def _seed_validate_mc(cfg: Config, seed: int, frames: int) -> List[Dict]:
    rows = []
    for name in ("ssr", "ccs_opt"):
        prob = _problem(cfg, seed, Scheme.parse(name))
        J = ce_optimize(prob, cfg.ce_params(), seed=seed).best_assignment
        report = simulate(J, prob.model, prob.params, prob.scheme, frames, seed=seed)
        for r in comparison_rows(report, prob.breakdown(J)):
            rows.append({"seed": seed, "scheme": name, **r})
    return rows


# -- aggregation -----------------------------------------------------------

def _group(rows: List[Dict], keys: Sequence[str]) -> Dict[tuple, List[Dict]]:
    out: Dict[tuple, List[Dict]] = {}
    for r in rows:
        out.setdefault(tuple(r[k] for k in keys), []).append(r)
    return out


def _agg_values(keys, extra=()):
    def agg(rows: List[Dict]) -> List[Dict]:
        out = []
        for group_key, members in _group(rows, keys).items():
            mean, se = _mean_se([m["value"] for m in members])
            row = dict(zip(keys, group_key))
            row.update(mean=mean, stderr=se)
            for name in extra:
                row[f"{name}_mean"] = float(np.mean([m[name] for m in members]))
            out.append(row)
        return out
    return agg


def _agg_throughput_vs_channels(rows):
    out = []
    for (k, method), members in _group(rows, ("K", "method")).items():
        mean, se = _mean_se([m["value"] for m in members])
        out.append({"K": k, "method": method, "mean": mean, "stderr": se,
                    "evals": float(np.mean([m["evals"] for m in members]))})
    return out


def _agg_trace(key: str):
    def agg(rows: List[Dict]) -> List[Dict]:
        out = []
        for (x,), members in _group(rows, (key,)).items():
            length = max(m["_trace"].iterations for m in members)
            curves = np.array([_trace_curve(m["_trace"], length) for m in members])
            running = np.array([[it <= m["_trace"].iterations for m in members]
                                for it in range(length + 1)]).sum(axis=1)
            for it in range(length + 1):
                mean, se = _mean_se(curves[:, it])
                out.append({key: x, "iteration": it, "mean_best": mean, "stderr": se,
                            "n_running": int(running[it])})
        return out
    return agg


def _agg_validate(rows):
    out = []
    for (scheme, stat), members in _group(rows, ("scheme", "stat")).items():
        z = np.abs([m["z"] for m in members])
        out.append({"scheme": scheme, "stat": stat, "cells": int(z.size),
                    "within_3": int((z <= 3).sum()), "fraction_within_3": float((z <= 3).mean()),
                    "max_abs_z": float(z.max())})
    return out


# -- registry --------------------------------------------------------------

@dataclass(frozen=True)
class Preset:
    name: str
    description: str
    run_seed: Callable[[Config, int, int], List[Dict]]
    aggregate: Callable[[List[Dict]], List[Dict]]
    columns: Tuple[str, ...]
    run_columns: Tuple[str, ...]
    defaults: Dict = field(default_factory=dict)
    check: Callable[[Config], None] = None


def _check_exhaustive(cfg: Config) -> None:
    if cfg.M * cfg.K > MAX_EXHAUSTIVE_BITS:
        raise GuardError(
            f"exhaustive search over M*K = {cfg.M * cfg.K} bits exceeds the guard of "
            f"{MAX_EXHAUSTIVE_BITS}; reduce M or K"
        )


_TRACE_COLS = ("iteration", "mean_best", "stderr", "n_running")
_FINAL_RUN_COLS = ("value", "iterations", "evals")

PRESETS: Dict[str, Preset] = {
    p.name: p
    for p in [
        Preset(
            "throughput_vs_channels",
            "CE vs exhaustive vs random for K = 1..K at small M",
            _seed_throughput_vs_channels,
            _agg_throughput_vs_channels,
            ("K", "method", "mean", "stderr", "evals"),
            ("seed", "K", "method", "value", "evals", "iterations"),
            # Small instances get a CE budget of at most 800 evaluations.
            {"M": 3, "K": 4, "lambda0": TABLE_LAMBDA0[:4], "lambda1": TABLE_LAMBDA1[:4],
             "Z": 50, "i_max": 16},
            _check_exhaustive,
        ),
        Preset(
            "ce_vs_greedy_eh",
            "CE vs greedy vs random over harvesting rates 1..10 mW",
            _seed_ce_vs_greedy,
            _agg_values(("delta_mW", "method"), ("evals",)),
            ("delta_mW", "method", "mean", "stderr", "evals_mean"),
            ("seed", "delta_mW", "method", "value", "evals", "iterations"),
        ),
        Preset(
            "convergence_eh",
            "CE best-so-far per iteration for harvesting rates 1..10 mW",
            _convergence(lambda c, d: c.replace(delta=d * 1e-3), DELTA_GRID_MW, "delta_mW"),
            _agg_trace("delta_mW"),
            ("delta_mW",) + _TRACE_COLS,
            ("seed", "delta_mW") + _FINAL_RUN_COLS,
        ),
        Preset(
            "convergence_tau",
            "CE best-so-far per iteration for sensing phases 2..15 ms",
            _convergence(_with_tau, TAU_GRID_MS, "tau_s_ms"),
            _agg_trace("tau_s_ms"),
            ("tau_s_ms",) + _TRACE_COLS,
            ("seed", "tau_s_ms") + _FINAL_RUN_COLS,
            {"delta": 0.007},
        ),
        Preset(
            "rho_sweep",
            "elite fraction vs throughput and iterations, SSR and optimal-L CCS",
            _seed_rho_sweep,
            _agg_values(("rho", "scheme"), ("iterations", "evals")),
            ("rho", "scheme", "mean", "stderr", "iterations_mean", "evals_mean"),
            ("seed", "rho", "scheme") + _FINAL_RUN_COLS,
        ),
        Preset(
            "scheme_comparison",
            "CE convergence under SSR and CCS with optimal, OR and AND voting",
            _convergence(lambda c, s: c, SCHEMES, "scheme", scheme_for=lambda s: s),
            _agg_trace("scheme"),
            ("scheme",) + _TRACE_COLS,
            ("seed", "scheme") + _FINAL_RUN_COLS,
        ),
        Preset(
            "crossover_vs_M",
            "optimised throughput of each scheme for M = 2..20 sensors",
            _seed_crossover,
            _agg_values(("M", "scheme")),
            ("M", "scheme", "mean", "stderr"),
            ("seed", "M", "scheme") + _FINAL_RUN_COLS,
        ),
        Preset(
            "validate_mc",
            "Monte Carlo frames vs analytic g_f, g_d and throughput of CE schedules",
            _seed_validate_mc,
            _agg_validate,
            ("scheme", "stat", "cells", "within_3", "fraction_within_3", "max_abs_z"),
            ("seed", "scheme", "channel", "stat", "empirical", "stderr", "analytic", "z"),
        ),
    ]
}


@dataclass
class ExperimentResult:
    preset: str
    config: Config
    seeds: List[int]
    frames: int
    runs: List[Dict]
    aggregate: List[Dict]
    columns: Tuple[str, ...]
    run_columns: Tuple[str, ...]

    def column(self, name: str, **where) -> np.ndarray:
        """Aggregate column filtered by equality on other columns."""
        rows = [r for r in self.aggregate if all(r[k] == v for k, v in where.items())]
        return np.array([r[name] for r in rows])

    def run_values(self, name: str, **where) -> np.ndarray:
        rows = [r for r in self.runs if all(r[k] == v for k, v in where.items())]
        return np.array([r[name] for r in rows])


def preset_config(name: str, base: Config = None) -> Config:
    """Defaults with the preset's own overrides applied."""
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    preset = PRESETS[name]
    return (base or Config()).replace(**preset.defaults) if preset.defaults else (base or Config())


def run_experiment(name: str, cfg: Config = None, seeds: Sequence[int] = (1,),
                   frames: int = 100_000, workers: int = 1) -> ExperimentResult:
    """Run preset ``name`` for every seed and aggregate in seed order."""
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    preset = PRESETS[name]
    cfg = preset_config(name) if cfg is None else cfg
    seeds = [int(s) for s in seeds]
    if not seeds:
        raise ValueError("at least one seed is required")
    if frames < 1:
        raise ValueError("frames must be positive")
    if preset.check is not None:
        preset.check(cfg)

    def job(seed):
        return preset.run_seed(cfg, seed, frames)

    if workers > 1 and len(seeds) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            per_seed = list(pool.map(job, seeds))
    else:
        per_seed = [job(s) for s in seeds]
    runs = [r for rows in per_seed for r in rows]
    aggregate = preset.aggregate(runs)
    clean = [{k: v for k, v in r.items() if not k.startswith("_")} for r in runs]
    return ExperimentResult(name, cfg, seeds, frames, clean, aggregate, preset.columns,
                            preset.run_columns)
