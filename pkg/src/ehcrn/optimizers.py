"""Schedulers over the space of binary sensor-to-channel assignments.

* :func:`ce_optimize` - cross-entropy search. The sampling distribution is
  either one Bernoulli per (sensor, channel) entry (default) or, per sensor
  row, a categorical distribution over the 2**K channel subsets; it is
  refitted to the elite fraction of every batch.
* :func:`exhaustive_search` - enumeration of all 2**(M*K) matrices.
* :func:`greedy_assign` - best single flip at a time.
* :func:`random_assign` - fair-coin assignment repaired to feasibility.

All optimizers take a :class:`~ehcrn.throughput.SchedulingProblem` (or any
object with ``shape``, ``caps``, ``objective`` and ``throughput``) and
return an :class:`OptimizerResult`.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

__all__ = [
    "CeParams",
    "TraceRow",
    "OptimizerResult",
    "ce_optimize",
    "exhaustive_search",
    "greedy_assign",
    "random_assign",
    "subsets_to_rows",
    "elite_count",
    "MAX_SUBSET_BITS",
    "MAX_EXHAUSTIVE_BITS",
]

MAX_SUBSET_BITS = 20
MAX_EXHAUSTIVE_BITS = 24
_EXHAUSTIVE_CHUNK = 1 << 14


@dataclass(frozen=True)
class CeParams:
    """Cross-entropy settings.

    ``smoothing`` blends the new elite PMF with the previous one
    (1.0 reproduces the plain counting update). ``stop_threshold`` is
    compared against the max-norm change of the PMF between iterations.
    ``return_mode="final"`` returns the best sample of the last batch
    instead of the best sample ever evaluated.
    """

    sample_size: int = 300
    elite_fraction: float = 0.6
    max_iterations: int = 500
    stop_threshold: float = 1e-3
    smoothing: float = 0.3
    representation: str = "bernoulli"
    return_mode: str = "best"

    def __post_init__(self):
        if self.sample_size < 2:
            raise ValueError("sample_size (Z) must be at least 2")
        if not 0.0 < self.elite_fraction <= 1.0:
            raise ValueError("elite_fraction (rho) must lie in (0, 1]")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")
        if self.stop_threshold <= 0:
            raise ValueError("stop_threshold must be positive")
        if not 0.0 < self.smoothing <= 1.0:
            raise ValueError("smoothing (beta) must lie in (0, 1]")
        if self.representation not in ("categorical", "bernoulli"):
            raise ValueError("representation must be 'categorical' or 'bernoulli'")
        if self.return_mode not in ("best", "final"):
            raise ValueError("return_mode must be 'best' or 'final'")


@dataclass(frozen=True)
class TraceRow:
    iteration: int
    best_value: float
    eta: float
    pmf_max_change: float
    evaluations: int


@dataclass
class OptimizerResult:
    best_assignment: np.ndarray
    best_value: float
    iterations: int
    objective_evaluations: int
    trace: List[TraceRow] = field(default_factory=list)
    pmf: Optional[np.ndarray] = None

    def trace_csv(self, fh=None) -> str:
        out = io.StringIO() if fh is None else fh
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["iteration", "best_value", "eta", "pmf_max_change", "evaluations_cumulative"])
        for r in self.trace:
            w.writerow([r.iteration, repr(r.best_value), repr(r.eta), repr(r.pmf_max_change), r.evaluations])
        return out.getvalue() if fh is None else ""


def elite_count(rho: float, sample_size: int) -> int:
    """ceil(rho * Z), robust to rho * Z landing one ulp above an integer."""
    return max(1, math.ceil(rho * sample_size - 1e-9))


def subsets_to_rows(idx: np.ndarray, k_count: int) -> np.ndarray:
    """Decode subset indices (bit k = channel k) into 0/1 rows of length K."""
    idx = np.asarray(idx)
    return ((idx[..., None] >> np.arange(k_count)) & 1).astype(np.int8)


def _iteration_rng(seed, iteration: int) -> np.random.Generator:
    return np.random.default_rng([*np.atleast_1d(seed).tolist(), 1, iteration])


def _sample_categorical(rng, pmf: np.ndarray, z: int) -> np.ndarray:
    """Draw ``z`` subset indices per row of ``pmf``; returns shape (z, M)."""
    u = rng.random((z, pmf.shape[0]))
    cdf = np.cumsum(pmf, axis=1)
    out = np.empty((z, pmf.shape[0]), dtype=np.int64)
    last = pmf.shape[1] - 1
    for m in range(pmf.shape[0]):
        # Scale by the row total so rounding in cumsum never leaves u past the end.
        out[:, m] = np.searchsorted(cdf[m], u[:, m] * cdf[m, -1], side="right")
    return np.minimum(out, last)


def ce_optimize(problem, params: CeParams = CeParams(), seed=0, callback=None) -> OptimizerResult:
    """Cross-entropy maximisation of the penalised objective.

    Iteration ``i`` draws its Z samples from a generator keyed on
    ``(seed, i)``, so results do not depend on how evaluation is scheduled.
    The running best starts at the empty assignment, whose throughput is
    zero by construction and which is always feasible.

    ``callback(iteration, samples, scores, elite, eta, pmf)`` is called after
    every PMF update, with ``elite`` the indices of the retained samples.
    """
    M, K = problem.shape
    categorical = params.representation == "categorical"
    if categorical and K > MAX_SUBSET_BITS:
        raise ValueError(
            f"K={K} exceeds the 2**{MAX_SUBSET_BITS} subset alphabet guard; "
            "use representation='bernoulli'"
        )
    Z = params.sample_size
    n_elite = elite_count(params.elite_fraction, Z)
    beta = params.smoothing

    if categorical:
        pmf = np.full((M, 1 << K), 1.0 / (1 << K))
    else:
        pmf = np.full((M, K), 0.5)

    best_J = np.zeros((M, K), dtype=np.int8)
    best_value = 0.0
    final_J, final_value = best_J, best_value
    evaluations = 0
    trace: List[TraceRow] = []
    iteration = 0

    for iteration in range(1, params.max_iterations + 1):
        rng = _iteration_rng(seed, iteration)
        if categorical:
            choices = _sample_categorical(rng, pmf, Z)
            samples = subsets_to_rows(choices, K)
        else:
            samples = (rng.random((Z, M, K)) < pmf).astype(np.int8)
        scores = np.asarray(problem.objective(samples), dtype=float)
        evaluations += Z

        order = np.argsort(-scores, kind="stable")
        elite = order[:n_elite]
        eta = float(scores[elite[-1]])

        top = elite[0]
        final_J, final_value = samples[top], float(scores[top])
        if final_value > best_value:
            best_J, best_value = final_J.copy(), final_value

        if categorical:
            counts = np.zeros_like(pmf)
            np.add.at(counts, (np.repeat(np.arange(M)[None, :], n_elite, 0), choices[elite]), 1.0)
            new = counts / n_elite
        else:
            new = samples[elite].mean(axis=0)
        updated = beta * new + (1.0 - beta) * pmf
        change = float(np.max(np.abs(updated - pmf)))
        pmf = updated
        if callback is not None:
            callback(iteration, samples, scores, elite, eta, pmf)
        trace.append(TraceRow(iteration, best_value, eta, change, evaluations))
        if change < params.stop_threshold:
            break

    if params.return_mode == "final":
        best_J, best_value = final_J, final_value
    return OptimizerResult(np.asarray(best_J, dtype=np.int8), best_value, iteration,
                           evaluations, trace, pmf)


def _decode_exhaustive(codes: np.ndarray, M: int, K: int) -> np.ndarray:
    # Entry (m, k) is bit M*K-1-(m*K+k): integer order equals lexicographic
    # order of the row-major flattened matrix.
    shifts = np.arange(M * K - 1, -1, -1, dtype=np.int64)
    bits = (codes[:, None] >> shifts) & 1
    return bits.reshape(-1, M, K).astype(np.int8)


def exhaustive_search(problem) -> OptimizerResult:
    """Feasible maximiser of the raw throughput over all 2**(M*K) matrices.

    Ties go to the lexicographically smallest matrix (row-major order).
    """
    M, K = problem.shape
    bits = M * K
    if bits > MAX_EXHAUSTIVE_BITS:
        raise ValueError(f"M*K = {bits} exceeds the exhaustive-search guard of {MAX_EXHAUSTIVE_BITS}")
    total = 1 << bits
    best_code, best_value = None, -np.inf
    for start in range(0, total, _EXHAUSTIVE_CHUNK):
        codes = np.arange(start, min(start + _EXHAUSTIVE_CHUNK, total), dtype=np.int64)
        Js = _decode_exhaustive(codes, M, K)
        values = np.asarray(problem.throughput(Js), dtype=float)
        values = np.where(problem.feasible(Js), values, -np.inf)
        i = int(np.argmax(values))
        if values[i] > best_value:
            best_code, best_value = codes[i], float(values[i])
    best_J = _decode_exhaustive(np.array([best_code]), M, K)[0]
    return OptimizerResult(best_J, best_value, 1, total)


def greedy_assign(problem) -> OptimizerResult:
    """Repeatedly apply the single 0 -> 1 flip with the largest positive gain.

    Only flips that keep the flipping sensor within its energy budget are
    considered; ties go to the smallest (m, k).
    """
    M, K = problem.shape
    caps = np.asarray(problem.caps)
    J = np.zeros((M, K), dtype=np.int8)
    current = float(problem.objective(J))
    evaluations = 1
    trace: List[TraceRow] = []
    step = 0
    while True:
        room = J.sum(axis=1) < caps
        cand = np.argwhere((J == 0) & room[:, None])
        if len(cand) == 0:
            break
        Js = np.repeat(J[None], len(cand), axis=0)
        Js[np.arange(len(cand)), cand[:, 0], cand[:, 1]] = 1
        values = np.asarray(problem.objective(Js), dtype=float)
        evaluations += len(cand)
        i = int(np.argmax(values))
        if not values[i] - current > 0:
            break
        J = Js[i]
        current = float(values[i])
        step += 1
        trace.append(TraceRow(step, current, current, 0.0, evaluations))
    return OptimizerResult(J, current, step, evaluations, trace)


def random_assign(problem, seed=0) -> OptimizerResult:
    """Each entry is 1 with probability 1/2; over-budget rows lose uniformly
    chosen assignments until they fit."""
    M, K = problem.shape
    rng = np.random.default_rng([*np.atleast_1d(seed).tolist(), 2])
    J = (rng.random((M, K)) < 0.5).astype(np.int8)
    caps = np.asarray(problem.caps)
    for m in range(M):
        ones = np.flatnonzero(J[m])
        excess = len(ones) - max(int(caps[m]), 0)
        if excess > 0:
            J[m, rng.choice(ones, size=excess, replace=False)] = 0
    value = float(problem.objective(J))
    return OptimizerResult(J, value, 1, 1)
