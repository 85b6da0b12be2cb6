"""Monte Carlo frame simulator used to validate the analytic throughput model.

Each frame draws every channel's PU state from its stationary distribution,
every scheduled sensor's local decision, and (for SSR) one fading draw per
sensor on its link to the fusion center. The sink decision is the OR of the
detection set under SSR, where the reporter is the detecting sensor whose
timer expires first, and an L-out-of-n vote under CCS.

Frames are generated in fixed blocks of :data:`BLOCK_FRAMES`, each from its
own generator keyed on ``(seed, block)``. Per-channel outcomes are kept as
integer scenario counts, so the report is identical for any number of
workers.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from .network import NetworkModel
from .throughput import SSR, Scheme, ThroughputBreakdown, ThroughputParams, channel_terms

__all__ = [
    "TimerModel",
    "FrameSample",
    "SimReport",
    "simulate",
    "sample_frames",
    "select_superior",
    "empirical_vs_analytic",
    "comparison_rows",
    "BLOCK_FRAMES",
]

BLOCK_FRAMES = 4096
STATS = ("g_f", "g_d", "throughput")


@dataclass(frozen=True)
class TimerModel:
    """Reporting timers T = mu / (gain * |h|^2) with unit-mean Rayleigh power."""

    mu: float = 1.0

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError("mu must be positive")

    def draw_fading(self, rng: np.random.Generator, shape) -> np.ndarray:
        return rng.exponential(1.0, size=shape)

    def timers(self, gain, fading) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return self.mu / (np.asarray(gain) * np.asarray(fading))


@dataclass(frozen=True)
class FrameSample:
    pu_state: np.ndarray  # (K,) True = PU active
    local_decisions: np.ndarray  # (M, K) alarms of scheduled sensors
    reporter: List[Optional[int]]  # SSR reporter per channel, None if nobody detected
    sink_decision: np.ndarray  # (K,) True = declared busy


def select_superior(detection_set: Sequence[int], gamma, fading, mu: float = 1.0) -> int:
    """Sensor of ``detection_set`` with the largest gamma * fading.

    This is the sensor whose timer mu / (gamma * fading) expires first; ties
    go to the lowest index.

    >>> select_superior([0, 1, 2], [1.0, 1.0, 1.0], [1.0, 2.5, 0.3])
    1
    """
    members = sorted(int(m) for m in detection_set)
    if not members:
        raise ValueError("detection set is empty")
    if not mu > 0:
        raise ValueError("mu must be positive")
    score = np.asarray(gamma, dtype=float)[members] * np.asarray(fading, dtype=float)[members]
    return members[int(np.argmax(score))]


def _scenario_values(terms: dict, model: NetworkModel, params: ThroughputParams) -> np.ndarray:
    """Per-channel throughput of the four (PU state, decision) outcomes.

    Columns: (idle, declared idle), (idle, declared busy), (busy, declared
    idle), (busy, declared busy).
    """
    active = terms["indicator"].astype(bool) & ~terms["exhausted"]
    scale = np.where(active, model.capacity * terms["avail"], 0.0)
    return np.stack([scale, -params.penalty_factor * scale, params.partial_factor * scale,
                     np.zeros_like(scale)], axis=-1)


def _draw_block(rng, J, model: NetworkModel, scheme: Scheme, L, timer: TimerModel, n: int):
    M, K = model.shape
    pu_on = rng.random((n, K)) < model.prob_h1
    u = rng.random((n, M, K))
    p_alarm = np.where(pu_on[:, None, :], model.local.p_d, model.local.p_f)
    alarms = (u < p_alarm) & J
    counts = alarms.sum(axis=1)
    reporter = None
    if scheme.kind == "ssr":
        sink = counts > 0
        fading = timer.draw_fading(rng, (n, M))
        score = np.where(alarms, (model.fc_gain * fading)[:, :, None], -np.inf)
        # argmax returns the first maximum, i.e. the lowest sensor index.
        reporter = np.where(sink, np.argmax(score, axis=1), -1)
    else:
        sink = (counts >= L) & (L > 0)
    return pu_on, alarms, sink, reporter


def _block_stats(seed, block: int, n: int, J, model, scheme, L, values, timer) -> dict:
    rng = np.random.default_rng([*np.atleast_1d(seed).tolist(), 3, block])
    pu_on, _, sink, reporter = _draw_block(rng, J, model, scheme, L, timer, n)
    outcome = 2 * pu_on.astype(int) + sink.astype(int)
    M, K = model.shape
    scen = np.zeros((K, 4), dtype=np.int64)
    for s in range(4):
        scen[:, s] = (outcome == s).sum(axis=0)
    frame_total = np.take_along_axis(values[None, :, :], outcome[:, :, None], axis=2)[..., 0].sum(axis=1)
    wins = np.zeros((M, K), dtype=np.int64)
    if reporter is not None:
        ks = np.broadcast_to(np.arange(K), reporter.shape)
        ok = reporter >= 0
        np.add.at(wins, (reporter[ok], ks[ok]), 1)
    return {"scen": scen, "sum": float(frame_total.sum()), "sumsq": float((frame_total ** 2).sum()),
            "wins": wins}


@dataclass
class SimReport:
    frames: int
    scenario_counts: np.ndarray  # (K, 4) frames per (PU state, decision) outcome
    scenario_values: np.ndarray  # (K, 4) bits/Hz earned in each outcome
    network_sum: float
    network_sumsq: float
    reporter_counts: np.ndarray  # (M, K) SSR reporting wins
    scheme: Scheme = field(default=SSR)

    @property
    def _idle(self):
        return self.scenario_counts[:, 0] + self.scenario_counts[:, 1]

    @property
    def _busy(self):
        return self.scenario_counts[:, 2] + self.scenario_counts[:, 3]

    @property
    def empirical_g_f(self) -> np.ndarray:
        return self.scenario_counts[:, 1] / np.maximum(self._idle, 1)

    @property
    def empirical_g_d(self) -> np.ndarray:
        return self.scenario_counts[:, 3] / np.maximum(self._busy, 1)

    @property
    def stderr_g_f(self) -> np.ndarray:
        p = self.empirical_g_f
        return np.sqrt(p * (1 - p) / np.maximum(self._idle, 1))

    @property
    def stderr_g_d(self) -> np.ndarray:
        p = self.empirical_g_d
        return np.sqrt(p * (1 - p) / np.maximum(self._busy, 1))

    @property
    def empirical_throughput(self) -> np.ndarray:
        """Per-channel mean bits/Hz per frame."""
        return (self.scenario_counts * self.scenario_values).sum(axis=1) / self.frames

    @property
    def stderr_throughput(self) -> np.ndarray:
        mean = self.empirical_throughput
        second = (self.scenario_counts * self.scenario_values ** 2).sum(axis=1) / self.frames
        var = np.maximum(second - mean ** 2, 0.0) * self.frames / max(self.frames - 1, 1)
        return np.sqrt(var / self.frames)

    @property
    def network_throughput(self) -> float:
        return self.network_sum / self.frames

    @property
    def network_stderr(self) -> float:
        n = self.frames
        var = max(self.network_sumsq / n - self.network_throughput ** 2, 0.0) * n / max(n - 1, 1)
        return math.sqrt(var / n)

    @property
    def reporter_histogram(self) -> np.ndarray:
        return self.reporter_counts.sum(axis=1)

    def to_csv(self, analytic: Optional[ThroughputBreakdown] = None, fh=None) -> str:
        """Rows (channel, stat, empirical, stderr, analytic, z); the last two
        are left empty without an analytic breakdown."""
        out = io.StringIO() if fh is None else fh
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["channel", "stat", "empirical", "stderr", "analytic", "z"])
        if analytic is None:
            for k in range(self.scenario_counts.shape[0]):
                for stat in STATS:
                    emp, se = self._stat(stat)
                    w.writerow([k, stat, repr(float(emp[k])), repr(float(se[k])), "", ""])
        else:
            for row in comparison_rows(self, analytic):
                w.writerow([row["channel"], row["stat"], repr(row["empirical"]), repr(row["stderr"]),
                            repr(row["analytic"]), repr(row["z"])])
        return out.getvalue() if fh is None else ""

    def _stat(self, stat: str):
        if stat == "g_f":
            return self.empirical_g_f, self.stderr_g_f
        if stat == "g_d":
            return self.empirical_g_d, self.stderr_g_d
        return self.empirical_throughput, self.stderr_throughput


def simulate(J, model: NetworkModel, params: ThroughputParams = ThroughputParams(),
             scheme: Scheme = SSR, n_frames: int = 100_000, seed=0, workers: int = 1,
             timer: TimerModel = TimerModel()) -> SimReport:
    """Simulate ``n_frames`` frames of assignment ``J`` and tally the outcomes.

    The CCS vote uses the same per-channel threshold L as the analytic model.
    """
    if int(n_frames) != n_frames or n_frames < 1:
        raise ValueError("n_frames must be a positive integer")
    terms = channel_terms(J, model, params, scheme)
    Jb = np.asarray(J).astype(bool)
    L = np.asarray(terms["L"])
    values = _scenario_values(terms, model, params)
    sizes = [BLOCK_FRAMES] * (n_frames // BLOCK_FRAMES)
    if n_frames % BLOCK_FRAMES:
        sizes.append(n_frames % BLOCK_FRAMES)

    def run(b):
        return _block_stats(seed, b, sizes[b], Jb, model, scheme, L, values, timer)

    if workers > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, range(len(sizes))))
    else:
        parts = [run(b) for b in range(len(sizes))]

    # Reduce in block order so float sums do not depend on scheduling.
    M, K = model.shape
    scen = np.zeros((K, 4), dtype=np.int64)
    wins = np.zeros((M, K), dtype=np.int64)
    total = sumsq = 0.0
    for p in parts:
        scen += p["scen"]
        wins += p["wins"]
        total += p["sum"]
        sumsq += p["sumsq"]
    return SimReport(int(n_frames), scen, values, total, sumsq, wins, scheme)


def sample_frames(J, model: NetworkModel, params: ThroughputParams = ThroughputParams(),
                  scheme: Scheme = SSR, n_frames: int = 10, seed=0,
                  timer: TimerModel = TimerModel()) -> List[FrameSample]:
    """The first ``n_frames`` frames :func:`simulate` would draw, frame by frame."""
    if not 1 <= n_frames <= BLOCK_FRAMES:
        raise ValueError(f"n_frames must lie in [1, {BLOCK_FRAMES}]")
    terms = channel_terms(J, model, params, scheme)
    rng = np.random.default_rng([*np.atleast_1d(seed).tolist(), 3, 0])
    # Draw a whole block so the stream matches the simulator's first block.
    pu_on, alarms, sink, reporter = _draw_block(
        rng, np.asarray(J).astype(bool), model, scheme, np.asarray(terms["L"]), timer, BLOCK_FRAMES
    )
    frames = []
    for i in range(n_frames):
        rep = [None] * model.shape[1] if reporter is None else \
            [int(r) if r >= 0 else None for r in reporter[i]]
        frames.append(FrameSample(pu_on[i], alarms[i], rep, sink[i]))
    return frames


def _analytic_moments(analytic: ThroughputBreakdown, report: SimReport):
    """Analytic means and per-frame standard deviations for each statistic."""
    out = {}
    for k, rec in enumerate(analytic.per_channel):
        v = report.scenario_values[k]
        p0, p1 = rec.prob_h0, 1.0 - rec.prob_h0
        g_f = rec.g_f
        miss = 1.0 - rec.g_d
        probs = np.array([p0 * (1 - g_f), p0 * g_f, p1 * miss, p1 * rec.g_d])
        mean = float((probs * v).sum())
        var = max(float((probs * v ** 2).sum()) - mean ** 2, 0.0)
        out[k] = {"g_f": (g_f, math.sqrt(g_f * (1 - g_f))),
                  "g_d": (rec.g_d, math.sqrt(rec.g_d * (1 - rec.g_d))),
                  "throughput": (rec.total, math.sqrt(var))}
    return out


def comparison_rows(report: SimReport, analytic: ThroughputBreakdown) -> List[Dict]:
    """One row per (channel, statistic) with empirical, analytic and z.

    z uses the standard error implied by the analytic value (the null
    hypothesis). When that is zero the outcome is deterministic and z is 0
    for an exact match and infinite otherwise.
    """
    K = report.scenario_counts.shape[0]
    if len(analytic.per_channel) != K:
        raise ValueError("report and breakdown describe different channel counts")
    n_trials = {"g_f": report._idle, "g_d": report._busy,
                "throughput": np.full(K, report.frames)}
    moments = _analytic_moments(analytic, report)
    rows = []
    for k in range(K):
        for stat in STATS:
            emp, se = report._stat(stat)
            value, sd = moments[k][stat]
            n = int(n_trials[stat][k])
            null_se = sd / math.sqrt(n) if n > 0 else 0.0
            diff = float(emp[k]) - value
            if null_se > 0:
                z = diff / null_se
            elif n == 0 or abs(diff) <= 1e-12 * max(1.0, abs(value)):
                z = 0.0
            else:
                z = math.copysign(math.inf, diff)
            rows.append({"channel": k, "stat": stat, "empirical": float(emp[k]),
                         "stderr": float(se[k]), "analytic": float(value), "z": z})
    return rows


def empirical_vs_analytic(report: SimReport, analytic: ThroughputBreakdown) -> np.ndarray:
    """z-scores shaped (K, 3) for (g_f, g_d, throughput)."""
    rows = comparison_rows(report, analytic)
    return np.array([r["z"] for r in rows]).reshape(-1, len(STATS))
