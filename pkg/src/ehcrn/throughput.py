"""Analytic achievable throughput of an assignment under SSR or CCS sensing.

Throughput is reported in bits/Hz per frame (capacity times seconds of data
transmission). Per channel the value combines three of the four PU/decision
scenarios:

* s1: PU idle and declared idle, full rate;
* s3: PU idle but declared busy, a lost opportunity weighted by ``-phi``;
* s4: PU active but declared idle, partial rate ``kappa``;

each gated by the PU-protection indicator (global miss probability below the
threshold) and scaled by capacity times available time. The scenario where a
busy PU is detected contributes nothing.

All evaluators accept a single (M, K) assignment or a stack (..., M, K) and
are pure functions of their inputs.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import List, Optional, Union

import numpy as np

from .detection import fusion_probs, optimal_l_array
from .network import NetworkModel

__all__ = [
    "Scheme",
    "ThroughputParams",
    "ChannelRecord",
    "ThroughputBreakdown",
    "reliability_indicator",
    "channel_terms",
    "channel_throughput_ssr",
    "channel_throughput_ccs",
    "network_throughput",
    "throughput_values",
    "violation_counts",
    "penalized_objective",
    "SchedulingProblem",
    "check_assignment",
]


@dataclass(frozen=True)
class Scheme:
    """Sensing scheme: ``Scheme("ssr")`` or ``Scheme("ccs", rule)``.

    For CCS, ``rule`` is ``"optimal"`` (voting threshold chosen per channel
    from the scheduled set), ``"or"``, ``"and"``, or a fixed integer L that is
    clipped to the number of scheduled sensors.
    """

    kind: str = "ssr"
    rule: Union[str, int] = "optimal"

    def __post_init__(self):
        if self.kind not in ("ssr", "ccs"):
            raise ValueError(f"unknown scheme {self.kind!r}")
        if self.kind == "ccs" and not (
            self.rule in ("optimal", "or", "and") or (isinstance(self.rule, int) and self.rule >= 1)
        ):
            raise ValueError(f"unknown CCS rule {self.rule!r}")

    @classmethod
    def parse(cls, name: str) -> "Scheme":
        """Accepts ``ssr``, ``ccs_opt``, ``ccs_or``, ``ccs_and`` or ``ccs_L3``."""
        name = name.lower()
        if name == "ssr":
            return cls("ssr")
        aliases = {"ccs": "optimal", "ccs_opt": "optimal", "ccs_or": "or", "ccs_and": "and"}
        if name in aliases:
            return cls("ccs", aliases[name])
        if name.startswith("ccs_l") and name[5:].isdigit():
            return cls("ccs", int(name[5:]))
        raise ValueError(f"unknown scheme {name!r}")

    @property
    def label(self) -> str:
        if self.kind == "ssr":
            return "ssr"
        return {"optimal": "ccs_opt", "or": "ccs_or", "and": "ccs_and"}.get(
            self.rule, f"ccs_L{self.rule}"
        )


SSR = Scheme("ssr")
CCS_OPT = Scheme("ccs", "optimal")


@dataclass(frozen=True)
class ThroughputParams:
    """Objective parameters.

    ``constraint_penalty`` defaults to (1 + phi) * sum_k C_k * T_total, which
    puts every infeasible assignment below every feasible one.
    """

    miss_threshold: float = 0.1
    partial_factor: float = 0.5
    penalty_factor: float = 0.5
    constraint_penalty: Optional[float] = None

    def __post_init__(self):
        if not 0.0 <= self.miss_threshold <= 1.0:
            raise ValueError("miss_threshold must lie in [0, 1]")
        if not 0.0 <= self.partial_factor < 1.0:
            raise ValueError("partial_factor (kappa) must lie in [0, 1)")
        if self.penalty_factor < 0:
            raise ValueError("penalty_factor (phi) must be nonnegative")
        if self.constraint_penalty is not None and self.constraint_penalty < 0:
            raise ValueError("constraint_penalty (omega) must be nonnegative")

    def omega(self, model: NetworkModel) -> float:
        if self.constraint_penalty is not None:
            return float(self.constraint_penalty)
        return (1.0 + self.penalty_factor) * model.throughput_bound()


@dataclass(frozen=True)
class ChannelRecord:
    k: int
    n_sensors: int
    L: int
    g_f: float
    g_d: float
    indicator: int
    avail_time: float
    s1: float
    s3: float
    s4: float
    total: float
    prob_h0: float
    capacity: float
    exhausted: bool = False

    @property
    def miss(self) -> float:
        return 1.0 - self.g_d


CSV_COLUMNS = ("k", "M_k", "L_k", "g_f", "g_d", "indicator", "avail_time_s", "s1", "s3", "s4", "total")


@dataclass(frozen=True)
class ThroughputBreakdown:
    per_channel: List[ChannelRecord]
    network_total: float
    scheme: Scheme = field(default=SSR)

    def bits_per_frame(self, bandwidth: float) -> float:
        return self.network_total * bandwidth

    def to_csv(self, fh=None) -> str:
        out = io.StringIO() if fh is None else fh
        w = csv.writer(out, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.per_channel:
            w.writerow([r.k, r.n_sensors, r.L, repr(r.g_f), repr(r.g_d), r.indicator,
                        repr(r.avail_time), repr(r.s1), repr(r.s3), repr(r.s4), repr(r.total)])
        return out.getvalue() if fh is None else ""


def reliability_indicator(g_d, miss_threshold: float):
    """1 iff the global miss probability 1 - g_d is strictly below the threshold."""
    out = ((1.0 - np.asarray(g_d, dtype=float)) < miss_threshold).astype(int)
    return int(out) if out.ndim == 0 else out


def check_assignment(J, model: NetworkModel) -> np.ndarray:
    J = np.asarray(J)
    if J.shape[-2:] != model.shape:
        raise ValueError(f"assignment shape {J.shape[-2:]} does not match network {model.shape}")
    if not np.all((J == 0) | (J == 1)):
        raise ValueError("assignment entries must be 0 or 1")
    return J.astype(bool)


def _rule_thresholds(scheme: Scheme, n, model: NetworkModel, Jf, k_slice=slice(None)):
    """Per-channel voting threshold L for a stack of assignments."""
    if scheme.kind == "ssr" or scheme.rule == "or":
        return np.where(n > 0, 1, 0)
    if scheme.rule == "and":
        return n
    if isinstance(scheme.rule, int):
        return np.minimum(n, scheme.rule)
    # Arithmetic means of the local P_f and P_m over the scheduled sensors.
    safe_n = np.maximum(n, 1)
    mean_pf = (Jf * model.local.p_f[:, k_slice]).sum(axis=-2) / safe_n
    mean_pm = (Jf * model.local.p_m[:, k_slice]).sum(axis=-2) / safe_n
    return optimal_l_array(n, mean_pf, mean_pm, model.prob_h0[k_slice])


def channel_terms(J, model: NetworkModel, params: ThroughputParams, scheme: Scheme,
                  k_slice=slice(None)) -> dict:
    """Vectorised per-channel quantities for a stack of assignments.

    Returns a dict of arrays shaped like ``J.shape[:-2] + (K,)`` with keys
    ``n, L, g_f, g_d, miss, indicator, avail, exhausted, s1, s3, s4, total``.
    """
    J = check_assignment(J, model)[..., k_slice]
    Jf = J.astype(float)
    n = J.sum(axis=-2)
    timing = model.timing
    L = _rule_thresholds(scheme, n, model, Jf, k_slice)

    # Unscheduled sensors enter as padding trials.
    mask = np.swapaxes(J.astype(bool), -1, -2)
    pf = np.swapaxes(Jf * model.local.p_f[:, k_slice], -1, -2)
    pd = np.swapaxes(Jf * model.local.p_d[:, k_slice], -1, -2)
    g_f, _ = fusion_probs(pf, L, mask)
    g_d, miss = fusion_probs(pd, L, mask)

    empty = n == 0
    g_f = np.where(empty, 0.0, g_f)
    g_d = np.where(empty, 0.0, g_d)
    miss = np.where(empty, 1.0, miss)

    if scheme.kind == "ssr":
        avail = np.full(n.shape, timing.frame_len - timing.sense_len - timing.report_slot)
    else:
        avail = timing.frame_len - timing.sense_len - n * timing.report_slot
    exhausted = avail <= 0
    indicator = ((miss < params.miss_threshold) & ~empty).astype(int)
    active = indicator.astype(bool) & ~exhausted

    prob_h0 = model.prob_h0[k_slice]
    prob_h1 = model.prob_h1[k_slice]
    scale = np.where(active, model.capacity[k_slice] * avail, 0.0)
    s1 = prob_h0 * (1.0 - g_f) * scale
    s3 = -params.penalty_factor * prob_h0 * g_f * scale
    s4 = params.partial_factor * prob_h1 * miss * scale
    return {
        "n": n, "L": L, "g_f": g_f, "g_d": g_d, "miss": miss, "indicator": indicator,
        "avail": avail, "exhausted": exhausted, "s1": s1, "s3": s3, "s4": s4,
        "total": s1 + s3 + s4,
    }


def _record(terms: dict, idx, k: int, model: NetworkModel) -> ChannelRecord:
    return ChannelRecord(
        k=k,
        n_sensors=int(terms["n"][idx]),
        L=int(terms["L"][idx]),
        g_f=float(terms["g_f"][idx]),
        g_d=float(terms["g_d"][idx]),
        indicator=int(terms["indicator"][idx]),
        avail_time=float(terms["avail"][idx]),
        s1=float(terms["s1"][idx]),
        s3=float(terms["s3"][idx]),
        s4=float(terms["s4"][idx]),
        total=float(terms["total"][idx]),
        prob_h0=float(model.prob_h0[k]),
        capacity=float(model.capacity[k]),
        exhausted=bool(terms["exhausted"][idx]),
    )


def _single_channel(k, J, model, params, scheme) -> ChannelRecord:
    K = model.shape[1]
    if not 0 <= k < K:
        raise IndexError(f"channel index {k} out of range for K={K}")
    terms = channel_terms(J, model, params, scheme, k_slice=slice(k, k + 1))
    return _record(terms, 0, k, model)


def channel_throughput_ssr(k: int, J, model: NetworkModel, params: ThroughputParams) -> ChannelRecord:
    return _single_channel(k, J, model, params, SSR)


def channel_throughput_ccs(k: int, J, model: NetworkModel, params: ThroughputParams,
                           L: Union[int, str] = "optimal") -> ChannelRecord:
    """CCS throughput of channel ``k``; ``L`` is an integer or ``"optimal"``.

    Check ``record.exhausted`` for schedules whose reporting slots consume the
    whole frame; those score zero.
    """
    return _single_channel(k, J, model, params, Scheme("ccs", L))


def network_throughput(J, model: NetworkModel, params: ThroughputParams,
                       scheme: Scheme = SSR) -> ThroughputBreakdown:
    J = np.asarray(J)
    if J.ndim != 2:
        raise ValueError("network_throughput takes a single (M, K) assignment")
    terms = channel_terms(J, model, params, scheme)
    records = [_record(terms, k, k, model) for k in range(model.shape[1])]
    return ThroughputBreakdown(records, float(sum(r.total for r in records)), scheme)


def throughput_values(J, model: NetworkModel, params: ThroughputParams, scheme: Scheme = SSR):
    """Network throughput for a stack of assignments, shape ``J.shape[:-2]``."""
    return channel_terms(J, model, params, scheme)["total"].sum(axis=-1)


def violation_counts(J, model: NetworkModel) -> np.ndarray:
    """Number of sensors exceeding their harvesting budget, per assignment."""
    J = np.asarray(J)
    return (J.sum(axis=-1) > model.caps).sum(axis=-1)


def penalized_objective(J, model: NetworkModel, params: ThroughputParams, scheme: Scheme = SSR):
    """Throughput minus omega per sensor that violates its energy budget."""
    values = throughput_values(J, model, params, scheme) - params.omega(model) * violation_counts(J, model)
    return float(values) if np.ndim(values) == 0 else values


@dataclass(frozen=True)
class SchedulingProblem:
    """Objective plus feasibility bundle handed to the optimizers."""

    model: NetworkModel
    params: ThroughputParams = field(default_factory=ThroughputParams)
    scheme: Scheme = SSR

    @property
    def shape(self):
        return self.model.shape

    @property
    def caps(self) -> np.ndarray:
        return self.model.caps

    def throughput(self, J):
        return throughput_values(J, self.model, self.params, self.scheme)

    def objective(self, J):
        return penalized_objective(J, self.model, self.params, self.scheme)

    def feasible(self, J) -> np.ndarray:
        return violation_counts(J, self.model) == 0

    def breakdown(self, J) -> ThroughputBreakdown:
        return network_throughput(J, self.model, self.params, self.scheme)
