"""Energy-detection probabilities and hard-decision fusion rules.

Local detection uses the constant-false-alarm design: every sensor runs at a
fixed target false-alarm probability and the detection probability follows
from its SNR and sample count. Two fusion schemes combine local decisions at
the sink:

* CCS (conventional cooperative sensing) with an L-out-of-M vote, evaluated
  exactly for heterogeneous sensors through the Poisson-binomial distribution.
* SSR (superior selective reporting), which at the decision level behaves as
  the OR rule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np
from scipy import special

__all__ = [
    "DetectorConfig",
    "LocalProbs",
    "FusionResult",
    "gaussian_q",
    "gaussian_q_inv",
    "local_detection_prob",
    "local_miss_prob",
    "local_probs",
    "poisson_binomial_pmf",
    "fusion_probs",
    "ccs_fusion",
    "ssr_fusion",
    "optimal_l",
    "optimal_l_array",
    "bayes_risk",
]

# Slack used before taking ceil() of a ratio that is an integer in exact
# arithmetic (e.g. M/2 in the symmetric case) but may land 1 ulp above it.
_CEIL_SLACK = 1e-9


@dataclass(frozen=True)
class DetectorConfig:
    target_false_alarm: float = 0.1
    samples: int = 6000
    noise_variance: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.target_false_alarm < 1.0:
            raise ValueError("target_false_alarm must lie in (0, 1)")
        if int(self.samples) != self.samples or self.samples < 1:
            raise ValueError("samples must be a positive integer")
        if not self.noise_variance > 0:
            raise ValueError("noise_variance must be positive")


@dataclass(frozen=True)
class LocalProbs:
    """Per (sensor, channel) local decision probabilities.

    ``p_m`` is carried separately from ``p_d`` so that miss probabilities of
    strong sensors keep their relative accuracy instead of rounding to zero.
    """

    p_f: np.ndarray
    p_d: np.ndarray
    p_m: np.ndarray


@dataclass(frozen=True)
class FusionResult:
    g_f: float
    g_d: float
    scheme: str
    L: int = 1


def gaussian_q(x):
    """Standard Gaussian upper-tail probability Q(x) = P(N(0,1) > x)."""
    if np.ndim(x) == 0:
        return 0.5 * math.erfc(float(x) / math.sqrt(2.0))
    return 0.5 * special.erfc(np.asarray(x, dtype=float) / np.sqrt(2.0))


def gaussian_q_inv(p):
    """Inverse of :func:`gaussian_q` on (0, 1)."""
    arr = np.asarray(p, dtype=float)
    if np.any(~((arr > 0.0) & (arr < 1.0))):
        raise ValueError("gaussian_q_inv is defined on the open interval (0, 1)")
    # Q^{-1}(p) = -Phi^{-1}(p); avoids forming 1 - p for small tails.
    out = -special.ndtri(arr)
    return float(out) if np.ndim(p) == 0 else out


def _detection_argument(gamma, cfg: DetectorConfig):
    gamma = np.asarray(gamma, dtype=float)
    if np.any(gamma < 0):
        raise ValueError("SNR must be nonnegative")
    threshold = gaussian_q_inv(cfg.target_false_alarm)
    return (threshold - math.sqrt(cfg.samples) * gamma) / np.sqrt(2.0 * gamma + 1.0)


def local_detection_prob(gamma, cfg: DetectorConfig):
    """Detection probability of one energy detector at linear SNR ``gamma``.

    Q((Q^{-1}(Pf) - sqrt(U) * gamma) / sqrt(2 * gamma + 1)) with the threshold
    eliminated by fixing the false-alarm level.
    """
    out = gaussian_q(_detection_argument(gamma, cfg))
    return float(out) if np.ndim(gamma) == 0 else out


def local_miss_prob(gamma, cfg: DetectorConfig):
    """1 - local_detection_prob, evaluated directly on the lower tail."""
    out = gaussian_q(-_detection_argument(gamma, cfg))
    return float(out) if np.ndim(gamma) == 0 else out


def local_probs(snr: np.ndarray, cfg: DetectorConfig) -> LocalProbs:
    snr = np.asarray(snr, dtype=float)
    p_f = np.full(snr.shape, cfg.target_false_alarm)
    return LocalProbs(
        p_f=p_f,
        p_d=np.asarray(local_detection_prob(snr, cfg)),
        p_m=np.asarray(local_miss_prob(snr, cfg)),
    )


def poisson_binomial_pmf(probs) -> np.ndarray:
    """PMF of the number of successes among independent Bernoulli trials.

    ``probs`` has the trials on its last axis; leading axes are batched. The
    result has shape ``probs.shape[:-1] + (n + 1,)``. A trial with probability
    zero leaves the distribution unchanged, which lets callers mask
    unscheduled sensors by zeroing them.
    """
    probs = np.asarray(probs, dtype=float)
    n = probs.shape[-1]
    pmf = np.zeros(probs.shape[:-1] + (n + 1,))
    pmf[..., 0] = 1.0
    for i in range(n):
        p = probs[..., i, None]
        # Only the first i + 1 counts can be nonzero before trial i.
        head = pmf[..., : i + 1].copy()
        pmf[..., : i + 1] = head * (1.0 - p)
        pmf[..., 1 : i + 2] += head * p
    return pmf


def _truncated_tail(x, T):
    """(P[count >= T], P[count < T]) tracking only the counts below T.

    Mass reaching T moves to an absorbing state, so both tails are sums of
    nonnegative terms. ``T`` is broadcast against ``x.shape[:-1]``; entries
    with ``T <= 0`` give (1, 0).
    """
    n = x.shape[-1]
    T = np.broadcast_to(T, x.shape[:-1])
    width = int(min(max(int(T.max(initial=0)), 1), n + 1))
    valid = np.arange(width) < T[..., None]
    ragged = not valid.all()
    top = np.clip(T - 1, 0, width - 1)[..., None]
    dist = np.zeros(x.shape[:-1] + (width,))
    dist[..., 0] = 1.0
    dist *= valid
    absorbed = np.zeros(x.shape[:-1] + (1,))
    q = 1.0 - x
    for i in range(n):
        carry = dist * x[..., i, None]
        absorbed += np.take_along_axis(carry, top, axis=-1)
        dist *= q[..., i, None]
        dist[..., 1:] += carry[..., :-1]
        if ragged:
            dist *= valid
    absorbed = absorbed[..., 0]
    return np.where(T <= 0, 1.0, absorbed), dist.sum(axis=-1)


def fusion_probs(probs, L, scheduled=None) -> Tuple[np.ndarray, np.ndarray]:
    """Return (P[at least L successes], P[fewer than L successes]).

    ``probs`` has the trials on its last axis; ``scheduled`` optionally marks
    which trials take part (the rest are padding). For ``L == 1`` both tails
    come from the product of failure probabilities, so the OR rule and SSR
    share one expression. Otherwise the recursion runs over successes or,
    when fewer states are needed, over failures: at least L of n succeed
    exactly when at most n - L fail. Neither tail is formed as a difference
    from one.
    """
    probs = np.asarray(probs, dtype=float)
    if scheduled is None:
        scheduled = np.ones(probs.shape, dtype=bool)
    scheduled = np.broadcast_to(np.asarray(scheduled, dtype=bool), probs.shape)
    probs = np.where(scheduled, probs, 0.0)
    L = np.broadcast_to(np.asarray(L), probs.shape[:-1])
    none = np.prod(1.0 - probs, axis=-1)
    if np.all(L <= 1):
        return np.where(L == 1, 1.0 - none, 1.0), np.where(L == 1, none, 0.0)
    n = scheduled.sum(axis=-1)
    fail_cap = n - L + 1
    by_failures = (L >= 1) & (L <= n) & (fail_cap < L)
    x = np.where(by_failures[..., None], np.where(scheduled, 1.0 - probs, 0.0), probs)
    hi, lo = _truncated_tail(x, np.where(by_failures, fail_cap, L))
    upper = np.where(by_failures, lo, hi)
    lower = np.where(by_failures, hi, lo)
    is_or = L == 1
    return np.where(is_or, 1.0 - none, upper), np.where(is_or, none, lower)


def _split_pairs(scheduled: Sequence[Tuple[float, float]]):
    pairs = np.asarray(scheduled, dtype=float)
    if pairs.ndim != 2 or pairs.shape[0] == 0 or pairs.shape[1] != 2:
        raise ValueError("need a nonempty list of (p_f, p_d) pairs")
    if np.any((pairs < 0) | (pairs > 1)):
        raise ValueError("probabilities must lie in [0, 1]")
    return pairs[:, 0], pairs[:, 1]


def ccs_fusion(scheduled: Sequence[Tuple[float, float]], L: int) -> FusionResult:
    """Global false-alarm and detection probabilities of the L-out-of-M rule.

    >>> r = ccs_fusion([(0.1, 0.5)] * 3, L=3)
    >>> round(r.g_f, 12)
    0.001
    """
    p_f, p_d = _split_pairs(scheduled)
    if int(L) != L or not 1 <= L <= len(p_f):
        raise ValueError(f"L must be an integer in [1, {len(p_f)}], got {L}")
    g_f, _ = fusion_probs(p_f, int(L))
    g_d, _ = fusion_probs(p_d, int(L))
    return FusionResult(float(g_f), float(g_d), "CCS", int(L))


def ssr_fusion(scheduled: Sequence[Tuple[float, float]]) -> FusionResult:
    """Global probabilities under superior selective reporting.

    The sink hears a report iff at least one scheduled sensor raised an alarm,
    so both probabilities are 1 - prod(1 - p).
    """
    p_f, p_d = _split_pairs(scheduled)
    g_f, _ = fusion_probs(p_f, 1)
    g_d, _ = fusion_probs(p_d, 1)
    return FusionResult(float(g_f), float(g_d), "SSR", 1)


def _optimal_l_ratio(m_count, p_f, p_m, prob_h0):
    numerator = np.log(prob_h0 / (1.0 - prob_h0)) + m_count * np.log((1.0 - p_f) / p_m)
    denominator = np.log((1.0 - p_m) / p_f) + np.log((1.0 - p_f) / p_m)
    return numerator, denominator


def optimal_l(m_count: int, p_f: float, p_m: float, prob_h0: float) -> int:
    """Voting threshold minimising the Bayes error of an L-out-of-M rule.

    Evaluates min(M, ceil(num / den)) with
    num = log(P0 / (1 - P0)) + M log((1 - Pf) / Pm) and
    den = log((1 - Pm) / Pf) + log((1 - Pf) / Pm), clamped to [1, M].

    >>> optimal_l(5, 0.1, 0.1, 0.5)
    3
    """
    if int(m_count) != m_count or m_count < 1:
        raise ValueError("m_count must be a positive integer")
    for name, v in (("p_f", p_f), ("p_m", p_m), ("prob_h0", prob_h0)):
        if not 0.0 < v < 1.0:
            raise ValueError(f"{name} must lie in (0, 1)")
    num, den = _optimal_l_ratio(m_count, p_f, p_m, prob_h0)
    if den == 0.0:
        raise ValueError("degenerate detector: P_f * P_m == (1 - P_f) * (1 - P_m)")
    raw = math.ceil(num / den - _CEIL_SLACK)
    return int(min(m_count, max(1, raw)))


def optimal_l_array(m_count, p_f, p_m, prob_h0) -> np.ndarray:
    """Vectorised :func:`optimal_l` used by the throughput evaluator.

    Entries with ``m_count == 0`` give 0. Probabilities are clipped away from
    {0, 1}; a nonpositive denominator (sensors no better than chance) falls
    back to the OR rule.
    """
    m_count = np.asarray(m_count)
    tiny = 1e-300
    p_f = np.clip(p_f, tiny, 1.0 - 1e-16)
    p_m = np.clip(p_m, tiny, 1.0 - 1e-16)
    with np.errstate(divide="ignore", invalid="ignore"):
        num, den = _optimal_l_ratio(m_count, p_f, p_m, prob_h0)
        raw = np.ceil(num / den - _CEIL_SLACK)
    raw = np.where(den > 0, raw, 1.0)
    L = np.clip(raw, 1, np.maximum(m_count, 1)).astype(int)
    return np.where(m_count > 0, L, 0)


def bayes_risk(scheduled: Sequence[Tuple[float, float]], L: int, prob_h0: float) -> float:
    """P(H0) * G_f + P(H1) * (1 - G_d) of the L-out-of-M rule."""
    r = ccs_fusion(scheduled, L)
    return prob_h0 * r.g_f + (1.0 - prob_h0) * (1.0 - r.g_d)

