"""From one sensor's SNR to a fused channel decision.

Walks through the energy detector at a fixed false-alarm target, then fuses
three heterogeneous sensors with different voting thresholds and compares
the sink's error rates with the Bayes-optimal threshold.
"""

import numpy as np

from ehcrn.detection import (
    DetectorConfig,
    bayes_risk,
    ccs_fusion,
    local_detection_prob,
    optimal_l,
    ssr_fusion,
)

det = DetectorConfig()  # P_f target 0.1, 6000 samples
print(f"detector: target P_f = {det.target_false_alarm}, U = {det.samples} samples\n")

print("SNR (dB)   P_d")
for snr_db in (-24, -21, -18, -15, -12):
    gamma = 10 ** (snr_db / 10)
    print(f"{snr_db:8d}   {float(local_detection_prob(gamma, det)):.4f}")

# Three sensors at different distances from the primary user.
gammas = 10 ** (np.array([-15.0, -19.0, -22.0]) / 10)
pairs = [(det.target_false_alarm, float(local_detection_prob(g, det))) for g in gammas]
print("\nlocal (P_f, P_d):", [(round(a, 3), round(b, 3)) for a, b in pairs])

prob_h0 = 0.6
print("\nrule      g_f      g_d      Bayes risk")
for L in (1, 2, 3):
    r = ccs_fusion(pairs, L)
    print(f"L={L}    {r.g_f:.4f}   {r.g_d:.4f}   {bayes_risk(pairs, L, prob_h0):.4f}")
s = ssr_fusion(pairs)
print(f"SSR    {s.g_f:.4f}   {s.g_d:.4f}   (same decision as L=1)")

p_f = float(np.mean([a for a, _ in pairs]))
p_m = float(np.mean([1 - b for _, b in pairs]))
print(f"\noptimal L from mean local error rates: {optimal_l(3, p_f, p_m, prob_h0)}")
