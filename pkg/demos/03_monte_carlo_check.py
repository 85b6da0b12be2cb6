"""Check the analytic throughput against simulated frames.

Optimises a schedule, plays 100000 frames of the reporting protocol (PU
activity, local energy-detector decisions, reporter selection, sink vote)
and prints z-scores of the empirical statistics against the analytic ones.
"""

import numpy as np

from ehcrn.config import Config, build_model
from ehcrn.optimizers import ce_optimize
from ehcrn.simulator import empirical_vs_analytic, simulate
from ehcrn.throughput import SchedulingProblem, Scheme

cfg = Config()
model = build_model(cfg, seed=2)

for name in ("ssr", "ccs_opt"):
    prob = SchedulingProblem(model, cfg.throughput_params(), Scheme.parse(name))
    J = ce_optimize(prob, cfg.ce_params(), seed=2).best_assignment
    report = simulate(J, model, prob.params, prob.scheme, n_frames=100_000, seed=2)
    analytic = prob.breakdown(J)
    z = empirical_vs_analytic(report, analytic)
    print(f"\n[{name}] network throughput: simulated {report.network_throughput:.4f} "
          f"+/- {report.network_stderr:.4f}, analytic {analytic.network_total:.4f}")
    print("channel   z(g_f)   z(g_d)   z(throughput)")
    for k, row in enumerate(z):
        print(f"{k:7d}   " + "   ".join(f"{v:+6.2f}" for v in row))
    print(f"cells with |z| <= 3: {int(np.sum(np.abs(z) <= 3))} of {z.size}")
    if name == "ssr":
        print("reporter counts per sensor:", report.reporter_histogram.tolist())
