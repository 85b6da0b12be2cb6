"""How much does harvested power buy?

Runs the ce_vs_greedy_eh preset over a few seeds and prints the mean
throughput of each method at every harvesting rate. Small rates leave each
sensor one or two channels; from about 7 mW a sensor can afford every
channel it is worth scheduling.
"""

from ehcrn.experiments import DELTA_GRID_MW, run_experiment

res = run_experiment("ce_vs_greedy_eh", seeds=range(5))
print("delta (mW)      CE   greedy   random")
for d in DELTA_GRID_MW:
    row = [res.column("mean", delta_mW=d, method=m)[0] for m in ("ce", "greedy", "random")]
    print(f"{d:10d}   " + "   ".join(f"{v:.3f}" for v in row))
