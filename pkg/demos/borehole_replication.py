"""Replicated comparison of MAP and fully Bayesian fits on the borehole function.

Two of the eight borehole inputs (r_w and H_l) are discretized into four
values each, giving one qualitative input with 16 levels. Each replicate
draws a stratified training design with two points per level (n = 32) and
scores the predictions on 1000 uniform test points.

    python3 demos/borehole_replication.py [replicates]

The same experiment is available from the command line:

    lvgp bench --config demos/configs/borehole.json --out-dir borehole_out
"""

import sys
import time

from lvgp.bench import ExperimentConfig, run_experiment

replicates = int(sys.argv[1]) if len(sys.argv) > 1 else 5
cfg = ExperimentConfig.from_json("demos/configs/borehole.json")
cfg.replicates = replicates
t0 = time.perf_counter()
report = run_experiment(cfg, "borehole_out")
print(report.metrics_frame().to_string(index=False))
for key, s in report.summary().items():
    print(f"{key}: RRMSE {s['rrmse_mean']:.4f}  MIS {s['mis_mean']:.3f}  coverage {s['coverage_mean']:.3f}")
print(f"total {time.perf_counter() - t0:.0f} s; files in borehole_out/")
