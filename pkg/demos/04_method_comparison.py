"""Compare the neighbor-selection methods on the synthetic rotation task.

Takes under a minute with the default settings. Pass a smaller
round count for a quicker look, e.g. ``python 04_method_comparison.py 10 20``.
"""
import sys
import time

import numpy as np

from panm.engine import RunConfig, comm_cost_analytic, run_simulation

T1, T2 = (int(v) for v in sys.argv[1:3]) if len(sys.argv) > 2 else (30, 60)
methods = ["local", "random", "fix_topology", "pens", "panm_loss", "panm_grad", "oracle"]

print(f"{'method':13s} {'acc %':>6s} {'prec':>5s} {'recall':>6s} {'receives':>9s}  time")
for m in methods:
    start = time.time()
    cfg = RunConfig(method=m, seed=0, n=40, r=2, l=10, k=5, T1=T1, T2=T2)
    res = run_simulation(cfg)
    f = res.final
    prec = "-" if f.neighbor_precision is None else f"{f.neighbor_precision:.2f}"
    rec = "-" if f.neighbor_recall is None else f"{f.neighbor_recall:.2f}"
    assert f.cumulative_model_transfers + f.cumulative_receive_shortfall == comm_cost_analytic(cfg)[0]
    print(f"{m:13s} {100 * np.mean(res.final_accuracies):6.2f} {prec:>5s} {rec:>6s} "
          f"{f.cumulative_model_transfers:9d}  {time.time() - start:4.0f}s")
