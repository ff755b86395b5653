"""Total-effect Sobol indices of the borehole inputs.

r_w dominates and H_l has a small effect; these two inputs are the ones
discretized in the mixed-input borehole problem.

    python3 demos/sensitivity.py
"""

from lvgp.bench import get_function, total_sobol

f = get_function("borehole", mixed=False)
for i, name in enumerate(f.inputs):
    print(f"{name:>4}: {total_sobol(f, name, n=100_000, seed=i):.3f}")
