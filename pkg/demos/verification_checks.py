"""Structural checks on SF/PSF representations, printed as a table."""

import numpy as np

from driftfilter import verify

for rep in verify.run_suite(seed=0, scale=0.2):
    tol = "diag" if np.isinf(rep.tolerance) else f"{rep.tolerance:g}"
    print(f"{rep.name:<28} {'ok ' if rep.passed else 'FAIL'} n={rep.instances:<5} "
          f"worst={rep.worst_violation:.2e} tol={tol}")

# the odd-shift case is reported, never asserted
odd = verify.check_periodicity(np.eye(2), np.array([[0.3, 0.7]]), [1, 0])
print("odd shift gap:", round(odd.worst_violation, 4))

b = verify.prop2_bounds(100, 5)
print(f"k=5 of n=100: mean in [{b.mean_lo}, {b.mean_hi}], var in [{b.var_lo}, {b.var_hi}]")
