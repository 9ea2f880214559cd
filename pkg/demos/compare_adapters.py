"""Every adapter on every synthetic benchmark, written as one JSON report.

Same output as ``driftfilter bench``; two trials keep it quick.
"""

import sys

from driftfilter.harness import bench

doc = bench(sys.argv[1] if len(sys.argv) > 1 else None, trials=2)
for row in doc["rows"]:
    m = row["mean"]
    print(f"{row['benchmark']:<9} {row['adapter']:<4} acc {m['baseline_accuracy']:.3f} -> "
          f"{m['adapted_accuracy']:.3f} ({m['percent_change']:+6.1f}%)  "
          f"MMD {m['mmd_percent_change']:+6.1f}%")
