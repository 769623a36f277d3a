"""Print the per-y chaos convergence table from a chaos-convergence summary.

Usage: python scripts/convergence_sweep.py results/chaos-convergence_summary.json
"""

import json
import sys

doc = json.loads(open(sys.argv[1]).read())
print(f"{'y':>6} {'Ycap':>9} {'L1 diff':>10} {'se':>8} {'mod 2nd':>10} {'se':>8}")
for y, row in sorted(doc["summary"]["per_y"].items(), key=lambda kv: float(kv[0])):
    print(
        f"{float(y):6g} {row['y_cap']:9g} {row['l1_diff']:10.4f} {row['l1_diff_se']:8.4f} "
        f"{row['modified_second_moment']:10.5f} {row['modified_second_moment_se']:8.5f}"
    )
