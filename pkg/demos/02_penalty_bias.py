"""Show how shifting weight between angle and width changes the pick.

With all weight on the angle term the flattest window wins; with all
weight on the width term the window closest to the thinnest graspable
width wins.
"""

from __future__ import annotations

import sys

from perchloc import DroneSpec, PipelineConfig, generate_tree, run_pipeline

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 3
tree = generate_tree(seed)

print(f"tree {seed}")
print(f"{'lambda_angle':>12} {'midpoint':>12} {'theta':>7} {'width':>7} {'penalty':>8}")
for lam in (0.0, 0.25, 0.5, 0.8, 1.0):
    spec = DroneSpec().with_lambda_angle(lam)
    run = run_pipeline(PipelineConfig(mm_per_px=tree.mm_per_px, spec=spec), mask=tree.mask)
    if not run.result.found:
        print(f"{lam:>12.2f} {run.result.status.value}")
        continue
    c = run.result.chosen
    print(f"{lam:>12.2f} {str(run.result.midpoint_px):>12} {c.profile.theta_deg:>7.2f} "
          f"{c.profile.width_avg_central_px:>7.2f} {c.penalty:>8.3f}")
