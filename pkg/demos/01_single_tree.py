"""Find a perch on one synthetic tree and explain the choice.

Run from the repository root:

    python demos/01_single_tree.py [seed] [out_dir]

It writes the mask, the overlay and the JSON report to ``out_dir``
(default ``demo_out``) and prints a short narrative of each stage.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

from perchloc import PipelineConfig, build_report, generate_tree, render_overlay, run_pipeline, save_mask

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 0
out = Path(sys.argv[2] if len(sys.argv) > 2 else "demo_out")
out.mkdir(parents=True, exist_ok=True)

tree = generate_tree(seed)
save_mask(tree.mask, out / f"tree_{seed}.png")
print(f"tree {seed}: {len(tree.branches_truth)} strokes, ideal branch is #{tree.ideal_branch_index}")
ideal = tree.ideal
print(f"  ideal branch: width {ideal.width_px} px, tilt {ideal.theta_deg:.1f} deg")

run = run_pipeline(PipelineConfig(mm_per_px=tree.mm_per_px), mask=tree.mask)
print(f"skeleton: {int(run.skeleton.image.sum())} pixels")
print(f"graph: {len(run.graph.edges)} branches before pruning, {len(run.pruned.edges)} after")
viable = sum(all(p.checks(run.thresholds).values()) for p in run.profiles)
print(f"windows: {len(run.profiles)} profiled, {viable} viable")

res = run.result
print(f"result: {res.status.value}")
if res.found:
    c = res.chosen
    print(f"  perch at pixel {res.midpoint_px}, {res.midpoint_mm} mm from the bottom-left")
    print(f"  tilt {c.profile.theta_deg:.1f} deg, width {c.profile.width_avg_central_px:.1f} px, "
          f"penalty {c.penalty:.3f}")

render_overlay(run, out / f"overlay_{seed}.png", verbose=True)
(out / f"report_{seed}.json").write_text(json.dumps(build_report(run), indent=2))
print(f"wrote overlay and report to {out}/")
