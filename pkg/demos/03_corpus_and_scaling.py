"""Score the pipeline on a seeded corpus, then time it at several scales.

    python demos/03_corpus_and_scaling.py [n_trees]
"""

from __future__ import annotations

import sys
import tempfile
from pathlib import Path

import numpy as np

from perchloc import PipelineConfig, evaluate_corpus, generate_tree, profile, save_mask

n = int(sys.argv[1]) if len(sys.argv) > 1 else 20

ev = evaluate_corpus(n)
print(f"{n} trees with one graspable branch: success rate {ev.success_rate:.2f}")
rej = evaluate_corpus(n, include_ideal=False, seed_base=10_000)
print(f"{n} trees with nothing graspable: {rej.correct_rejections} correctly rejected")

# a 3x upscaled tree is just over a megapixel
big = np.kron(generate_tree(0).mask.data, np.ones((3, 3), bool))
with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "big.png"
    save_mask(big, path)
    rows = profile(PipelineConfig(mask_path=str(path), mm_per_px=10 / 3), [1.0, 0.75, 0.5, 0.25])

print(f"\n{'scale':>6} {'total s':>8} {'mat s':>7} {'section s':>9} {'prune s':>8}")
for r in rows:
    print(f"{r.scale:>6.2f} {r.total:>8.3f} {r.mat:>7.3f} {r.section:>9.3f} {r.prune:>8.3f}")
