#!/usr/bin/env python3
# Factor ablation (symmetry / color / restarts), geometry sweep over row
# trims, and the ASR-vs-query-budget curve. Budgets here are scaled down so
# the whole script stays around a minute; pass --full for full-budget runs.

import sys
from pathlib import Path

from gapatch import (DEFAULT_ABLATION_GRID, ImagePair, OptimizerConfig,
                     SweepSpec, ToyOracle, build_corpus, calibrate_threshold,
                     curve_to_csv, default_placement, geometry_sweep, loss,
                     queries_vs_asr, render_photo, run_ablation, run_greedy,
                     sweep_to_csv)

full = "--full" in sys.argv
out = Path("runs/demo02")
out.mkdir(parents=True, exist_ok=True)

corpus = build_corpus(1, 20, 4)
placement = default_placement()
threshold = calibrate_threshold(corpus, ToyOracle(), 1e-3, 2000, 0)
pair = ImagePair(render_photo(corpus, 0, 0), render_photo(corpus, 0, 1))

base = OptimizerConfig(n_iters=625 if full else 100,
                       restart_interval=300 if full else 50)

# 1. ablation: each cell flips one factor off the base config
table = run_ablation(DEFAULT_ABLATION_GRID, corpus, ToyOracle, base, placement,
                     threshold, opt_identity=0, opt_photos=(0, 1),
                     seeds=range(3 if full else 2))
print("ablation (median over seeds):")
for label, cell in table["cells"].items():
    print(f"  {label:40s} asr={cell['median_asr']:.3f} "
          f"loss={cell['median_best_loss']:.4f}")

# 2. geometry sweep: which rows of the patch carry the attack?
result = run_greedy(base, pair, placement, ToyOracle())
rows = geometry_sweep(result.best_patch, pair, placement, ToyOracle(),
                      SweepSpec())
(out / "sweep.csv").write_text(sweep_to_csv(rows))
kept = [r for r in rows if r["mask_kind"] == "trim_top"]
print("top-trim sweep (k rows removed -> loss):")
for r in kept[:: max(1, len(kept) // 6)]:
    print(f"  k={r['k']:2d}  loss={r['loss']:.4f}")

# 3. ASR as a function of spent queries
checkpoints = [0, 1000, 2000, 5000, 10000, 20000] if full else [0, 800, 1600, 3200]
curve = queries_vs_asr(base, corpus, ToyOracle, placement, threshold,
                       checkpoints, n_runs=5 if full else 2,
                       opt_identity=0, opt_photos=(0, 1))
(out / "curve.csv").write_text(curve_to_csv(curve))
print("queries -> mean ASR:")
for point in curve["checkpoints"]:
    if point["mean_asr"] is not None:
        print(f"  {point['queries']:6d}  {point['mean_asr']:.3f}")
print(f"artifacts in {out}/")
