#!/usr/bin/env python3
# End-to-end walkthrough: build the synthetic corpus, calibrate the
# verification threshold, run the greedy blob search against the toy oracle,
# then compare the optimized patch with the occlusion baselines.

from pathlib import Path

import numpy as np

from gapatch import (ImagePair, OptimizerConfig, PairSelection, ToyOracle,
                     attack_success_rate, build_corpus, calibrate_threshold,
                     default_placement, gray_rectangle_patch, noise_patch,
                     render_photo, run_greedy)
from gapatch.corpus import export_corpus
from gapatch.patch_io import patch_to_png, save_patch

out = Path("runs/demo01")
out.mkdir(parents=True, exist_ok=True)

# 20 identities x 4 photos, everything derived from one seed
corpus = build_corpus(1, 20, 4)
placement = default_placement()
print(f"corpus: {corpus.n_identities} identities x {corpus.photos_per_identity} photos")

# threshold at FAR 1e-3, calibrated from 2000 impostor pairs
oracle = ToyOracle()
threshold = calibrate_threshold(corpus, oracle, target_far=1e-3,
                                n_impostor_pairs=2000, seed=0)
print(f"verification threshold @ FAR 1e-3: {threshold.threshold:.4f}")

# optimize on a single genuine pair of identity 0
pair = ImagePair(render_photo(corpus, 0, 0), render_photo(corpus, 0, 1))
config = OptimizerConfig(seed=0)  # defaults: 625 iters x 8 candidates = 20k queries
oracle.set_phase("optimization")
result = run_greedy(config, pair, placement, oracle)
print(f"best loss {result.best_loss:.4f} after "
      f"{oracle.ledger.phase_count('optimization')} optimization queries")

# evaluate on all genuine pairs except the one we optimized on
selection = PairSelection.excluding_pair(0, 0, 1)


def asr_of(patch):
    report = attack_success_rate(corpus, patch, placement, ToyOracle(),
                                 threshold, selection)
    return report.asr


asr_gap = asr_of(result.best_patch)
asr_gray = asr_of(gray_rectangle_patch(72, 28))
asr_noise = asr_of(noise_patch(np.random.default_rng(0), 72, 28))
print(f"ASR  optimized patch : {asr_gap:.3f}")
print(f"ASR  gray rectangle  : {asr_gray:.3f}")
print(f"ASR  noise patch     : {asr_noise:.3f}")

save_patch(out / "patch.json", result.best_patch, placement)
patch_to_png(out / "patch.png", result.best_patch)
export_corpus(corpus, out / "corpus")
(out / "trace.csv").write_text(result.trace.to_csv())
print(f"artifacts in {out}/")
