"""Evaluation harness: attack success rate, retrieval misidentification,
baseline comparison, factor ablations, geometry sweeps, and query-budget
curves. All reports embed enough config to reproduce them bit-for-bit on the
toy oracle.
"""

import csv
import io
import json
from dataclasses import dataclass, field, replace
from statistics import median

import numpy as np

from .corpus import Corpus, genuine_pairs, render_photo
from .errors import InvalidArgumentError
from .optimizer import (ImagePair, OptimizerConfig, loss, run_greedy)
from .oracle import SimilarityOracle, VerificationThreshold
from .patch import (Patch, Placement, central_band_mask, mask_patch,
                    trim_bottom_mask, trim_top_mask, zero_patch)
from .seeding import derive_seed

REPORT_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class PairSelection:
    """Which genuine (armed, clean) photo pairs ASR is measured on.

    exclude: ordered (identity, photo_i, photo_j) triples to skip, normally
    the optimization pair in both orders so ASR measures generalization.
    """

    exclude: tuple = ()

    @staticmethod
    def excluding_pair(identity: int, photo_a: int, photo_b: int) -> "PairSelection":
        return PairSelection(exclude=((identity, photo_a, photo_b),
                                      (identity, photo_b, photo_a)))


@dataclass
class EvalReport:
    schema_version: int
    threshold: dict
    n_pairs: int
    n_success: int
    asr: float
    clean_similarities: list
    armed_similarities: list
    queries: dict
    config: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(self.__dict__, indent=2)


def attack_success_rate(corpus: Corpus, patch: Patch, placement: Placement,
                        oracle: SimilarityOracle, threshold: VerificationThreshold,
                        pair_selection: PairSelection = PairSelection(),
                        config_echo: dict | None = None) -> EvalReport:
    """ASR over genuine pairs: success iff armed-vs-clean sim < threshold.

    For each ordered genuine pair the first photo wears the patch and the
    second stays clean. Clean similarities are recorded alongside for
    reference (they cost ledger queries too).
    """
    from .patch import apply_patch
    pairs = [p for p in genuine_pairs(corpus) if p not in set(pair_selection.exclude)]
    if not pairs:
        raise InvalidArgumentError("no genuine pairs selected")
    clean_sims, armed_sims = [], []
    successes = 0
    for ident, i, j in pairs:
        photo_i = render_photo(corpus, ident, i)
        photo_j = render_photo(corpus, ident, j)
        armed = apply_patch(photo_i, patch, placement)
        clean_sims.append(oracle.similarity(photo_i, photo_j))
        s = oracle.similarity(armed, photo_j)
        armed_sims.append(s)
        if s < threshold.threshold:
            successes += 1
    return EvalReport(
        schema_version=REPORT_SCHEMA_VERSION,
        threshold=threshold.to_dict(),
        n_pairs=len(pairs),
        n_success=successes,
        asr=successes / len(pairs),
        clean_similarities=clean_sims,
        armed_similarities=armed_sims,
        queries=oracle.ledger.snapshot(),
        config=config_echo or {},
    )


def misidentification_rate(probe_images, gallery: Corpus, subject_id: int,
                           oracle: SimilarityOracle,
                           distractor_ids=None) -> float:
    """Fraction of probes whose best distractor match beats every own-reference
    match. An empty distractor set scores -inf, so such probes never count.

    distractor_ids defaults to every gallery identity except the subject."""
    if not (0 <= subject_id < gallery.n_identities):
        raise InvalidArgumentError(f"subject {subject_id} not in gallery")
    if distractor_ids is None:
        distractor_ids = [i for i in range(gallery.n_identities) if i != subject_id]
    if subject_id in distractor_ids:
        raise InvalidArgumentError("subject cannot be its own distractor")
    references = [render_photo(gallery, subject_id, j)
                  for j in range(gallery.photos_per_identity)]
    distractors = [render_photo(gallery, ident, j)
                   for ident in distractor_ids
                   for j in range(gallery.photos_per_identity)]
    misidentified = 0
    for probe in probe_images:
        own_best = max(oracle.similarity(probe, ref) for ref in references)
        distractor_best = max((oracle.similarity(probe, d) for d in distractors),
                              default=-np.inf)
        if distractor_best > own_best:
            misidentified += 1
    return misidentified / len(probe_images) if probe_images else 0.0


# ---------------------------------------------------------------------------
# Factor ablation (symmetry / color / restarts)


@dataclass(frozen=True)
class AblationCell:
    symmetric: bool = True
    channels: int = 1
    restarts_enabled: bool = True

    def label(self) -> str:
        return (f"sym={'yes' if self.symmetric else 'no'},"
                f"color={'gray' if self.channels == 1 else 'rgb'},"
                f"restarts={'yes' if self.restarts_enabled else 'no'}")


DEFAULT_ABLATION_GRID = (
    AblationCell(True, 1, True),
    AblationCell(True, 3, True),
    AblationCell(False, 1, True),
    AblationCell(True, 1, False),
)


def run_ablation(grid, corpus: Corpus, oracle_factory, base_config: OptimizerConfig,
                 placement: Placement, threshold: VerificationThreshold,
                 opt_identity: int = 0, opt_photos: tuple = (0, 1),
                 seeds=(0, 1, 2)) -> dict:
    """One optimization + ASR evaluation per (cell, seed); medians reported.

    oracle_factory() must return a fresh oracle (own ledger) per run. Every
    cell runs the same query budget; a failed run is recorded, not dropped.
    """
    if len(seeds) < 1:
        raise InvalidArgumentError("need at least one seed per cell")
    cells = list(grid)
    if not cells:
        raise InvalidArgumentError("empty ablation grid")
    pair = ImagePair(render_photo(corpus, opt_identity, opt_photos[0]),
                     render_photo(corpus, opt_identity, opt_photos[1]))
    selection = PairSelection.excluding_pair(opt_identity, *opt_photos)
    results = {}
    for cell in cells:
        per_seed = []
        for seed in seeds:
            cfg = replace(base_config, symmetric=cell.symmetric,
                          channels=cell.channels,
                          restarts_enabled=cell.restarts_enabled,
                          seed=derive_seed(seed, f"ablation/{cell.label()}"))
            try:
                oracle = oracle_factory()
                result = run_greedy(cfg, pair, placement, oracle)
                report = attack_success_rate(corpus, result.best_patch, placement,
                                             oracle, threshold, selection)
                per_seed.append({"seed": seed, "asr": report.asr,
                                 "best_loss": result.best_loss,
                                 "queries": oracle.ledger.snapshot()})
            except Exception as exc:  # keep failed cells visible in the table
                per_seed.append({"seed": seed, "error": f"{type(exc).__name__}: {exc}"})
        ok = [r for r in per_seed if "error" not in r]
        results[cell.label()] = {
            "median_asr": median(r["asr"] for r in ok) if ok else None,
            "median_best_loss": median(r["best_loss"] for r in ok) if ok else None,
            "runs": per_seed,
        }
    return {"schema_version": REPORT_SCHEMA_VERSION, "cells": results}


# ---------------------------------------------------------------------------
# Geometry sweep


@dataclass(frozen=True)
class SweepSpec:
    """Row trims from each edge (every k up to the patch height) plus a few
    centered horizontal bands."""

    band_heights: tuple = (4, 8, 12)


def geometry_sweep(patch: Patch, pair: ImagePair, placement: Placement,
                   oracle: SimilarityOracle,
                   spec: SweepSpec = SweepSpec()) -> list[dict]:
    """Loss of the patch under each trim mask. Rows: mask_kind, k, loss."""
    w, h = patch.width, patch.height
    rows = []
    for k in range(h + 1):
        masked = mask_patch(patch, trim_top_mask(w, h, k))
        rows.append({"mask_kind": "trim_top", "k": k,
                     "loss": loss(masked, pair, placement, oracle)})
    for k in range(h + 1):
        masked = mask_patch(patch, trim_bottom_mask(w, h, k))
        rows.append({"mask_kind": "trim_bottom", "k": k,
                     "loss": loss(masked, pair, placement, oracle)})
    for band in spec.band_heights:
        if band <= h:
            masked = mask_patch(patch, central_band_mask(w, h, band))
            rows.append({"mask_kind": "central_band", "k": band,
                         "loss": loss(masked, pair, placement, oracle)})
    return rows


def sweep_to_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["mask_kind", "k", "loss"])
    for row in rows:
        writer.writerow([row["mask_kind"], row["k"], repr(row["loss"])])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# ASR as a function of query budget


def queries_vs_asr(base_config: OptimizerConfig, corpus: Corpus, oracle_factory,
                   placement: Placement, threshold: VerificationThreshold,
                   checkpoints, n_runs: int = 5, opt_identity: int = 0,
                   opt_photos: tuple = (0, 1)) -> dict:
    """Snapshot the global best at each query checkpoint and measure ASR.

    Checkpoints must be ascending; ones beyond the run's budget are reported
    as unreached (null). The mean at each checkpoint covers reaching runs.
    """
    checkpoints = [int(q) for q in checkpoints]
    if checkpoints != sorted(checkpoints):
        raise InvalidArgumentError("checkpoints must be sorted ascending")
    pair = ImagePair(render_photo(corpus, opt_identity, opt_photos[0]),
                     render_photo(corpus, opt_identity, opt_photos[1]))
    selection = PairSelection.excluding_pair(opt_identity, *opt_photos)
    per_run = []
    for r in range(n_runs):
        cfg = replace(base_config, seed=derive_seed(base_config.seed, f"curve/{r}"))
        oracle = oracle_factory()
        result = run_greedy(cfg, pair, placement, oracle, checkpoint_queries=checkpoints)
        run_asr = {}
        for q in checkpoints:
            snap = result.checkpoints.get(q)
            if snap is None and q > 0:
                run_asr[q] = None  # unreached
                continue
            if snap is None:
                snap = zero_patch(placement.width, placement.height,
                                  base_config.channels, base_config.symmetric)
            report = attack_success_rate(corpus, snap, placement, oracle,
                                         threshold, selection)
            run_asr[q] = report.asr
        per_run.append(run_asr)
    curve = []
    for q in checkpoints:
        vals = [run[q] for run in per_run if run[q] is not None]
        curve.append({"queries": q,
                      "mean_asr": float(np.mean(vals)) if vals else None,
                      "runs": [run[q] for run in per_run]})
    return {"schema_version": REPORT_SCHEMA_VERSION, "n_runs": n_runs,
            "checkpoints": curve}


def curve_to_csv(curve_report: dict) -> str:
    n_runs = curve_report["n_runs"]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["queries", "mean_asr"] + [f"run{i + 1}" for i in range(n_runs)])
    for point in curve_report["checkpoints"]:
        fmt = lambda v: "" if v is None else repr(v)
        writer.writerow([point["queries"], fmt(point["mean_asr"])]
                        + [fmt(v) for v in point["runs"]])
    return buf.getvalue()
