"""Greedy zero-order patch search.

Starting from a blank patch, each iteration renders a batch of random blob
candidates, scores every candidate with four oracle queries (all ordered
combinations of the two source photos, armed vs clean), greedily moves the
working patch to the batch best, tracks a global best that never regresses,
and periodically restarts the working patch to escape poor local optima.
"""

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError, OracleError
from .oracle import SimilarityOracle
from .patch import (Patch, Placement, SamplerConfig, add_blob, apply_patch,
                    sample_blob, zero_patch)
from .seeding import derive_rng

OPTIMIZATION_PHASE = "optimization"
QUERIES_PER_CANDIDATE = 4  # the loss sums four armed-vs-clean similarities


@dataclass(frozen=True)
class OptimizerConfig:
    n_iters: int = 625
    batch_size: int = 8
    restart_interval: int = 300
    restarts_enabled: bool = True
    symmetric: bool = True
    channels: int = 1
    seed: int = 0
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    cache_clean_embeddings: bool = False
    # Deviation switch for ablation: only move the working patch on
    # improvement instead of always taking the batch best.
    monotone_accept: bool = False

    def validate(self) -> None:
        if self.n_iters < 0:
            raise InvalidArgumentError("n_iters must be >= 0")
        if self.batch_size < 1:
            raise InvalidArgumentError("batch_size must be >= 1")
        if self.restarts_enabled and self.restart_interval < 1:
            raise InvalidArgumentError("restart_interval must be >= 1")
        if self.channels not in (1, 3):
            raise InvalidArgumentError("channels must be 1 or 3")
        self.sampler.validate()

    @property
    def queries_per_iteration(self) -> int:
        return self.batch_size * QUERIES_PER_CANDIDATE

    @property
    def total_queries(self) -> int:
        return self.n_iters * self.queries_per_iteration


@dataclass(frozen=True)
class ImagePair:
    """Two photos of the same identity used as the optimization target."""

    image_a: np.ndarray
    image_b: np.ndarray


@dataclass
class TraceRow:
    iteration: int
    batch_best_loss: float
    global_best_loss: float
    queries: int
    restarted: bool


@dataclass
class OptTrace:
    rows: list = field(default_factory=list)
    aborted: bool = False
    abort_reason: str = ""

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["iteration", "batch_best_loss", "global_best_loss",
                         "queries", "restarted"])
        for row in self.rows:
            writer.writerow([row.iteration, repr(row.batch_best_loss),
                             repr(row.global_best_loss), row.queries,
                             int(row.restarted)])
        return buf.getvalue()


def tie_break(losses) -> int:
    """Lowest index among the minimal losses."""
    if len(losses) == 0:
        raise InvalidArgumentError("empty candidate batch")
    arr = np.asarray(losses, dtype=float)
    return int(np.argmin(arr))  # argmin returns the first minimum


def loss(patch: Patch, pair: ImagePair, placement: Placement,
         oracle: SimilarityOracle) -> float:
    """Sum of the four armed-vs-clean similarities; costs 4 ledger queries."""
    armed_a = apply_patch(pair.image_a, patch, placement)
    armed_b = apply_patch(pair.image_b, patch, placement)
    scores = oracle.similarity_batch([
        (armed_a, pair.image_a),
        (armed_a, pair.image_b),
        (armed_b, pair.image_a),
        (armed_b, pair.image_b),
    ])
    return float(sum(scores))


def multi_pair_loss(patch: Patch, pairs, placement: Placement,
                    oracle: SimilarityOracle) -> float:
    """Loss summed over several identities' pairs (universality extension)."""
    return float(sum(loss(patch, p, placement, oracle) for p in pairs))


@dataclass
class GreedyResult:
    best_patch: Patch
    best_loss: float
    trace: OptTrace
    # Global-best snapshots keyed by query checkpoint; None = unreached.
    checkpoints: dict = field(default_factory=dict)


def run_greedy(config: OptimizerConfig, pair, placement: Placement,
               oracle: SimilarityOracle, checkpoint_queries=()) -> GreedyResult:
    """Run the full greedy search and return the global best patch + trace.

    pair may be a single ImagePair or a list of pairs (the multi-identity
    extension; loss sums over all of them). Deterministic given config.seed.
    On an oracle failure the best-so-far patch and a truncated trace flagged
    aborted are returned instead of raising.
    """
    config.validate()
    pairs = list(pair) if isinstance(pair, (list, tuple)) else [pair]
    queries_per_candidate = QUERIES_PER_CANDIDATE * len(pairs)
    rng = derive_rng(config.seed, "optimizer")
    width, height = placement.width, placement.height

    current = zero_patch(width, height, config.channels, config.symmetric)
    best = current
    best_loss = np.inf
    current_loss = np.inf  # only consulted in monotone_accept mode
    trace = OptTrace()
    checkpoints = {int(q): None for q in checkpoint_queries}
    queries = 0

    def take_snapshots():
        for q in checkpoints:
            if checkpoints[q] is None and q <= queries:
                checkpoints[q] = best

    take_snapshots()  # checkpoint 0 is the blank patch
    oracle.set_phase(OPTIMIZATION_PHASE)
    try:
        for t in range(1, config.n_iters + 1):
            blobs = [sample_blob(rng, config.sampler, width, height,
                                 symmetric=config.symmetric,
                                 channels=config.channels)
                     for _ in range(config.batch_size)]
            candidates = [add_blob(current, b) for b in blobs]
            if len(pairs) == 1:
                losses = [loss(c, pairs[0], placement, oracle) for c in candidates]
            else:
                losses = [multi_pair_loss(c, pairs, placement, oracle)
                          for c in candidates]
            queries += config.batch_size * queries_per_candidate
            idx = tie_break(losses)
            batch_best_loss = losses[idx]

            if config.monotone_accept:
                if batch_best_loss < current_loss:
                    current = candidates[idx]
                    current_loss = batch_best_loss
            else:
                # Faithful greedy move: always take the batch best, even if
                # worse than the previous working patch.
                current = candidates[idx]
                current_loss = batch_best_loss

            if batch_best_loss < best_loss:
                best_loss = batch_best_loss
                best = candidates[idx]

            restarted = False
            if (config.restarts_enabled and t % config.restart_interval == 0
                    and t < config.n_iters):
                current = zero_patch(width, height, config.channels,
                                     config.symmetric)
                current_loss = np.inf
                restarted = True

            trace.rows.append(TraceRow(t, float(batch_best_loss),
                                       float(best_loss), queries, restarted))
            take_snapshots()
    except OracleError as exc:
        trace.aborted = True
        trace.abort_reason = f"{type(exc).__name__}: {exc}"
    finally:
        oracle.set_phase("evaluation")

    return GreedyResult(best, float(best_loss), trace, checkpoints)
