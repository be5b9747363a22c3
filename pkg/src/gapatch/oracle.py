"""The black-box similarity contract, the local toy oracle, and threshold
calibration.

The attacker's only capability is submitting two images and receiving one
cosine similarity score; every score costs exactly one ledger query. The toy
oracle is a deterministic stand-in for a real face-embedding model: grayscale
-> 16x16 average pool -> fixed random projection to 64 dims -> L2 normalize.
"""

import threading
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateEmbeddingError, InvalidArgumentError
from .patch import IMAGE_SIZE

# Fixed so an external reimplementation can reproduce embeddings bit-for-bit.
TOY_PROJECTION_SEED = 868686
EMBED_DIM = 64
POOL_SIZE = 16

_projection_matrix = None


def toy_projection() -> np.ndarray:
    """The shared 64x256 projection matrix (cached)."""
    global _projection_matrix
    if _projection_matrix is None:
        rng = np.random.default_rng(TOY_PROJECTION_SEED)
        _projection_matrix = rng.standard_normal((EMBED_DIM, POOL_SIZE * POOL_SIZE))
    return _projection_matrix


def toy_embed(image: np.ndarray) -> np.ndarray:
    """Deterministic 64-d unit embedding of a 112x112 image."""
    if image.shape[:2] != (IMAGE_SIZE, IMAGE_SIZE):
        raise InvalidArgumentError(f"expected {IMAGE_SIZE}x{IMAGE_SIZE} image, "
                                   f"got shape {image.shape}")
    gray = image if image.ndim == 2 else image.mean(axis=2)
    block = IMAGE_SIZE // POOL_SIZE
    pooled = gray.reshape(POOL_SIZE, block, POOL_SIZE, block).mean(axis=(1, 3))
    raw = toy_projection() @ pooled.ravel()
    norm = np.linalg.norm(raw)
    if norm == 0.0:
        raise DegenerateEmbeddingError("projected feature vector is all-zero")
    return raw / norm


def cosine(e1: np.ndarray, e2: np.ndarray) -> float:
    """Dot product of unit embeddings, clipped into [-1, 1] for float noise."""
    return float(np.clip(np.dot(e1, e2), -1.0, 1.0))


@dataclass
class QueryLedger:
    """Exact count of similarity evaluations, split by phase.

    Monotone; never reset implicitly. cache_hits counts embeddings served
    from the clean-image cache; the cache-adjusted count discounts each hit
    as half a query (a query embeds two images).
    """

    total_queries: int = 0
    per_phase: dict = field(default_factory=dict)
    cache_hits: int = 0
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def record(self, n: int, phase: str) -> None:
        with self._lock:
            self.total_queries += n
            self.per_phase[phase] = self.per_phase.get(phase, 0) + n

    def record_cache_hit(self, n: int = 1) -> None:
        with self._lock:
            self.cache_hits += n

    @property
    def cache_adjusted_queries(self) -> float:
        return self.total_queries - 0.5 * self.cache_hits

    def phase_count(self, phase: str) -> int:
        return self.per_phase.get(phase, 0)

    def snapshot(self) -> dict:
        with self._lock:
            return {
                "total_queries": self.total_queries,
                "per_phase": dict(self.per_phase),
                "cache_hits": self.cache_hits,
                "cache_adjusted_queries": self.cache_adjusted_queries,
            }


class SimilarityOracle:
    """Behavioral contract: two images in, one score in [-1, 1] out.

    Subclasses implement _score(). Thread-safe; the phase label only
    affects ledger bookkeeping.
    """

    def __init__(self):
        self.ledger = QueryLedger()
        self.phase = "evaluation"

    def set_phase(self, phase: str) -> None:
        self.phase = phase

    def similarity(self, image_a: np.ndarray, image_b: np.ndarray) -> float:
        score = self._score(image_a, image_b)
        self.ledger.record(1, self.phase)
        return score

    def similarity_batch(self, pairs) -> list[float]:
        scores = [self._score(a, b) for a, b in pairs]
        self.ledger.record(len(scores), self.phase)
        return scores

    def queries_used(self) -> int:
        return self.ledger.total_queries

    def _score(self, image_a, image_b) -> float:
        raise NotImplementedError


class ToyOracle(SimilarityOracle):
    """In-process deterministic oracle over the toy embedder.

    With cache_clean_embeddings on, embeddings are memoized by image bytes;
    the ledger still counts every similarity call (strict two-image query
    model) and records cache hits separately.
    """

    def __init__(self, cache_clean_embeddings: bool = False):
        super().__init__()
        self.cache_clean_embeddings = cache_clean_embeddings
        self._cache = {}
        self._cache_lock = threading.Lock()

    def _embed(self, image: np.ndarray) -> np.ndarray:
        if not self.cache_clean_embeddings:
            return toy_embed(image)
        key = image.tobytes()
        with self._cache_lock:
            hit = self._cache.get(key)
        if hit is not None:
            self.ledger.record_cache_hit()
            return hit
        emb = toy_embed(image)
        with self._cache_lock:
            self._cache[key] = emb
        return emb

    def _score(self, image_a, image_b) -> float:
        return cosine(self._embed(image_a), self._embed(image_b))


@dataclass(frozen=True)
class VerificationThreshold:
    """Calibrated accept/reject cutoff plus the settings that produced it."""

    threshold: float
    target_far: float
    n_impostor_pairs: int
    seed: int

    def to_dict(self) -> dict:
        return {"threshold": self.threshold, "target_far": self.target_far,
                "n_impostor_pairs": self.n_impostor_pairs, "seed": self.seed}


def sample_impostor_similarities(corpus, oracle: SimilarityOracle,
                                 n_pairs: int, seed: int) -> np.ndarray:
    """Similarities of n random cross-identity photo pairs."""
    from .corpus import render_photo
    from .seeding import derive_rng
    if corpus.n_identities < 2:
        raise InvalidArgumentError("impostor sampling needs >= 2 identities")
    rng = derive_rng(seed, "impostor-pairs")
    sims = np.empty(n_pairs)
    for k in range(n_pairs):
        i, j = rng.choice(corpus.n_identities, size=2, replace=False)
        pi = int(rng.integers(corpus.photos_per_identity))
        pj = int(rng.integers(corpus.photos_per_identity))
        sims[k] = oracle.similarity(render_photo(corpus, int(i), pi),
                                    render_photo(corpus, int(j), pj))
    return sims


def calibrate_threshold(corpus, oracle: SimilarityOracle, target_far: float = 1e-3,
                        n_impostor_pairs: int = 2000, seed: int = 0) -> VerificationThreshold:
    """Threshold = the (1 - target_far)-quantile of impostor similarities.

    Quantile is the order statistic at index min(n - 1, floor((1 - far) * n))
    of the ascending sort, so target_far = 0 picks the maximum.
    """
    if n_impostor_pairs < 100:
        raise InvalidArgumentError("need at least 100 impostor pairs")
    if not (0.0 <= target_far <= 1.0):
        raise InvalidArgumentError("target_far must be in [0, 1]")
    sims = np.sort(sample_impostor_similarities(corpus, oracle, n_impostor_pairs, seed))
    idx = min(n_impostor_pairs - 1, int(np.floor((1.0 - target_far) * n_impostor_pairs)))
    return VerificationThreshold(float(sims[idx]), target_far, n_impostor_pairs, seed)
