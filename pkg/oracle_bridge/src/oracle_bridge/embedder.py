"""Embedding backends for the bridge.

The toy backend is a standalone reimplementation of the client side's
reference embedder, pinned to the same projection seed so both sides
produce identical scores: grayscale -> 16x16 average pool -> fixed 64x256
Gaussian projection -> L2 normalize, cosine of the unit vectors.

Real face-embedding models plug in through load_backend("adapter:<module>"),
where the named module exposes `embed(image: np.ndarray) -> np.ndarray`
(112x112 float input in [0, 1], any fixed output dimension) and optionally
`BACKEND_NAME` / `EMBEDDING_DIM`. Weights are an adapter concern; nothing is
vendored here.
"""

import importlib
from dataclasses import dataclass

import numpy as np

IMAGE_SIZE = 112
# Must stay in sync with the client's toy oracle; changing it breaks
# cross-implementation conformance.
TOY_PROJECTION_SEED = 868686
EMBED_DIM = 64
POOL_SIZE = 16

_projection_matrix = None


def _toy_projection() -> np.ndarray:
    global _projection_matrix
    if _projection_matrix is None:
        rng = np.random.default_rng(TOY_PROJECTION_SEED)
        _projection_matrix = rng.standard_normal((EMBED_DIM, POOL_SIZE * POOL_SIZE))
    return _projection_matrix


def toy_embed(image: np.ndarray) -> np.ndarray:
    """64-d unit embedding of a 112x112 float image in [0, 1]."""
    if image.shape[:2] != (IMAGE_SIZE, IMAGE_SIZE):
        raise ValueError(f"expected {IMAGE_SIZE}x{IMAGE_SIZE} image, "
                         f"got shape {image.shape}")
    gray = image if image.ndim == 2 else image.mean(axis=2)
    block = IMAGE_SIZE // POOL_SIZE
    pooled = gray.reshape(POOL_SIZE, block, POOL_SIZE, block).mean(axis=(1, 3))
    raw = _toy_projection() @ pooled.ravel()
    norm = np.linalg.norm(raw)
    if norm == 0.0:
        raise RuntimeError("projected feature vector is all-zero")
    return raw / norm


def cosine(e1: np.ndarray, e2: np.ndarray) -> float:
    return float(np.clip(np.dot(e1, e2), -1.0, 1.0))


@dataclass(frozen=True)
class BackendDescriptor:
    name: str
    embedding_dim: int
    input_size: int = IMAGE_SIZE
    preprocessing: str = "float image in [0, 1], pre-aligned 112x112 crop"


class ToyBackend:
    descriptor = BackendDescriptor(name="toy", embedding_dim=EMBED_DIM)

    def embed(self, image: np.ndarray) -> np.ndarray:
        return toy_embed(image)


class AdapterBackend:
    """Wraps a user module exposing embed(); see module docstring."""

    def __init__(self, module_path: str):
        module = importlib.import_module(module_path)
        if not callable(getattr(module, "embed", None)):
            raise ValueError(f"adapter module {module_path!r} has no embed()")
        self._embed = module.embed
        self.descriptor = BackendDescriptor(
            name=getattr(module, "BACKEND_NAME", module_path),
            embedding_dim=int(getattr(module, "EMBEDDING_DIM", -1)),
        )

    def embed(self, image: np.ndarray) -> np.ndarray:
        emb = np.asarray(self._embed(image), dtype=np.float64)
        norm = np.linalg.norm(emb)
        if emb.ndim != 1 or norm == 0.0:
            raise RuntimeError("adapter returned a degenerate embedding")
        return emb / norm


def load_backend(spec: str):
    """"toy" or "adapter:<module-path>" -> backend instance."""
    if spec == "toy":
        return ToyBackend()
    if spec.startswith("adapter:"):
        return AdapterBackend(spec.split(":", 1)[1])
    raise ValueError(f"unknown backend spec: {spec!r}")
