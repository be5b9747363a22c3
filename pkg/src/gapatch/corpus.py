"""Deterministic synthetic face-like corpus and baseline patches.

Stands in for a real verification dataset at desk scale: each identity is a
smooth 112x112 intensity field (sum of broad seeded Gaussians plus
low-frequency structure), and each photo is the identity field under small
seeded jitter. Everything is a pure function of the corpus seed.
"""

import json
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

from .errors import InvalidArgumentError, NotFoundError
from .patch import (IMAGE_SIZE, GaussianBlob, Patch, Placement, render_blob,
                    zero_patch)
from .seeding import derive_rng

N_BASE_BLOBS = 8
LOWFREQ_GRID = 7  # 112 / 7 = 16-pixel low-frequency cells
CONTRAST_GAIN = 9.0


@dataclass(frozen=True)
class PhotoParams:
    """Per-photo jitter: brightness shift, additive noise, small translation."""

    brightness_delta: float = 0.05
    noise_scale: float = 0.02
    max_shift: int = 2

    def validate(self) -> None:
        if self.brightness_delta < 0 or self.noise_scale < 0:
            raise InvalidArgumentError("jitter magnitudes must be non-negative")
        if not (0 <= self.max_shift <= 2):
            raise InvalidArgumentError("max_shift must be in [0, 2]")


@dataclass(frozen=True)
class IdentityTemplate:
    identity_id: int
    base_field: np.ndarray  # 112x112, values in [0, 1]


@dataclass(frozen=True)
class Corpus:
    corpus_seed: int
    identities: tuple
    photos_per_identity: int
    photo_params: PhotoParams

    @property
    def n_identities(self) -> int:
        return len(self.identities)


def _identity_field(corpus_seed: int, identity_id: int) -> np.ndarray:
    rng = derive_rng(corpus_seed, f"identity/{identity_id}")
    field = np.zeros((IMAGE_SIZE, IMAGE_SIZE))
    for _ in range(N_BASE_BLOBS):
        blob = GaussianBlob(
            amplitude=float(rng.uniform(-1.0, 1.0)),
            center_x=float(rng.uniform(0, IMAGE_SIZE)),
            center_y=float(rng.uniform(0, IMAGE_SIZE)),
            sigma_x=float(rng.uniform(10.0, 45.0)),
            sigma_y=float(rng.uniform(10.0, 45.0)),
            theta=float(rng.uniform(0, np.pi)),
        )
        field += render_blob(blob, IMAGE_SIZE, IMAGE_SIZE)
    # Low-frequency texture: a coarse grid blown up to full resolution.
    coarse = rng.uniform(-0.5, 0.5, size=(LOWFREQ_GRID, LOWFREQ_GRID))
    field += np.kron(coarse, np.ones((IMAGE_SIZE // LOWFREQ_GRID,
                                      IMAGE_SIZE // LOWFREQ_GRID)))
    # Normalize then push toward a bimodal high-contrast range; without this
    # the shared mid-gray mean dominates pooled features and impostor
    # similarities crowd the genuine ones.
    lo, hi = field.min(), field.max()
    unit = (field - lo) / (hi - lo)
    sharp = 1.0 / (1.0 + np.exp(-CONTRAST_GAIN * (unit - 0.5)))
    return 0.05 + 0.9 * sharp


def build_corpus(corpus_seed: int, n_identities: int = 20,
                 photos_per_identity: int = 4,
                 photo_params: PhotoParams = PhotoParams()) -> Corpus:
    """Deterministically generate the synthetic corpus."""
    if n_identities < 2:
        raise InvalidArgumentError("need at least 2 identities")
    if photos_per_identity < 2:
        raise InvalidArgumentError("need at least 2 photos per identity")
    photo_params.validate()
    identities = tuple(
        IdentityTemplate(i, _identity_field(corpus_seed, i))
        for i in range(n_identities)
    )
    return Corpus(corpus_seed, identities, photos_per_identity, photo_params)


def render_photo(corpus: Corpus, identity_id: int, photo_index: int) -> np.ndarray:
    """One jittered photo of an identity; bit-reproducible per (seed, id, index)."""
    if not (0 <= identity_id < corpus.n_identities):
        raise NotFoundError(f"identity {identity_id} not in corpus")
    if not (0 <= photo_index < corpus.photos_per_identity):
        raise NotFoundError(f"photo index {photo_index} out of range")
    rng = derive_rng(corpus.corpus_seed, f"photo/{identity_id}/{photo_index}")
    params = corpus.photo_params
    img = corpus.identities[identity_id].base_field.copy()
    if params.max_shift > 0:
        dy, dx = rng.integers(-params.max_shift, params.max_shift + 1, size=2)
        img = np.roll(img, (int(dy), int(dx)), axis=(0, 1))
    if params.brightness_delta > 0:
        img = img + rng.uniform(-params.brightness_delta, params.brightness_delta)
    if params.noise_scale > 0:
        img = img + rng.normal(0.0, params.noise_scale, size=img.shape)
    # Snap to the 8-bit grid so the PNG export carries identical pixels and
    # remote oracles score exactly what the in-process oracle scores.
    return np.round(np.clip(img, 0.0, 1.0) * 255.0) / 255.0


def genuine_pairs(corpus: Corpus):
    """All ordered (identity, photo_i, photo_j) pairs with i != j."""
    for ident in range(corpus.n_identities):
        for i in range(corpus.photos_per_identity):
            for j in range(corpus.photos_per_identity):
                if i != j:
                    yield ident, i, j


# ---------------------------------------------------------------------------
# Baseline patches


def gray_rectangle_patch(width: int, height: int) -> Patch:
    """All-zero patch; a plain mid-gray occluder under the opaque overlay."""
    return zero_patch(width, height, channels=1, symmetric=True)


def noise_patch(rng: np.random.Generator, width: int, height: int) -> Patch:
    """I.i.d. uniform noise in [-1, 1]; deliberately non-symmetric."""
    if width <= 0 or height <= 0:
        raise InvalidArgumentError("patch dimensions must be positive")
    return Patch(rng.uniform(-1.0, 1.0, size=(height, width)), symmetric=False)


def forehead_graft_patch(donor: np.ndarray, placement: Placement) -> Patch:
    """Lift the donor's own placement region into a patch.

    Inverse of the overlay mapping, so applying the graft back onto the
    (grayscaled) donor restores the region exactly.
    """
    placement.validate(donor.shape[0])
    gray = donor if donor.ndim == 2 else donor.mean(axis=2)
    region = gray[placement.top:placement.top + placement.height,
                  placement.left:placement.left + placement.width]
    return Patch(2.0 * region - 1.0, symmetric=False)


# ---------------------------------------------------------------------------
# Corpus export (PNG directory + manifest) for external oracles


def export_corpus(corpus: Corpus, out_dir) -> Path:
    """Write id{I}_photo{J}.png files plus a manifest recording the config."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for ident in range(corpus.n_identities):
        for j in range(corpus.photos_per_identity):
            img = render_photo(corpus, ident, j)
            arr = np.round(img * 255.0).astype(np.uint8)
            PILImage.fromarray(arr, mode="L").save(out / f"id{ident}_photo{j}.png")
    manifest = {
        "corpus_seed": corpus.corpus_seed,
        "n_identities": corpus.n_identities,
        "photos_per_identity": corpus.photos_per_identity,
        "photo_params": asdict(corpus.photo_params),
        "image_size": IMAGE_SIZE,
    }
    manifest_path = out / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2))
    return manifest_path
