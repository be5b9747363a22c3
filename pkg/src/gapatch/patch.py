"""Patch and Gaussian-blob primitives.

A patch is a rectangular grayscale (or, for the color ablation, RGB) field of
intensities in [-1, 1]. It is grown by adding elliptical Gaussian blobs and is
overlaid opaquely on a face image, mapping patch value p to pixel (p + 1) / 2.
All operations are pure: inputs are never mutated.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError

IMAGE_SIZE = 112

# Default forehead band on the 112x112 aligned face.
DEFAULT_PATCH_WIDTH = 72
DEFAULT_PATCH_HEIGHT = 28
DEFAULT_PLACEMENT_TOP = 8
DEFAULT_PLACEMENT_LEFT = 20


@dataclass(frozen=True)
class GaussianBlob:
    """One candidate perturbation: an elliptical Gaussian bump.

    amplitude is a scalar for grayscale patches or a length-3 tuple for the
    color-ablation mode. center_* are continuous patch-local pixel
    coordinates, sigma_* are per-axis spreads in pixels, theta is the
    ellipse rotation in radians (period pi).
    """

    amplitude: float | tuple[float, float, float]
    center_x: float
    center_y: float
    sigma_x: float
    sigma_y: float
    theta: float

    @property
    def channels(self) -> int:
        return 1 if np.isscalar(self.amplitude) else 3

    def validate(self, width: int, height: int,
                 a_max: float = 1.0, sigma_min: float = 1.0) -> None:
        amp = np.asarray(self.amplitude, dtype=float)
        if np.any(np.abs(amp) > a_max):
            raise InvalidArgumentError(f"|amplitude| exceeds {a_max}: {self.amplitude}")
        if self.sigma_x < sigma_min or self.sigma_y < sigma_min:
            raise InvalidArgumentError(
                f"sigma below minimum {sigma_min}: ({self.sigma_x}, {self.sigma_y})")
        margin = 2.0 * max(self.sigma_x, self.sigma_y)
        if not (-margin <= self.center_x <= width - 1 + margin
                and -margin <= self.center_y <= height - 1 + margin):
            raise InvalidArgumentError(
                f"blob center ({self.center_x}, {self.center_y}) too far outside "
                f"the {width}x{height} patch")


@dataclass(frozen=True)
class Placement:
    """Fixed position of the patch rectangle in image coordinates."""

    top: int
    left: int
    width: int = DEFAULT_PATCH_WIDTH
    height: int = DEFAULT_PATCH_HEIGHT

    def validate(self, image_size: int = IMAGE_SIZE) -> None:
        if self.width <= 0 or self.height <= 0:
            raise InvalidArgumentError("placement dimensions must be positive")
        if (self.top < 0 or self.left < 0
                or self.top + self.height > image_size
                or self.left + self.width > image_size):
            raise InvalidArgumentError(
                f"placement {self} does not fit in a {image_size}x{image_size} image")


def default_placement() -> Placement:
    return Placement(top=DEFAULT_PLACEMENT_TOP, left=DEFAULT_PLACEMENT_LEFT,
                     width=DEFAULT_PATCH_WIDTH, height=DEFAULT_PATCH_HEIGHT)


@dataclass(frozen=True)
class Patch:
    """A patch field in [-1, 1], optionally bilaterally symmetric.

    values has shape (height, width) for grayscale or (height, width, 3)
    for the color ablation.
    """

    values: np.ndarray
    symmetric: bool = True

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.float64))

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def channels(self) -> int:
        return 1 if self.values.ndim == 2 else self.values.shape[2]

    def validate(self) -> None:
        if self.values.ndim not in (2, 3) or (self.values.ndim == 3 and self.values.shape[2] != 3):
            raise InvalidArgumentError(f"bad patch shape {self.values.shape}")
        if np.any(self.values < -1.0) or np.any(self.values > 1.0):
            raise InvalidArgumentError("patch values outside [-1, 1]")
        if self.symmetric:
            if self.width % 2 != 0:
                raise InvalidArgumentError("symmetric patch width must be even")
            if not np.array_equal(self.values, self.values[:, ::-1]):
                raise InvalidArgumentError("patch marked symmetric is not mirror-equal")


def zero_patch(width: int = DEFAULT_PATCH_WIDTH, height: int = DEFAULT_PATCH_HEIGHT,
               channels: int = 1, symmetric: bool = True) -> Patch:
    """The blank starting patch (renders as a mid-gray rectangle)."""
    if width <= 0 or height <= 0:
        raise InvalidArgumentError("patch dimensions must be positive")
    if symmetric and width % 2 != 0:
        raise InvalidArgumentError("symmetric patch width must be even")
    shape = (height, width) if channels == 1 else (height, width, 3)
    return Patch(np.zeros(shape), symmetric=symmetric)


def render_blob(blob: GaussianBlob, width: int, height: int) -> np.ndarray:
    """Rasterize a blob to a (height, width[, 3]) field of intensity deltas.

    f(x, y) = a * exp(-(u^2 / (2 sx^2) + v^2 / (2 sy^2))) where (u, v) is
    (x - cx, y - cy) rotated by -theta. Vectorized over the pixel grid.
    """
    if width <= 0 or height <= 0:
        raise InvalidArgumentError("render dimensions must be positive")
    if blob.sigma_x <= 0 or blob.sigma_y <= 0:
        raise InvalidArgumentError("blob sigma must be positive")
    ys, xs = np.mgrid[0:height, 0:width].astype(np.float64)
    dx = xs - blob.center_x
    dy = ys - blob.center_y
    c, s = np.cos(blob.theta), np.sin(blob.theta)
    u = c * dx + s * dy
    v = -s * dx + c * dy
    envelope = np.exp(-(u ** 2 / (2.0 * blob.sigma_x ** 2)
                        + v ** 2 / (2.0 * blob.sigma_y ** 2)))
    if blob.channels == 1:
        return float(blob.amplitude) * envelope
    amp = np.asarray(blob.amplitude, dtype=np.float64)
    return envelope[:, :, None] * amp[None, None, :]


def enforce_symmetry(patch: Patch) -> Patch:
    """Mirror the left half onto the right half. Idempotent."""
    if patch.width % 2 != 0:
        raise InvalidArgumentError("symmetry requires an even patch width")
    half = patch.width // 2
    values = patch.values.copy()
    values[:, half:] = values[:, :half][:, ::-1]
    return Patch(values, symmetric=True)


def add_blob(patch: Patch, blob: GaussianBlob) -> Patch:
    """Clamped candidate patch = clamp(patch + rendered blob, -1, 1).

    In symmetric mode the blob must live in the left half; the updated left
    half is mirrored so the result stays symmetric.
    """
    if blob.channels != patch.channels:
        raise InvalidArgumentError(
            f"blob has {blob.channels} channel(s), patch has {patch.channels}")
    if patch.symmetric and blob.center_x >= patch.width / 2:
        raise InvalidArgumentError(
            f"blob center_x={blob.center_x} lies in the mirrored half "
            f"of a symmetric width-{patch.width} patch")
    field = render_blob(blob, patch.width, patch.height)
    summed = np.clip(patch.values + field, -1.0, 1.0)
    candidate = Patch(summed, symmetric=patch.symmetric)
    if patch.symmetric:
        candidate = enforce_symmetry(candidate)
    return candidate


def apply_patch(image: np.ndarray, patch: Patch, placement: Placement) -> np.ndarray:
    """Opaquely overlay the patch: inside the rect, pixel = (p + 1) / 2.

    Pixels outside the placement rectangle are bit-identical to the input.
    A grayscale patch is replicated across a color image's channels; a color
    patch on a grayscale image promotes the image to three equal channels.
    """
    if placement.width != patch.width or placement.height != patch.height:
        raise InvalidArgumentError(
            f"placement {placement.width}x{placement.height} does not match "
            f"patch {patch.width}x{patch.height}")
    placement.validate(image.shape[0])
    if patch.channels == 3 and image.ndim == 2:
        image = np.repeat(image[:, :, None], 3, axis=2)
    out = image.copy()
    pixels = (patch.values + 1.0) / 2.0
    r0, c0 = placement.top, placement.left
    region = (slice(r0, r0 + patch.height), slice(c0, c0 + patch.width))
    if image.ndim == 3 and patch.channels == 1:
        out[region] = pixels[:, :, None]
    else:
        out[region] = pixels
    return out


@dataclass(frozen=True)
class RegionMask:
    """Per-cell keep/drop flags over the patch grid (True = keep)."""

    keep: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "keep", np.asarray(self.keep, dtype=bool))


def keep_all_mask(width: int, height: int) -> RegionMask:
    return RegionMask(np.ones((height, width), dtype=bool))


def drop_all_mask(width: int, height: int) -> RegionMask:
    return RegionMask(np.zeros((height, width), dtype=bool))


def trim_top_mask(width: int, height: int, k: int) -> RegionMask:
    """Drop the top k rows (shrink toward the hairline)."""
    keep = np.ones((height, width), dtype=bool)
    keep[:k, :] = False
    return RegionMask(keep)


def trim_bottom_mask(width: int, height: int, k: int) -> RegionMask:
    """Drop the bottom k rows (shrink toward the eyebrows)."""
    keep = np.ones((height, width), dtype=bool)
    if k > 0:
        keep[height - k:, :] = False
    return RegionMask(keep)


def central_band_mask(width: int, height: int, band_height: int) -> RegionMask:
    """Keep only a centered horizontal band of the given height."""
    keep = np.zeros((height, width), dtype=bool)
    top = (height - band_height) // 2
    keep[top:top + band_height, :] = True
    return RegionMask(keep)


def mask_patch(patch: Patch, mask: RegionMask) -> Patch:
    """Zero out dropped cells (they render as the mid-gray occluder)."""
    if mask.keep.shape != (patch.height, patch.width):
        raise InvalidArgumentError(
            f"mask shape {mask.keep.shape} does not match patch "
            f"{patch.height}x{patch.width}")
    values = patch.values.copy()
    if patch.channels == 1:
        values[~mask.keep] = 0.0
    else:
        values[~mask.keep, :] = 0.0
    symmetric = patch.symmetric and bool(np.array_equal(mask.keep, mask.keep[:, ::-1]))
    return Patch(values, symmetric=symmetric)


@dataclass(frozen=True)
class SamplerConfig:
    """Ranges for random blob generation.

    Sigmas are drawn log-uniformly so samples span fine texture and broad
    shading; amplitude is uniform in [-a_max, a_max]; theta uniform in
    [0, pi); centers uniform over the patch rect (left half only when the
    patch is symmetric).
    """

    a_max: float = 1.0
    sigma_lo: float = 1.5
    sigma_hi: float = 12.0
    sigma_min: float = 1.0

    def validate(self) -> None:
        if self.sigma_min <= 0:
            raise InvalidArgumentError("sigma_min must be positive")
        if self.sigma_lo > self.sigma_hi:
            raise InvalidArgumentError("sigma_lo must not exceed sigma_hi")
        if self.sigma_lo < self.sigma_min:
            raise InvalidArgumentError("sigma_lo below sigma_min")
        if self.a_max <= 0:
            raise InvalidArgumentError("a_max must be positive")


def sample_blob(rng: np.random.Generator, config: SamplerConfig,
                width: int, height: int, symmetric: bool = True,
                channels: int = 1) -> GaussianBlob:
    """Draw one random blob. Deterministic given the rng state."""
    config.validate()
    if channels == 1:
        amplitude = float(rng.uniform(-config.a_max, config.a_max))
    else:
        amplitude = tuple(rng.uniform(-config.a_max, config.a_max, size=3))
    x_hi = width / 2 if symmetric else width
    center_x = float(rng.uniform(0, x_hi))
    center_y = float(rng.uniform(0, height))
    log_lo, log_hi = np.log(config.sigma_lo), np.log(config.sigma_hi)
    sigma_x = float(np.exp(rng.uniform(log_lo, log_hi)))
    sigma_y = float(np.exp(rng.uniform(log_lo, log_hi)))
    theta = float(rng.uniform(0, np.pi))
    blob = GaussianBlob(amplitude, center_x, center_y, sigma_x, sigma_y, theta)
    blob.validate(width, height, a_max=config.a_max, sigma_min=config.sigma_min)
    return blob
