"""Patch serialization: canonical JSON plus a lossy 8-bit PNG export."""

import json
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

from .errors import InvalidArgumentError
from .patch import Patch, Placement

FORMAT_VERSION = 1


def patch_to_json(patch: Patch, placement: Placement) -> str:
    """Canonical JSON document for a patch (full float precision)."""
    doc = {
        "format_version": FORMAT_VERSION,
        "width": patch.width,
        "height": patch.height,
        "channels": patch.channels,
        "symmetric": patch.symmetric,
        "placement": {"top": placement.top, "left": placement.left},
        "values": patch.values.ravel().tolist(),
    }
    return json.dumps(doc)


def patch_from_json(text: str) -> tuple[Patch, Placement]:
    doc = json.loads(text)
    if doc.get("format_version") != FORMAT_VERSION:
        raise InvalidArgumentError(f"unsupported format_version {doc.get('format_version')}")
    w, h, ch = doc["width"], doc["height"], doc["channels"]
    values = np.asarray(doc["values"], dtype=np.float64)
    shape = (h, w) if ch == 1 else (h, w, 3)
    if values.size != np.prod(shape):
        raise InvalidArgumentError("values length does not match dimensions")
    patch = Patch(values.reshape(shape), symmetric=doc["symmetric"])
    patch.validate()
    placement = Placement(top=doc["placement"]["top"], left=doc["placement"]["left"],
                          width=w, height=h)
    return patch, placement


def save_patch(path, patch: Patch, placement: Placement) -> None:
    Path(path).write_text(patch_to_json(patch, placement))


def load_patch(path) -> tuple[Patch, Placement]:
    return patch_from_json(Path(path).read_text())


def patch_to_png(path, patch: Patch) -> None:
    """8-bit export, p -> round(255 * (p + 1) / 2). Lossy; JSON is canonical."""
    scaled = np.round(255.0 * (patch.values + 1.0) / 2.0).astype(np.uint8)
    mode = "L" if patch.channels == 1 else "RGB"
    PILImage.fromarray(scaled, mode=mode).save(path)
