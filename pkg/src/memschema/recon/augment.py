"""Geometric training-set augmentation: mirrors, quarters, mirrored quarters.

Each source image expands to exactly 10 variants.  The same transform is
applied to the image and to its target map, so spatial correspondence is
preserved; rotation and color changes are deliberately excluded because
annotated schema structure does not survive them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import TrainingError
from ..maps import MapGrid, RECON_GRID, resize_map

QUADRANTS = ("tl", "tr", "bl", "br")


@dataclass(frozen=True)
class Transform:
    kind: str  # identity | mirror | quarter | quarter-mirror
    quadrant: str | None = None

    @property
    def name(self) -> str:
        if self.kind == "identity":
            return "identity"
        if self.kind == "mirror":
            return "mirror"
        prefix = "q" if self.kind == "quarter" else "qm"
        return f"{prefix}-{self.quadrant}"

    def apply(self, array: np.ndarray) -> np.ndarray:
        """Apply to an (H, W) map or (H, W, C) image."""
        a = np.asarray(array)
        if self.kind == "identity":
            return a.copy()
        if self.kind == "mirror":
            return a[:, ::-1].copy()
        if self.kind not in ("quarter", "quarter-mirror"):
            raise TrainingError(f"unknown transform kind {self.kind!r}")
        if self.quadrant not in QUADRANTS:
            raise TrainingError(f"unknown quadrant {self.quadrant!r}")
        h, w = a.shape[:2]
        h2, w2 = h // 2, w // 2
        rows = slice(0, h2) if self.quadrant in ("tl", "tr") else slice(h2, h)
        cols = slice(0, w2) if self.quadrant in ("tl", "bl") else slice(w2, w)
        out = a[rows, cols]
        if self.kind == "quarter-mirror":
            out = out[:, ::-1]
        return out.copy()


ALL_TRANSFORMS: tuple[Transform, ...] = (
    (Transform("identity"), Transform("mirror"))
    + tuple(Transform("quarter", q) for q in QUADRANTS)
    + tuple(Transform("quarter-mirror", q) for q in QUADRANTS)
)


def augment_plan(image_ids: list[str]) -> list[tuple[str, Transform]]:
    """10 variants per source image, in a fixed order."""
    if not image_ids:
        raise TrainingError("augment plan needs at least one image id")
    return [(image_id, t) for image_id in image_ids for t in ALL_TRANSFORMS]


def variant_id(image_id: str, transform: Transform) -> str:
    return f"{image_id}__{transform.name}"


def transform_target(vms: MapGrid, transform: Transform, out_dims=RECON_GRID) -> MapGrid:
    """Apply the geometric op to a ground-truth map, then resize for training."""
    moved = MapGrid(transform.apply(vms.values), copy=False)
    return resize_map(moved, out_dims)
