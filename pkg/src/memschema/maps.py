"""Schema map construction: rasterized selections, accumulation, resizing.

A schema map for an image is the per-cell fraction of contributing
participants who selected that cell.  Within one participant overlapping
rectangles are unioned first, so every participant contributes a binary
mask and the accumulated map is a probability in [0,1] per cell.
"""

from __future__ import annotations

import enum

import numpy as np

from .errors import DegenerateMapError, EmptyVmsError, MemschemaError
from .session import ROLE_FILLER, ROLE_REPEAT, RectSelection, SessionLog

ANALYSIS_GRID = (100, 100)
RECON_GRID = (20, 20)
DEFAULT_THRESHOLD = 40


class VmsKind(enum.Enum):
    TRUE = "true"
    FALSE = "false"
    COMBINED = "combined"

    @property
    def roles(self) -> tuple[str, ...]:
        if self is VmsKind.TRUE:
            return (ROLE_REPEAT,)
        if self is VmsKind.FALSE:
            return (ROLE_FILLER,)
        return (ROLE_REPEAT, ROLE_FILLER)


class MapGrid:
    """A nonnegative 2D grid; dims are (width, height), storage row-major."""

    def __init__(self, values: np.ndarray, copy: bool = True):
        arr = np.array(values, dtype=np.float64, copy=copy)
        if arr.ndim != 2 or arr.size == 0:
            raise MemschemaError(f"map must be a non-empty 2D grid, got shape {arr.shape}")
        if not np.isfinite(arr).all():
            raise MemschemaError("map contains non-finite values")
        if (arr < 0).any():
            raise MemschemaError("map contains negative values")
        self.values = arr

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def dims(self) -> tuple[int, int]:
        return (self.width, self.height)

    @property
    def n(self) -> int:
        return self.values.size

    def mean(self) -> float:
        return float(self.values.mean())

    def std(self) -> float:
        # Population convention: divide by n, not n-1.
        return float(self.values.std())

    def __eq__(self, other) -> bool:
        return isinstance(other, MapGrid) and np.array_equal(self.values, other.values)


def as_values(m) -> np.ndarray:
    """Accept a MapGrid or a bare 2D array and return float64 values."""
    if isinstance(m, MapGrid):
        return m.values
    arr = np.asarray(m, dtype=np.float64)
    if arr.ndim != 2:
        raise MemschemaError(f"expected a 2D map, got shape {arr.shape}")
    return arr


def rasterize_selections(
    selections: tuple[RectSelection, ...] | list[RectSelection], grid: tuple[int, int]
) -> MapGrid:
    """Union mask of the given rectangles on a (width, height) cell grid.

    A cell belongs to a rectangle when its center lies inside it
    (closed bounds).  A rectangle that captures no cell center at this
    resolution is rejected as degenerate.
    """
    width, height = grid
    if width <= 0 or height <= 0:
        raise MemschemaError(f"grid dims must be positive, got {grid}")
    if not selections:
        raise MemschemaError("need at least one selection to rasterize")
    mask = np.zeros((height, width), dtype=np.float64)
    xs = (np.arange(width) + 0.5) / width
    ys = (np.arange(height) + 0.5) / height
    for sel in selections:
        sel.validate()
        cols = (xs >= sel.x0) & (xs <= sel.x1)
        rows = (ys >= sel.y0) & (ys <= sel.y1)
        if not cols.any() or not rows.any():
            raise DegenerateMapError(
                f"degenerate selection ({sel.x0},{sel.y0},{sel.x1},{sel.y1}) "
                f"covers no cell on a {width}x{height} grid"
            )
        mask[np.ix_(rows, cols)] = 1.0
    return MapGrid(mask, copy=False)


class SelectionIndex:
    """Per-image lookup of annotating trials, with cached participant masks.

    Reuse one index when building many maps from the same logs (split-half
    consistency alone needs thousands of builds).
    """

    def __init__(self, logs: list[SessionLog]):
        self._trials: dict[str, list[tuple[str, str, int, tuple[RectSelection, ...]]]] = {}
        seen = set()
        for log in logs:
            if log.participant_id in seen:
                raise MemschemaError(f"duplicate participant id {log.participant_id!r} in logs")
            seen.add(log.participant_id)
            for t in log.test_trials:
                self._trials.setdefault(t.image_id, []).append(
                    (log.participant_id, t.role, t.confidence, t.selections)
                )
        self.participants = sorted(seen)
        self._mask_cache: dict[tuple[str, str, tuple[int, int]], np.ndarray] = {}

    def image_ids(self) -> list[str]:
        return sorted(self._trials)

    def build(
        self,
        image_id: str,
        kind: VmsKind,
        threshold: int = DEFAULT_THRESHOLD,
        grid: tuple[int, int] = ANALYSIS_GRID,
        participants: set[str] | None = None,
        overlap: str = "union",
    ) -> MapGrid:
        """Accumulate the kind-specific map for one image.

        A participant contributes when their trial has a matching role,
        confidence >= threshold and at least one selection; the map is the
        sum of their union masks divided by the number of contributors.

        ``overlap`` controls how one participant's overlapping rectangles
        combine: "union" (default) keeps the per-participant contribution
        binary, so cell values stay in [0,1]; "sum" counts each rectangle
        separately, so cells under k overlapping rectangles count k times
        and values may exceed 1.
        """
        if not 30 <= threshold <= 100:
            raise MemschemaError(f"threshold must be in [30,100], got {threshold}")
        if overlap not in ("union", "sum"):
            raise MemschemaError(f"overlap must be 'union' or 'sum', got {overlap!r}")
        width, height = grid
        if width <= 0 or height <= 0:
            raise MemschemaError(f"grid dims must be positive, got {grid}")
        roles = kind.roles
        total = np.zeros((height, width), dtype=np.float64)
        contributors = 0
        for pid, role, confidence, selections in self._trials.get(image_id, ()):
            if participants is not None and pid not in participants:
                continue
            if role not in roles or confidence < threshold or not selections:
                continue
            if overlap == "sum":
                for sel in selections:
                    total += rasterize_selections([sel], grid).values
            else:
                key = (pid, image_id, grid)
                mask = self._mask_cache.get(key)
                if mask is None:
                    # bool storage: masks are 0/1 and thousands get cached
                    mask = rasterize_selections(selections, grid).values.astype(bool)
                    self._mask_cache[key] = mask
                total += mask
            contributors += 1
        if contributors == 0:
            raise EmptyVmsError(
                f"empty VMS: no contributing participant for image {image_id!r} ({kind.value})"
            )
        return MapGrid(total / contributors, copy=False)


def build_vms(
    logs: list[SessionLog],
    image_id: str,
    kind: VmsKind,
    threshold: int = DEFAULT_THRESHOLD,
    grid: tuple[int, int] = ANALYSIS_GRID,
    overlap: str = "union",
) -> MapGrid:
    """One-off map build; see SelectionIndex.build for the accumulation rule."""
    return SelectionIndex(logs).build(
        image_id, kind, threshold=threshold, grid=grid, overlap=overlap
    )


def _area_weights(src: int, dst: int) -> np.ndarray:
    """(dst, src) matrix of fractional coverage, rows summing to 1."""
    scale = src / dst
    w = np.zeros((dst, src), dtype=np.float64)
    for i in range(dst):
        lo = i * scale
        hi = (i + 1) * scale
        j0 = int(np.floor(lo))
        j1 = min(int(np.ceil(hi)), src)
        for j in range(j0, j1):
            overlap = min(hi, j + 1) - max(lo, j)
            if overlap > 0:
                w[i, j] = overlap / scale
    return w


def _bilinear_axis(values: np.ndarray, dst: int, axis: int) -> np.ndarray:
    src = values.shape[axis]
    pos = (np.arange(dst) + 0.5) * (src / dst) - 0.5
    pos = np.clip(pos, 0.0, src - 1.0)
    lo = np.floor(pos).astype(int)
    hi = np.minimum(lo + 1, src - 1)
    frac = pos - lo
    a = np.take(values, lo, axis=axis)
    b = np.take(values, hi, axis=axis)
    shape = [1, 1]
    shape[axis] = dst
    frac = frac.reshape(shape)
    return a * (1.0 - frac) + b * frac


def resize_map(grid: MapGrid, new_dims: tuple[int, int]) -> MapGrid:
    """Resample to (width, height): area averaging going down, bilinear up.

    Both schemes are convex combinations of source cells, so the output
    stays within the input's [min, max]; area averaging also preserves
    the global mean.
    """
    width, height = new_dims
    if width <= 0 or height <= 0:
        raise MemschemaError(f"target dims must be positive, got {new_dims}")
    v = grid.values
    if width == grid.width and height == grid.height:
        return MapGrid(v.copy(), copy=False)
    if width <= grid.width and height <= grid.height:
        wy = _area_weights(grid.height, height)
        wx = _area_weights(grid.width, width)
        out = wy @ v @ wx.T
    else:
        out = _bilinear_axis(_bilinear_axis(v, height, axis=0), width, axis=1)
    return MapGrid(out, copy=False)


def to_png16(grid: MapGrid, path) -> None:
    """Export as 16-bit grayscale PNG, values scaled by 65535."""
    from PIL import Image

    v = grid.values
    if v.max() > 1.0:
        raise MemschemaError("PNG export expects values in [0,1]")
    arr = np.round(v * 65535.0).astype(np.uint16)
    Image.fromarray(arr).save(path)
