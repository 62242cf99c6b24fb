"""Spatial image descriptors and map-weighted pooling.

Descriptors are grids of per-cell histograms.  Pixel histograms and HoG
are computed natively; externally computed descriptors (e.g. oriented
energy or dense gradient features) are ingested from tensor files with
the same (rows, cols, histogram) layout.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .errors import FeatureError
from .maps import MapGrid, resize_map
from .tensorfile import TensorFile


@dataclass(frozen=True)
class SpatialDescriptor:
    """gx x gy grid of nonnegative per-cell histograms.

    ``cell_extents``, when known (natively computed descriptors), holds
    the (row edges, col edges) pixel boundaries of the cell tiling;
    ingested descriptors carry None.
    """

    name: str
    values: np.ndarray  # (gy, gx, h)
    cell_extents: tuple[np.ndarray, np.ndarray] | None = None

    def __post_init__(self):
        v = self.values
        if v.ndim != 3 or v.size == 0:
            raise FeatureError(f"descriptor must be (rows, cols, hist), got shape {v.shape}")
        if not np.isfinite(v).all():
            raise FeatureError("descriptor contains non-finite values")
        if (v < 0).any():
            raise FeatureError("negative descriptor entry")
        if self.cell_extents is not None:
            rows, cols = self.cell_extents
            if len(rows) != v.shape[0] + 1 or len(cols) != v.shape[1] + 1:
                raise FeatureError("cell extents do not tile the descriptor grid")

    @property
    def grid(self) -> tuple[int, int]:
        return (self.values.shape[1], self.values.shape[0])  # (gx, gy)

    @property
    def hist_len(self) -> int:
        return self.values.shape[2]

    def flatten(self) -> np.ndarray:
        return self.values.reshape(-1)


def _as_rgb01(pixels) -> np.ndarray:
    arr = np.asarray(pixels)
    if arr.ndim != 3 or arr.shape[2] != 3 or arr.size == 0:
        raise FeatureError(f"expected a non-empty HxWx3 RGB array, got shape {arr.shape}")
    if arr.dtype == np.uint8:
        return arr.astype(np.float64) / 255.0
    arr = arr.astype(np.float64)
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise FeatureError("float pixels must lie in [0,1]")
    return arr


def _cell_edges(size: int, cells: int) -> np.ndarray:
    # Near-equal integer tiling, like np.array_split.
    return np.round(np.linspace(0, size, cells + 1)).astype(int)


def pixel_histogram(
    pixels,
    grid: tuple[int, int] = (4, 4),
    bins_per_channel: int = 8,
    normalize: bool = True,
) -> SpatialDescriptor:
    """Per-cell concatenated marginal RGB histograms.

    Each cell yields 3*bins_per_channel counts; with ``normalize`` the
    cell vector is scaled to sum to 1.
    """
    img = _as_rgb01(pixels)
    gx, gy = grid
    if gx <= 0 or gy <= 0 or bins_per_channel <= 0:
        raise FeatureError("grid and bin counts must be positive")
    h, w = img.shape[:2]
    if h < gy or w < gx:
        raise FeatureError(f"image {w}x{h} too small for a {gx}x{gy} grid")
    binned = np.minimum((img * bins_per_channel).astype(int), bins_per_channel - 1)
    ye = _cell_edges(h, gy)
    xe = _cell_edges(w, gx)
    out = np.zeros((gy, gx, 3 * bins_per_channel), dtype=np.float64)
    for cy in range(gy):
        for cx in range(gx):
            cell = binned[ye[cy] : ye[cy + 1], xe[cx] : xe[cx + 1]]
            for c in range(3):
                counts = np.bincount(cell[:, :, c].ravel(), minlength=bins_per_channel)
                out[cy, cx, c * bins_per_channel : (c + 1) * bins_per_channel] = counts
            if normalize:
                total = out[cy, cx].sum()
                if total > 0:
                    out[cy, cx] /= total
    return SpatialDescriptor(name="pixels", values=out, cell_extents=(ye, xe))


def _to_gray(pixels) -> np.ndarray:
    arr = np.asarray(pixels)
    if arr.ndim == 2:
        gray = arr.astype(np.float64)
        if arr.dtype == np.uint8:
            gray /= 255.0
        return gray
    img = _as_rgb01(arr)
    return 0.299 * img[:, :, 0] + 0.587 * img[:, :, 1] + 0.114 * img[:, :, 2]


def hog_descriptor(
    pixels,
    cell: int = 8,
    block: tuple[int, int] = (2, 2),
    orientations: int = 9,
) -> SpatialDescriptor:
    """Rectangular HoG with unsigned orientations and L2-hys blocks.

    Centered gradients, linear interpolation between the two nearest
    orientation bin centers (centers at k*pi/orientations), per-cell
    magnitude accumulation, then overlapping blocks (stride one cell)
    normalized by L2, clipped at 0.2 and renormalized.  The block grid
    is exposed as the descriptor's cell grid.
    """
    gray = _to_gray(pixels)
    h, w = gray.shape
    cy = h // cell
    cx = w // cell
    bh, bw = block
    if cy < bh or cx < bw:
        raise FeatureError(
            f"image {w}x{h} smaller than one {bw}x{bh} block of {cell}px cells"
        )
    gray = gray[: cy * cell, : cx * cell]
    gx = np.zeros_like(gray)
    gy_ = np.zeros_like(gray)
    gx[:, 1:-1] = gray[:, 2:] - gray[:, :-2]
    gy_[1:-1, :] = gray[2:, :] - gray[:-2, :]
    mag = np.hypot(gx, gy_)
    ang = np.mod(np.arctan2(gy_, gx), np.pi)
    # Split each magnitude between the two nearest orientation centers.
    o = ang / (np.pi / orientations)
    lo = np.floor(o).astype(int)
    frac = o - lo
    lo_bin = np.mod(lo, orientations)
    hi_bin = np.mod(lo + 1, orientations)
    cell_hist = np.zeros((cy, cx, orientations), dtype=np.float64)
    rows = np.arange(cy * cell) // cell
    cols = np.arange(cx * cell) // cell
    cell_of = rows[:, None] * cx + cols[None, :]
    flat_cell = cell_of.ravel()
    for target_bin, weight in ((lo_bin, mag * (1.0 - frac)), (hi_bin, mag * frac)):
        idx = flat_cell * orientations + target_bin.ravel()
        cell_hist += np.bincount(
            idx, weights=weight.ravel(), minlength=cy * cx * orientations
        ).reshape(cy, cx, orientations)
    by = cy - bh + 1
    bx = cx - bw + 1
    blocks = np.zeros((by, bx, bh * bw * orientations), dtype=np.float64)
    for iy in range(by):
        for ix in range(bx):
            v = cell_hist[iy : iy + bh, ix : ix + bw].reshape(-1)
            norm = np.sqrt(np.sum(v * v) + 1e-12)
            v = v / norm if norm > 1e-10 else v * 0.0
            v = np.minimum(v, 0.2)
            norm = np.sqrt(np.sum(v * v) + 1e-12)
            blocks[iy, ix] = v / norm if norm > 1e-10 else v * 0.0
    return SpatialDescriptor(name="hog", values=blocks)


def load_descriptor(tensor: TensorFile, name: str) -> SpatialDescriptor:
    """Wrap an ingested (rows, cols, hist) tensor as a descriptor."""
    if len(tensor.dims) != 3:
        raise FeatureError(f"descriptor tensor must be 3D, got dims {tensor.dims}")
    values = tensor.to_array().astype(np.float64)
    if (values < 0).any():
        raise FeatureError("negative descriptor entry in ingested tensor")
    return SpatialDescriptor(name=name, values=values)


@dataclass(frozen=True)
class PooledFeature:
    values: np.ndarray
    all_zero: bool


def pool_weighted(descriptor: SpatialDescriptor, weights: MapGrid | None) -> PooledFeature:
    """Weight each cell's histogram by the map value over that cell.

    The weight map is resampled to the descriptor grid (area averaging
    when shrinking), each cell histogram is scaled by its cell weight,
    the result is concatenated and L1-normalized.  A weight map that
    zeroes every cell yields an all-zero vector with the flag set.
    """
    v = descriptor.values
    if weights is None:
        w = np.ones(v.shape[:2], dtype=np.float64)
    else:
        gx, gy = descriptor.grid
        w = resize_map(weights, (gx, gy)).values
    pooled = (v * w[:, :, None]).reshape(-1)
    total = pooled.sum()
    if total > 0:
        return PooledFeature(values=pooled / total, all_zero=False)
    return PooledFeature(values=np.zeros_like(pooled), all_zero=True)


def descriptor_cache_key(image_id: str, name: str, params: dict) -> str:
    """Stable filename stem for cached descriptor tensors."""
    digest = hashlib.sha256(repr(sorted(params.items())).encode()).hexdigest()[:12]
    return f"{image_id}__{name}__{digest}"
