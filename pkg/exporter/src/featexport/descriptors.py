"""Static image descriptors: oriented-energy spatial envelope (GIST
style) and a dense gradient descriptor (SIFT layout).

Both emit SpatialDescriptor-layout tensors (rows, cols, histogram) with
strictly nonnegative entries, computed deterministically from pixels.
"""

from __future__ import annotations

import numpy as np

GIST_SIZE = 128  # working resolution before filtering


def _to_gray01(pixels: np.ndarray) -> np.ndarray:
    arr = np.asarray(pixels)
    if arr.ndim == 3:
        arr = 0.299 * arr[:, :, 0] + 0.587 * arr[:, :, 1] + 0.114 * arr[:, :, 2]
    arr = arr.astype(np.float64)
    if arr.max() > 1.0:
        arr = arr / 255.0
    return arr


def _resize_gray(img: np.ndarray, size: int) -> np.ndarray:
    from PIL import Image

    im = Image.fromarray((np.clip(img, 0, 1) * 255).astype(np.uint8))
    return np.asarray(im.resize((size, size), Image.BILINEAR)).astype(np.float64) / 255.0


def _gabor_bank(size: int, n_scales: int, n_orients: int) -> np.ndarray:
    """Polar log-Gaussian transfer functions on the FFT grid, zero DC."""
    fy = np.fft.fftfreq(size)[:, None]
    fx = np.fft.fftfreq(size)[None, :]
    radius = np.sqrt(fx * fx + fy * fy)
    angle = np.arctan2(fy, fx)
    bank = np.zeros((n_scales * n_orients, size, size))
    k = 0
    for s in range(n_scales):
        f0 = 0.25 / (2**s)
        sigma_r = f0 / 2.0
        for o in range(n_orients):
            theta = np.pi * o / n_orients
            # unsigned orientation distance with wraparound
            d = np.mod(angle - theta + np.pi / 2, np.pi) - np.pi / 2
            g = np.exp(-((radius - f0) ** 2) / (2 * sigma_r**2)) * np.exp(
                -(d**2) / (2 * (np.pi / n_orients) ** 2)
            )
            g[0, 0] = 0.0  # no DC response: constant images map to zero energy
            bank[k] = g
            k += 1
    return bank


def gist_descriptor(
    pixels: np.ndarray, grid: tuple[int, int] = (4, 4), n_scales: int = 4, n_orients: int = 8
) -> np.ndarray:
    """(gy, gx, scales*orients) average oriented-energy map."""
    gx, gy = grid
    img = _resize_gray(_to_gray01(pixels), GIST_SIZE)
    spectrum = np.fft.fft2(img)
    bank = _gabor_bank(GIST_SIZE, n_scales, n_orients)
    out = np.zeros((gy, gx, bank.shape[0]))
    ys = np.linspace(0, GIST_SIZE, gy + 1).astype(int)
    xs = np.linspace(0, GIST_SIZE, gx + 1).astype(int)
    for k in range(bank.shape[0]):
        energy = np.abs(np.fft.ifft2(spectrum * bank[k]))
        for cy in range(gy):
            for cx in range(gx):
                out[cy, cx, k] = energy[ys[cy] : ys[cy + 1], xs[cx] : xs[cx + 1]].mean()
    return out


def dense_sift_descriptor(
    pixels: np.ndarray, grid: tuple[int, int] = (4, 4), subcells: int = 4, orientations: int = 8
) -> np.ndarray:
    """(gy, gx, subcells*subcells*orientations) dense gradient descriptor.

    Each grid cell is described SIFT-style: a subcells x subcells spatial
    layout of unsigned orientation histograms, L2-normalized with the
    0.2 clip-and-renormalize step.
    """
    gx, gy = grid
    img = _to_gray01(pixels)
    h, w = img.shape
    if h < gy * subcells or w < gx * subcells:
        raise ValueError(f"image {w}x{h} too small for grid {gx}x{gy} with {subcells} subcells")
    dx = np.zeros_like(img)
    dy = np.zeros_like(img)
    dx[:, 1:-1] = img[:, 2:] - img[:, :-2]
    dy[1:-1, :] = img[2:, :] - img[:-2, :]
    mag = np.hypot(dx, dy)
    ang = np.mod(np.arctan2(dy, dx), np.pi)
    obin = np.minimum((ang / (np.pi / orientations)).astype(int), orientations - 1)

    ys = np.linspace(0, h, gy + 1).astype(int)
    xs = np.linspace(0, w, gx + 1).astype(int)
    out = np.zeros((gy, gx, subcells * subcells * orientations))
    for cy in range(gy):
        for cx in range(gx):
            cm = mag[ys[cy] : ys[cy + 1], xs[cx] : xs[cx + 1]]
            cb = obin[ys[cy] : ys[cy + 1], xs[cx] : xs[cx + 1]]
            ch, cw = cm.shape
            sys_ = np.linspace(0, ch, subcells + 1).astype(int)
            sxs = np.linspace(0, cw, subcells + 1).astype(int)
            desc = np.zeros((subcells, subcells, orientations))
            for sy in range(subcells):
                for sx in range(subcells):
                    m = cm[sys_[sy] : sys_[sy + 1], sxs[sx] : sxs[sx + 1]]
                    b = cb[sys_[sy] : sys_[sy + 1], sxs[sx] : sxs[sx + 1]]
                    desc[sy, sx] = np.bincount(b.ravel(), weights=m.ravel(), minlength=orientations)
            v = desc.reshape(-1)
            norm = np.sqrt((v * v).sum())
            if norm > 1e-10:
                v = np.minimum(v / norm, 0.2)
                norm = np.sqrt((v * v).sum())
                v = v / norm if norm > 1e-10 else v * 0.0
            out[cy, cx] = v
    return out
