"""Small input-validation helpers shared by the estimators."""

from __future__ import annotations

import numpy as np

from .errors import SolverError


def as_float_array(x, name: str = "array", ndim: int | None = None) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if ndim is not None and arr.ndim != ndim:
        raise SolverError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if arr.size == 0:
        raise SolverError(f"{name} is empty")
    if not np.isfinite(arr).all():
        raise SolverError(f"{name} contains non-finite values")
    return arr


def check_square_kernel(K, name: str = "kernel matrix", sym_tol: float = 1e-10) -> np.ndarray:
    K = as_float_array(K, name, ndim=2)
    if K.shape[0] != K.shape[1]:
        raise SolverError(f"{name} must be square, got {K.shape}")
    scale = max(1.0, float(np.abs(K).max()))
    if float(np.abs(K - K.T).max()) > sym_tol * scale:
        raise SolverError(f"{name} is not symmetric")
    return K


def check_psd(K: np.ndarray, tol: float = 1e-8, name: str = "kernel matrix") -> None:
    eigvals = np.linalg.eigvalsh(K)
    scale = max(1.0, float(eigvals[-1]))
    if eigvals[0] < -tol * scale:
        raise SolverError(f"{name} is not PSD: min eigenvalue {eigvals[0]:.3e}")


def check_lengths_match(a, b, what: str = "inputs") -> None:
    if len(a) != len(b):
        raise SolverError(f"{what} length mismatch: {len(a)} vs {len(b)}")
