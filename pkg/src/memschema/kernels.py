"""Kernel specifications and Gram-matrix assembly.

Feature sets are mappings from a feature name to an (n_samples, dim)
matrix.  Kernels address the feature they apply to by name; a product
kernel multiplies its constituents entrywise, one kernel per feature.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SolverError
from .validation import as_float_array


@dataclass(frozen=True)
class RbfKernel:
    feature: str
    gamma: float | None = None  # None: resolve via median squared distance

    def validate(self):
        if self.gamma is not None and self.gamma <= 0:
            raise SolverError(f"rbf gamma must be positive, got {self.gamma}")


@dataclass(frozen=True)
class HistIntersectKernel:
    # Expects L1-normalized histogram features.
    feature: str

    def validate(self):
        pass


@dataclass(frozen=True)
class ProductKernel:
    parts: tuple

    def validate(self):
        if not self.parts:
            raise SolverError("product kernel needs at least one constituent")
        for p in self.parts:
            p.validate()


KernelSpec = RbfKernel | HistIntersectKernel | ProductKernel


def median_sq_dist_gamma(X: np.ndarray) -> float:
    """1 / median pairwise squared distance; 1.0 when all points coincide."""
    d = _sq_dists(X, X)
    upper = d[np.triu_indices(d.shape[0], k=1)]
    med = float(np.median(upper)) if upper.size else 0.0
    return 1.0 / med if med > 0 else 1.0


def resolve_gamma(spec: KernelSpec, features: dict[str, np.ndarray]) -> KernelSpec:
    """Fill in any unset rbf gamma from the training features."""
    if isinstance(spec, RbfKernel) and spec.gamma is None:
        return RbfKernel(spec.feature, median_sq_dist_gamma(_feature(features, spec.feature)))
    if isinstance(spec, ProductKernel):
        return ProductKernel(tuple(resolve_gamma(p, features) for p in spec.parts))
    return spec


def _feature(features: dict[str, np.ndarray], name: str) -> np.ndarray:
    if name not in features:
        raise SolverError(f"feature {name!r} missing from the feature set")
    return as_float_array(features[name], f"feature {name!r}", ndim=2)


def _sq_dists(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    aa = (A * A).sum(axis=1)
    bb = (B * B).sum(axis=1)
    d = aa[:, None] + bb[None, :] - 2.0 * (A @ B.T)
    return np.maximum(d, 0.0)


def _hik(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    out = np.empty((A.shape[0], B.shape[0]), dtype=np.float64)
    # Chunk rows to bound the (rows, n, dim) temporary.
    step = max(1, int(2e7 / max(1, B.size)))
    for i in range(0, A.shape[0], step):
        out[i : i + step] = np.minimum(A[i : i + step, None, :], B[None, :, :]).sum(axis=2)
    return out


def kernel_cross(
    features_a: dict[str, np.ndarray],
    features_b: dict[str, np.ndarray],
    spec: KernelSpec,
) -> np.ndarray:
    """(n_a, n_b) kernel block between two feature sets."""
    spec.validate()
    if isinstance(spec, RbfKernel):
        if spec.gamma is None:
            raise SolverError("rbf gamma unresolved; call resolve_gamma on training features")
        A = _feature(features_a, spec.feature)
        B = _feature(features_b, spec.feature)
        return np.exp(-spec.gamma * _sq_dists(A, B))
    if isinstance(spec, HistIntersectKernel):
        return _hik(_feature(features_a, spec.feature), _feature(features_b, spec.feature))
    if isinstance(spec, ProductKernel):
        out = None
        for part in spec.parts:
            block = kernel_cross(features_a, features_b, part)
            out = block if out is None else out * block
        return out
    raise SolverError(f"unknown kernel spec {spec!r}")


def kernel_matrix(features: dict[str, np.ndarray], spec: KernelSpec) -> np.ndarray:
    """Symmetric Gram matrix of a feature set under the given spec."""
    K = kernel_cross(features, features, spec)
    return 0.5 * (K + K.T)
