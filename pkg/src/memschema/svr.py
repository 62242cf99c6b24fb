"""epsilon-SVR trained by sequential minimal optimization on the dual.

The dual is posed over 2n box-constrained variables theta = [alpha;
alpha*] with the single equality constraint sum(alpha - alpha*) = 0:

    minimize  1/2 theta' Q theta + p' theta
    where     Q = [[K, -K], [-K, K]],  p = [eps - y; eps + y],
              0 <= theta <= C.

Each iteration picks the maximal-violating pair across the up/down index
sets, solves the two-variable subproblem in closed form and updates the
gradient.  Convergence is declared when the maximum KKT violation drops
below tol.  The net coefficients beta = alpha - alpha* define the
regressor f(x) = sum_i beta_i K(x_i, x) + b.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin

from .errors import SolverError
from .validation import as_float_array, check_psd, check_square_kernel


@dataclass
class SvrModel:
    beta: np.ndarray  # alpha - alpha*, one per training point
    bias: float
    support: np.ndarray  # indices with beta != 0
    C: float
    epsilon: float
    dual_objective: float
    n_iter: int
    converged: bool
    kkt_violation: float
    kernel_spec: object | None = None

    def predict(self, k_rows: np.ndarray) -> np.ndarray:
        """Scores for query kernel rows of shape (n_queries, n_train)."""
        k_rows = np.atleast_2d(np.asarray(k_rows, dtype=np.float64))
        if k_rows.shape[1] != self.beta.size:
            raise SolverError(
                f"kernel row length {k_rows.shape[1]} does not match "
                f"{self.beta.size} training points"
            )
        return k_rows @ self.beta + self.bias


def svr_train(
    K,
    y,
    C: float = 1.0,
    epsilon: float = 0.1,
    tol: float = 1e-3,
    max_iter: int = 200_000,
    check_kernel: bool = True,
) -> SvrModel:
    K = check_square_kernel(K)
    y = as_float_array(y, "targets", ndim=1)
    n = K.shape[0]
    if y.size != n:
        raise SolverError(f"targets length {y.size} does not match kernel size {n}")
    if C <= 0 or epsilon <= 0:
        raise SolverError("C and epsilon must be positive")
    if check_kernel:
        check_psd(K)

    z = np.concatenate([np.ones(n), -np.ones(n)])
    p = np.concatenate([epsilon - y, epsilon + y])
    theta = np.zeros(2 * n)
    grad = p.copy()
    diag = np.diag(K)
    obj = 0.0  # running value of 1/2 theta'Q theta + p'theta
    it = 0
    violation = np.inf
    while it < max_iter:
        mzg = -z * grad
        up = ((z > 0) & (theta < C)) | ((z < 0) & (theta > 0))
        low = ((z > 0) & (theta > 0)) | ((z < 0) & (theta < C))
        if not up.any() or not low.any():
            violation = 0.0
            break
        i = int(np.where(up)[0][np.argmax(mzg[up])])
        j = int(np.where(low)[0][np.argmin(mzg[low])])
        violation = mzg[i] - mzg[j]
        if violation < tol:
            break
        fi, fj = i % n, j % n
        a = diag[fi] + diag[fj] - 2.0 * K[fi, fj]
        if a <= 1e-12:
            a = 1e-12
        g_dir = z[i] * grad[i] - z[j] * grad[j]  # <= 0 by selection
        lam = -g_dir / a
        cap_i = C - theta[i] if z[i] > 0 else theta[i]
        cap_j = theta[j] if z[j] > 0 else C - theta[j]
        lam = min(lam, cap_i, cap_j)
        if lam <= 0:
            break
        delta = g_dir * lam + 0.5 * a * lam * lam
        # The clipped step never increases the dual minimization objective.
        assert delta <= 1e-9 * (1.0 + abs(obj)), f"objective increased by {delta}"
        obj += delta
        theta[i] = min(max(theta[i] + z[i] * lam, 0.0), C)
        theta[j] = min(max(theta[j] - z[j] * lam, 0.0), C)
        kcol_i = K[:, fi]
        kcol_j = K[:, fj]
        qcol_i = z[i] * np.concatenate([kcol_i, -kcol_i])
        qcol_j = z[j] * np.concatenate([kcol_j, -kcol_j])
        grad += qcol_i * (z[i] * lam) + qcol_j * (-z[j] * lam)
        it += 1
    converged = violation < tol
    if not converged:
        warnings.warn(
            f"SMO did not converge after {it} iterations "
            f"(KKT violation {violation:.3e}); returning best-so-far"
        )

    mzg = -z * grad
    free = (theta > 0) & (theta < C)
    if free.any():
        bias = float(mzg[free].mean())
    else:
        up = ((z > 0) & (theta < C)) | ((z < 0) & (theta > 0))
        low = ((z > 0) & (theta > 0)) | ((z < 0) & (theta < C))
        hi = mzg[up].max() if up.any() else 0.0
        lo = mzg[low].min() if low.any() else 0.0
        bias = float(0.5 * (hi + lo))

    beta = theta[:n] - theta[n:]
    dual_objective = float(y @ beta - epsilon * theta.sum() - 0.5 * beta @ K @ beta)
    return SvrModel(
        beta=beta,
        bias=bias,
        support=np.flatnonzero(beta != 0.0),
        C=C,
        epsilon=epsilon,
        dual_objective=dual_objective,
        n_iter=it,
        converged=converged,
        kkt_violation=float(max(violation, 0.0)),
    )


def svr_predict(model: SvrModel, k_rows) -> np.ndarray:
    return model.predict(k_rows)


class SupportVectorRegressor(BaseEstimator, RegressorMixin):
    """epsilon-SVR over a precomputed kernel, scikit-learn style.

    ``fit`` takes the square training Gram matrix, ``predict`` takes
    query-versus-training kernel rows, mirroring sklearn's
    ``kernel="precomputed"`` convention.
    """

    def __init__(self, C=1.0, epsilon=0.1, tol=1e-3, max_iter=200_000):
        self.C = C
        self.epsilon = epsilon
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, X, y):
        self.model_ = svr_train(
            X, y, C=self.C, epsilon=self.epsilon, tol=self.tol, max_iter=self.max_iter
        )
        self.dual_coef_ = self.model_.beta
        self.intercept_ = self.model_.bias
        self.support_ = self.model_.support
        return self

    def predict(self, X):
        if not hasattr(self, "model_"):
            raise SolverError("estimator is not fitted")
        return self.model_.predict(X)
