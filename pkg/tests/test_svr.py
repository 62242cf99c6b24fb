import numpy as np
import pytest

from memschema.errors import SolverError
from memschema.kernels import (
    HistIntersectKernel,
    ProductKernel,
    RbfKernel,
    kernel_cross,
    kernel_matrix,
    resolve_gamma,
)
from memschema.svr import SupportVectorRegressor, SvrModel, svr_predict, svr_train


def qp_oracle(K, y, C, epsilon):
    """Dense solve of the 2n-variable box QP via cvxopt; returns the
    maximized dual objective."""
    from cvxopt import matrix, solvers

    n = len(y)
    Q = np.block([[K, -K], [-K, K]]) + 1e-10 * np.eye(2 * n)
    p = np.concatenate([epsilon - y, epsilon + y])
    z = np.concatenate([np.ones(n), -np.ones(n)])
    G = np.vstack([np.eye(2 * n), -np.eye(2 * n)])
    h = np.concatenate([np.full(2 * n, C), np.zeros(2 * n)])
    solvers.options["show_progress"] = False
    sol = solvers.qp(matrix(Q), matrix(p), matrix(G), matrix(h), matrix(z).T, matrix([0.0]))
    theta = np.array(sol["x"]).ravel()
    Q0 = np.block([[K, -K], [-K, K]])
    return -(0.5 * theta @ Q0 @ theta + p @ theta), theta


# --- kernels ----------------------------------------------------------------

def l1_rows(X):
    return X / X.sum(axis=1, keepdims=True)


def test_hik_identical_histograms_give_one():
    rng = np.random.default_rng(0)
    x = l1_rows(rng.uniform(0, 1, (1, 12)))
    feats = {"h": np.vstack([x, x])}
    K = kernel_matrix(feats, HistIntersectKernel("h"))
    assert K[0, 1] == pytest.approx(1.0)


def test_rbf_diag_is_one():
    rng = np.random.default_rng(1)
    feats = {"g": rng.standard_normal((10, 5))}
    K = kernel_matrix(feats, RbfKernel("g", gamma=0.37))
    assert np.allclose(np.diag(K), 1.0)
    assert np.allclose(K, K.T)


def test_kernels_are_psd():
    rng = np.random.default_rng(2)
    feats = {
        "g": rng.standard_normal((50, 7)),
        "h": l1_rows(rng.uniform(0, 1, (50, 9))),
    }
    for spec in (
        RbfKernel("g", gamma=0.5),
        HistIntersectKernel("h"),
        ProductKernel((RbfKernel("g", gamma=0.5), HistIntersectKernel("h"))),
    ):
        K = kernel_matrix(feats, spec)
        assert np.linalg.eigvalsh(K).min() >= -1e-8


def test_product_kernel_is_entrywise_product():
    rng = np.random.default_rng(3)
    feats = {"a": rng.uniform(0, 1, (8, 4)), "b": rng.uniform(0, 1, (8, 4))}
    ka = kernel_matrix(feats, HistIntersectKernel("a"))
    kb = kernel_matrix(feats, RbfKernel("b", gamma=1.1))
    kp = kernel_matrix(feats, ProductKernel((HistIntersectKernel("a"), RbfKernel("b", gamma=1.1))))
    assert np.allclose(kp, ka * kb, atol=1e-12)


def test_median_gamma_heuristic_resolution():
    rng = np.random.default_rng(4)
    feats = {"g": rng.standard_normal((20, 3))}
    spec = resolve_gamma(RbfKernel("g"), feats)
    assert spec.gamma is not None and spec.gamma > 0
    d = feats["g"][:, None, :] - feats["g"][None, :, :]
    med = np.median((d**2).sum(-1)[np.triu_indices(20, k=1)])
    assert spec.gamma == pytest.approx(1.0 / med)


def test_kernel_rejects_nonfinite():
    feats = {"g": np.array([[np.inf, 0.0]])}
    with pytest.raises(SolverError, match="non-finite"):
        kernel_matrix(feats, RbfKernel("g", gamma=1.0))


# --- solver --------------------------------------------------------------

def test_all_equal_targets_closed_form():
    rng = np.random.default_rng(5)
    X = rng.standard_normal((8, 3))
    K = kernel_matrix({"x": X}, RbfKernel("x", gamma=0.8))
    c = 0.5
    model = svr_train(K, np.full(8, c), C=1.0, epsilon=0.125)
    assert np.array_equal(model.beta, np.zeros(8))
    assert model.bias == c
    assert np.array_equal(model.predict(K), np.full(8, c))
    assert model.support.size == 0


def test_line_fit_within_epsilon():
    x = np.linspace(0, 1, 5)
    y = 2.0 * x + 1.0
    K = np.outer(x, x)
    model = svr_train(K, y, C=100.0, epsilon=0.01, tol=1e-6)
    preds = model.predict(K)
    assert np.all(np.abs(preds - y) <= 0.01 + 1e-6)


def test_dual_objective_matches_qp_oracle():
    rng = np.random.default_rng(6)
    for trial in range(25):
        n = 10
        X = rng.standard_normal((n, 3))
        K = kernel_matrix({"x": X}, RbfKernel("x", gamma=1.0))
        y = rng.standard_normal(n)
        C = float(rng.choice([0.5, 1.0, 5.0]))
        epsilon = float(rng.choice([0.05, 0.1, 0.3]))
        model = svr_train(K, y, C=C, epsilon=epsilon, tol=1e-6)
        oracle_obj, _ = qp_oracle(K, y, C, epsilon)
        rel = abs(model.dual_objective - oracle_obj) / max(1.0, abs(oracle_obj))
        assert rel < 1e-4, f"trial {trial}: {model.dual_objective} vs {oracle_obj}"
        assert model.converged
        assert model.kkt_violation < 1e-6


def test_kkt_structure_at_solution():
    rng = np.random.default_rng(7)
    n = 30
    X = rng.standard_normal((n, 4))
    K = kernel_matrix({"x": X}, RbfKernel("x", gamma=0.7))
    y = np.sin(X[:, 0]) + 0.1 * rng.standard_normal(n)
    C, epsilon, tol = 2.0, 0.15, 1e-6
    model = svr_train(K, y, C=C, epsilon=epsilon, tol=tol)
    residual = model.predict(K) - y
    slack = 1e-4
    for i in range(n):
        if abs(residual[i]) < epsilon - slack:  # strictly inside the tube
            assert abs(model.beta[i]) < slack
        if abs(abs(model.beta[i]) - C) < 1e-12:  # at the box bound
            assert abs(residual[i]) >= epsilon - slack
    assert np.all(np.abs(model.beta) <= C + 1e-12)
    assert abs(model.beta.sum()) <= 1e-8 * C * n


def test_support_set_definition():
    rng = np.random.default_rng(8)
    X = rng.standard_normal((12, 2))
    K = kernel_matrix({"x": X}, RbfKernel("x", gamma=1.0))
    y = X[:, 0] ** 2
    model = svr_train(K, y, C=1.0, epsilon=0.05)
    assert set(model.support) == set(np.flatnonzero(model.beta != 0))


def test_predict_direct_formula():
    model = SvrModel(
        beta=np.array([1.0]), bias=0.0, support=np.array([0]),
        C=1.0, epsilon=0.1, dual_objective=0.0, n_iter=0, converged=True,
        kkt_violation=0.0,
    )
    assert svr_predict(model, np.array([[0.5]]))[0] == 0.5


def test_predict_matches_manual_sum():
    rng = np.random.default_rng(9)
    X = rng.standard_normal((15, 3))
    K = kernel_matrix({"x": X}, RbfKernel("x", gamma=0.4))
    y = X @ np.array([1.0, -2.0, 0.5])
    model = svr_train(K, y, C=10.0, epsilon=0.1)
    q = rng.standard_normal((4, 3))
    Kq = kernel_cross({"x": q}, {"x": X}, RbfKernel("x", gamma=0.4))
    manual = Kq @ model.beta + model.bias
    assert np.allclose(model.predict(Kq), manual, atol=1e-12)


def test_non_psd_rejected():
    K = np.array([[1.0, 2.0], [2.0, 1.0]])  # eigenvalues 3, -1
    with pytest.raises(SolverError, match="not PSD"):
        svr_train(K, np.array([0.0, 1.0]))


def test_asymmetric_rejected():
    K = np.array([[1.0, 0.5], [0.4, 1.0]])
    with pytest.raises(SolverError, match="symmetric"):
        svr_train(K, np.array([0.0, 1.0]))


def test_nonconvergence_warns_and_returns():
    rng = np.random.default_rng(10)
    X = rng.standard_normal((20, 3))
    K = kernel_matrix({"x": X}, RbfKernel("x", gamma=1.0))
    y = rng.standard_normal(20)
    with pytest.warns(UserWarning, match="did not converge"):
        model = svr_train(K, y, C=10.0, epsilon=0.01, max_iter=3)
    assert not model.converged
    assert np.isfinite(model.dual_objective)


# --- sklearn wrapper -----------------------------------------------------

def test_estimator_fit_predict_and_params():
    from sklearn.base import clone

    rng = np.random.default_rng(11)
    X = rng.standard_normal((20, 2))
    K = kernel_matrix({"x": X}, RbfKernel("x", gamma=1.0))
    y = X[:, 0]
    est = SupportVectorRegressor(C=5.0, epsilon=0.05)
    assert est.get_params()["C"] == 5.0
    cloned = clone(est)
    cloned.fit(K, y)
    preds = cloned.predict(K)
    assert np.max(np.abs(preds - y)) < 0.2
    assert cloned.support_.size > 0


def test_estimator_unfitted_raises():
    with pytest.raises(SolverError, match="not fitted"):
        SupportVectorRegressor().predict(np.eye(3))
