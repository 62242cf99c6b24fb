"""Fully connected reconstruction head: forward, loss and exact backward.

Architecture: input -> [Linear -> BatchNorm -> ReLU] per hidden layer ->
Linear output.  The default configuration (two hidden layers of 256,
output 400 reshaped to a 20x20 map) regresses a schema map from a
flattened transferred activation tensor; the upstream network is frozen
and only these appended layers train.

Batch normalization uses batch statistics in train mode and running
statistics in eval mode; running stats are updated separately from the
forward pass so forward stays pure.
"""

from __future__ import annotations

import numpy as np

from ..errors import TrainingError

BN_EPS = 1e-5


class HeadParams:
    """Trainable parameters plus batchnorm running statistics."""

    def __init__(self, in_dim, hidden, out_dim, params, running, dtype):
        self.in_dim = in_dim
        self.hidden = tuple(hidden)
        self.out_dim = out_dim
        self.params = params  # name -> array, trainable
        self.running = running  # mean{i}/var{i} per hidden layer
        self.dtype = dtype

    @classmethod
    def create(cls, in_dim, hidden=(256, 256), out_dim=400, seed=0, dtype=np.float32):
        """He-uniform weights, zero biases, unit batchnorm scale."""
        if in_dim <= 0 or out_dim <= 0 or any(h <= 0 for h in hidden):
            raise TrainingError("layer sizes must be positive")
        rng = np.random.default_rng(seed)
        params: dict[str, np.ndarray] = {}
        running: dict[str, np.ndarray] = {}
        fan_in = in_dim
        for i, width in enumerate(hidden):
            limit = np.sqrt(6.0 / fan_in)
            params[f"W{i}"] = rng.uniform(-limit, limit, (fan_in, width)).astype(dtype)
            params[f"b{i}"] = np.zeros(width, dtype=dtype)
            params[f"gamma{i}"] = np.ones(width, dtype=dtype)
            params[f"beta{i}"] = np.zeros(width, dtype=dtype)
            running[f"mean{i}"] = np.zeros(width, dtype=dtype)
            running[f"var{i}"] = np.ones(width, dtype=dtype)
            fan_in = width
        limit = np.sqrt(6.0 / fan_in)
        params["Wout"] = rng.uniform(-limit, limit, (fan_in, out_dim)).astype(dtype)
        params["bout"] = np.zeros(out_dim, dtype=dtype)
        return cls(in_dim, hidden, out_dim, params, running, dtype)

    def clone(self) -> "HeadParams":
        return HeadParams(
            self.in_dim,
            self.hidden,
            self.out_dim,
            {k: v.copy() for k, v in self.params.items()},
            {k: v.copy() for k, v in self.running.items()},
            self.dtype,
        )

    def astype(self, dtype) -> "HeadParams":
        return HeadParams(
            self.in_dim,
            self.hidden,
            self.out_dim,
            {k: v.astype(dtype) for k, v in self.params.items()},
            {k: v.astype(dtype) for k, v in self.running.items()},
            dtype,
        )


def head_forward(head: HeadParams, x, mode: str = "eval", want_cache: bool = False):
    """Batch forward pass; x is (B, in_dim) or a single (in_dim,) vector.

    Returns the (B, out_dim) output, plus a cache of intermediates when
    ``want_cache`` (train mode only, needed for the backward pass).
    """
    if mode not in ("train", "eval"):
        raise TrainingError(f"unknown mode {mode!r}")
    single = np.asarray(x).ndim == 1
    a = np.atleast_2d(np.asarray(x, dtype=head.dtype))
    if a.shape[1] != head.in_dim:
        raise TrainingError(f"input width {a.shape[1]} does not match head in_dim {head.in_dim}")
    p = head.params
    eps = head.dtype(BN_EPS) if head.dtype == np.float32 else BN_EPS
    cache = {"x": a, "layers": []} if want_cache else None
    for i in range(len(head.hidden)):
        z = a @ p[f"W{i}"] + p[f"b{i}"]
        if mode == "train":
            mu = z.mean(axis=0)
            var = z.var(axis=0)
        else:
            mu = head.running[f"mean{i}"]
            var = head.running[f"var{i}"]
        ivstd = 1.0 / np.sqrt(var + eps)
        xhat = (z - mu) * ivstd
        bn = p[f"gamma{i}"] * xhat + p[f"beta{i}"]
        out = np.maximum(bn, 0)
        if not np.isfinite(out).all():
            raise TrainingError(f"non-finite activation after hidden layer {i}")
        if want_cache:
            cache["layers"].append(
                {
                    "a_in": a,
                    "z": z,
                    "mu": mu,
                    "var": var,
                    "ivstd": ivstd,
                    "xhat": xhat,
                    "relu_mask": bn > 0,
                }
            )
        a = out
    y = a @ p["Wout"] + p["bout"]
    if not np.isfinite(y).all():
        raise TrainingError("non-finite activation at the output layer")
    if want_cache:
        cache["a_last"] = a
        return (y[0] if single else y), cache
    return y[0] if single else y


def loss_and_grad(pred, target, kind: str):
    """Per-sample reconstruction loss and its gradient w.r.t. pred.

    l2: mean squared error over the output vector, grad 2(pred-target)/m.
    l1: mean absolute error, grad sign(pred-target)/m with sign(0) = 0.
    """
    p = np.asarray(pred, dtype=np.float64)
    t = np.asarray(target, dtype=np.float64)
    if p.shape != t.shape:
        raise TrainingError(f"pred/target shape mismatch: {p.shape} vs {t.shape}")
    m = p.shape[-1]
    r = p - t
    if kind == "l2":
        loss = float(np.mean(r * r, axis=-1).mean())
        grad = 2.0 * r / m
    elif kind == "l1":
        loss = float(np.mean(np.abs(r), axis=-1).mean())
        grad = np.sign(r) / m
    else:
        raise TrainingError(f"unknown loss kind {kind!r}")
    if p.ndim == 2:  # batch objective is the mean of per-sample losses
        grad = grad / p.shape[0]
    return loss, grad


def head_backward(head: HeadParams, cache, dout) -> dict[str, np.ndarray]:
    """Gradients of the batch loss for every trainable parameter.

    ``dout`` is the gradient w.r.t. the network output, shaped like it.
    Batchnorm is differentiated through the batch statistics.
    """
    p = head.params
    grads: dict[str, np.ndarray] = {}
    da = np.atleast_2d(np.asarray(dout, dtype=head.dtype))
    a_last = cache["a_last"]
    grads["Wout"] = a_last.T @ da
    grads["bout"] = da.sum(axis=0)
    da = da @ p["Wout"].T
    for i in range(len(head.hidden) - 1, -1, -1):
        layer = cache["layers"][i]
        da = da * layer["relu_mask"]
        xhat = layer["xhat"]
        grads[f"gamma{i}"] = (da * xhat).sum(axis=0)
        grads[f"beta{i}"] = da.sum(axis=0)
        dxhat = da * p[f"gamma{i}"]
        B = dxhat.shape[0]
        ivstd = layer["ivstd"]
        zc = layer["z"] - layer["mu"]
        dvar = np.sum(dxhat * zc, axis=0) * (-0.5) * ivstd**3
        dmu = -np.sum(dxhat, axis=0) * ivstd + dvar * (-2.0 / B) * zc.sum(axis=0)
        dz = dxhat * ivstd + dvar * (2.0 / B) * zc + dmu / B
        a_in = layer["a_in"]
        grads[f"W{i}"] = a_in.T @ dz
        grads[f"b{i}"] = dz.sum(axis=0)
        da = dz @ p[f"W{i}"].T
    return grads


def update_running_stats(head: HeadParams, cache, momentum: float = 0.9) -> None:
    for i in range(len(head.hidden)):
        layer = cache["layers"][i]
        head.running[f"mean{i}"] = (
            momentum * head.running[f"mean{i}"] + (1.0 - momentum) * layer["mu"]
        ).astype(head.dtype)
        head.running[f"var{i}"] = np.maximum(
            momentum * head.running[f"var{i}"] + (1.0 - momentum) * layer["var"], 1e-12
        ).astype(head.dtype)
