"""SGD-with-momentum training loop for the reconstruction head.

Training is deterministic given the dataset order and the seed: epoch
shuffles, parameter init and batch order all derive from one generator.
Weight decay applies to weight matrices only; biases and batchnorm
parameters are exempt.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from ..errors import DegenerateMapError, TrainingError
from ..stats import pearson2d
from ..tensorfile import TensorFile, read_tensor, write_tensor
from .head import HeadParams, head_backward, head_forward, loss_and_grad, update_running_stats


@dataclass(frozen=True)
class TrainConfig:
    loss: str = "l1"
    lr: float = 0.001
    momentum: float = 0.9
    weight_decay: float = 0.0005
    batch_size: int = 40
    epochs: int = 30
    seed: int = 0
    hidden: tuple[int, ...] = (256, 256)
    bn_momentum: float = 0.9
    shuffle: bool = True
    dtype: type = np.float32

    def validate(self) -> None:
        if self.loss not in ("l1", "l2"):
            raise TrainingError(f"loss must be l1 or l2, got {self.loss!r}")
        if self.lr <= 0 or self.batch_size <= 0 or self.epochs <= 0:
            raise TrainingError("lr, batch_size and epochs must be positive")
        if not 0.0 <= self.momentum < 1.0:
            raise TrainingError(f"momentum must be in [0,1), got {self.momentum}")


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    eval_rho: float | None = None


def _sgd_step(head: HeadParams, grads, velocity, config: TrainConfig) -> None:
    for name, g in grads.items():
        w = head.params[name]
        g = g.astype(w.dtype)
        if config.weight_decay > 0 and name.startswith("W"):
            g = g + w * w.dtype.type(config.weight_decay)
        v = velocity[name]
        v *= w.dtype.type(config.momentum)
        v -= w.dtype.type(config.lr) * g
        w += v


def train_head(
    X,
    Y,
    config: TrainConfig | None = None,
    eval_set: tuple[np.ndarray, np.ndarray] | None = None,
    head: HeadParams | None = None,
    snapshot_epochs: tuple[int, ...] = (),
) -> tuple[HeadParams, list[EpochRecord], dict[int, HeadParams]]:
    """Train on (N, in_dim) inputs and (N, out_dim) targets.

    Optionally evaluates a held-out set each epoch (mean map correlation)
    and snapshots parameters at the requested epochs.
    """
    config = config or TrainConfig()
    config.validate()
    X = np.asarray(X, dtype=config.dtype)
    Y = np.asarray(Y, dtype=config.dtype)
    if X.ndim != 2 or Y.ndim != 2 or X.shape[0] != Y.shape[0]:
        raise TrainingError(f"inconsistent dataset shapes {X.shape} and {Y.shape}")
    n = X.shape[0]
    if n < 1:
        raise TrainingError("dataset is empty")
    if head is None:
        head = HeadParams.create(
            X.shape[1], hidden=config.hidden, out_dim=Y.shape[1],
            seed=config.seed, dtype=config.dtype,
        )
    if head.in_dim != X.shape[1]:
        raise TrainingError(f"head expects {head.in_dim} inputs, dataset has {X.shape[1]}")
    velocity = {k: np.zeros_like(v) for k, v in head.params.items()}
    rng = np.random.default_rng(config.seed)
    history: list[EpochRecord] = []
    snapshots: dict[int, HeadParams] = {}
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n) if config.shuffle else np.arange(n)
        total = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            xb = X[idx]
            yb = Y[idx]
            try:
                pred, cache = head_forward(head, xb, mode="train", want_cache=True)
                loss, dpred = loss_and_grad(pred, yb, config.loss)
            except TrainingError as exc:  # non-finite activations
                raise TrainingError(
                    f"training diverged at epoch {epoch}: {exc}; "
                    f"history={[(r.epoch, r.train_loss) for r in history]}"
                ) from None
            if not np.isfinite(loss):
                raise TrainingError(
                    f"training diverged at epoch {epoch}: loss={loss}; "
                    f"history={[(r.epoch, r.train_loss) for r in history]}"
                )
            grads = head_backward(head, cache, dpred)
            _sgd_step(head, grads, velocity, config)
            update_running_stats(head, cache, momentum=config.bn_momentum)
            total += loss * len(idx)
        record = EpochRecord(epoch=epoch, train_loss=total / n)
        if eval_set is not None:
            rho, _, _ = eval_recon(head, eval_set[0], eval_set[1])
            record.eval_rho = rho
        history.append(record)
        if epoch in snapshot_epochs:
            snapshots[epoch] = head.clone()
    return head, history, snapshots


def eval_recon(head: HeadParams, X, Y, map_shape: tuple[int, int] | None = None):
    """Mean map correlation between predictions and targets.

    Constant (degenerate) predictions or targets are excluded and
    counted; it is an error if nothing remains.
    """
    X = np.asarray(X, dtype=head.dtype)
    Y = np.asarray(Y, dtype=head.dtype)
    if X.ndim != 2 or Y.ndim != 2 or X.shape[0] != Y.shape[0]:
        raise TrainingError(f"inconsistent eval shapes {X.shape} and {Y.shape}")
    if X.shape[0] == 0:
        raise TrainingError("empty eval set")
    if map_shape is None:
        side = int(round(np.sqrt(Y.shape[1])))
        map_shape = (side, Y.shape[1] // side)
    preds = head_forward(head, X, mode="eval")
    values = []
    degenerate = 0
    for i in range(X.shape[0]):
        try:
            values.append(
                pearson2d(
                    np.asarray(preds[i], dtype=np.float64).reshape(map_shape),
                    np.asarray(Y[i], dtype=np.float64).reshape(map_shape),
                )
            )
        except DegenerateMapError:
            degenerate += 1
    if not values:
        raise TrainingError("every prediction/target pair was degenerate")
    return float(np.mean(values)), values, degenerate


class VmsHeadReconstructor(BaseEstimator):
    """scikit-learn style wrapper around the reconstruction head trainer."""

    def __init__(
        self,
        loss="l1",
        lr=0.001,
        momentum=0.9,
        weight_decay=0.0005,
        batch_size=40,
        epochs=30,
        seed=0,
        hidden=(256, 256),
    ):
        self.loss = loss
        self.lr = lr
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.batch_size = batch_size
        self.epochs = epochs
        self.seed = seed
        self.hidden = hidden

    def _config(self) -> TrainConfig:
        return TrainConfig(
            loss=self.loss,
            lr=self.lr,
            momentum=self.momentum,
            weight_decay=self.weight_decay,
            batch_size=self.batch_size,
            epochs=self.epochs,
            seed=self.seed,
            hidden=tuple(self.hidden),
        )

    def fit(self, X, y):
        self.head_, self.history_, _ = train_head(X, y, self._config())
        return self

    def predict(self, X):
        if not hasattr(self, "head_"):
            raise TrainingError("estimator is not fitted")
        return head_forward(self.head_, np.asarray(X, dtype=self.head_.dtype), mode="eval")

    def score(self, X, y):
        rho, _, _ = eval_recon(self.head_, X, y)
        return rho


def save_head(path, head: HeadParams, extra: dict | None = None) -> None:
    """Persist as one flat tensor plus a JSON manifest of slices."""
    order = sorted(head.params) + sorted(head.running)
    arrays = {**head.params, **head.running}
    flat = np.concatenate([arrays[k].astype(np.float32).reshape(-1) for k in order])
    write_tensor(path, TensorFile.from_array(flat))
    layout = []
    offset = 0
    for k in order:
        size = int(arrays[k].size)
        layout.append(
            {"name": k, "offset": offset, "shape": list(arrays[k].shape),
             "running": k in head.running}
        )
        offset += size
    doc = {
        "in_dim": head.in_dim,
        "hidden": list(head.hidden),
        "out_dim": head.out_dim,
        "layout": layout,
    }
    if extra:
        doc["extra"] = extra
    with open(str(path) + ".json", "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_head(path) -> HeadParams:
    flat = read_tensor(path).to_array()
    with open(str(path) + ".json", "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    params: dict[str, np.ndarray] = {}
    running: dict[str, np.ndarray] = {}
    for item in doc["layout"]:
        shape = tuple(item["shape"])
        size = int(np.prod(shape)) if shape else 1
        chunk = flat[item["offset"] : item["offset"] + size].reshape(shape)
        (running if item["running"] else params)[item["name"]] = chunk.astype(np.float32)
    return HeadParams(
        in_dim=int(doc["in_dim"]),
        hidden=tuple(doc["hidden"]),
        out_dim=int(doc["out_dim"]),
        params=params,
        running=running,
        dtype=np.float32,
    )


def category_folds(manifest, n_folds: int = 5, seed: int = 0) -> list[list[str]]:
    """Disjoint test folds, stratified per leaf category.

    Each fold holds ~1/n_folds of every category, so training on the
    complement gives the per-category train/test split protocol.
    """
    rng = np.random.default_rng(seed)
    folds: list[list[str]] = [[] for _ in range(n_folds)]
    for leaf, records in sorted(manifest.by_leaf().items()):
        ids = sorted(r.id for r in records)
        perm = rng.permutation(len(ids))
        for pos, idx in enumerate(perm):
            folds[pos % n_folds].append(ids[idx])
    return [sorted(f) for f in folds]
