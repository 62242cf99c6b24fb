"""Memorability prediction protocol: repeated random-split SVR evaluation.

Each split partitions the images into train/test halves and the
participants into two independent halves.  Training targets are hit
rates scored by the first participant half; test ground truth comes from
the second half, so the human-consistency baseline (rank correlation
between the two halves' scores on the test images) is measured by the
same yardstick the model is.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import SolverError, StatsError
from .features import SpatialDescriptor, pool_weighted
from .kernels import KernelSpec, kernel_cross, kernel_matrix, resolve_gamma
from .maps import ANALYSIS_GRID, DEFAULT_THRESHOLD, MapGrid, SelectionIndex, VmsKind
from .session import ROLE_REPEAT, SessionLog
from .stats import spearman
from .svr import svr_train
from .tensorfile import read_tensor

WEIGHT_SOURCES = ("none", "vms", "saliency", "fixations")


@dataclass
class SplitResult:
    rho: float | None
    human_rho: float | None
    top20: float
    top100: float
    bottom100: float
    bottom20: float
    n_train: int
    n_test: int
    dropped: int  # images without a defined HR in the needed half


@dataclass
class ProtocolReport:
    weight_source: str
    n_splits: int
    seed: int
    splits: list[SplitResult]
    rho: float
    human_rho: float
    top20: float
    top100: float
    bottom100: float
    bottom20: float
    dropped_total: int
    zero_feature_images: int

    def rows(self) -> list[tuple[str, float, float]]:
        """(label, model value, human value) rows in table order."""
        return [
            ("top20", self.top20, float("nan")),
            ("top100", self.top100, float("nan")),
            ("bottom100", self.bottom100, float("nan")),
            ("bottom20", self.bottom20, float("nan")),
            ("rho", self.rho, self.human_rho),
        ]


def resolve_weight_maps(
    weight_source: str,
    image_ids: list[str],
    logs: list[SessionLog] | None = None,
    manifest=None,
    threshold: int = DEFAULT_THRESHOLD,
    grid: tuple[int, int] = ANALYSIS_GRID,
) -> dict[str, MapGrid] | None:
    """Pick the pooling weight map per image for a given source.

    'vms' builds the combined schema map from the logs; 'saliency' and
    'fixations' read the manifest attachments; 'none' returns None.
    Images without an available map are simply absent from the result.
    """
    if weight_source not in WEIGHT_SOURCES:
        raise StatsError(f"unknown weight source {weight_source!r}")
    if weight_source == "none":
        return None
    out: dict[str, MapGrid] = {}
    if weight_source == "vms":
        if logs is None:
            raise StatsError("weight source 'vms' requires session logs")
        index = SelectionIndex(logs)
        for image_id in image_ids:
            try:
                out[image_id] = index.build(
                    image_id, VmsKind.COMBINED, threshold=threshold, grid=grid
                )
            except Exception:
                continue
        return out
    if manifest is None:
        raise StatsError(f"weight source {weight_source!r} requires a manifest")
    attr = "saliency_map" if weight_source == "saliency" else "fixation_map"
    for image_id in image_ids:
        rec = manifest.get(image_id)
        rel = getattr(rec, attr)
        if rel:
            out[image_id] = MapGrid(read_tensor(manifest.resolve(rel)).to_array())
    return out


def _participant_hr(
    logs: list[SessionLog], threshold: int
) -> dict[str, list[tuple[str, bool]]]:
    """image id -> [(participant, hit?)] over repeat trials."""
    out: dict[str, list[tuple[str, bool]]] = {}
    for log in logs:
        for t in log.test_trials:
            if t.role == ROLE_REPEAT:
                out.setdefault(t.image_id, []).append(
                    (log.participant_id, t.confidence >= threshold)
                )
    return out


def _half_hr(trials: list[tuple[str, bool]], group: set[str]) -> float | None:
    hits = [h for pid, h in trials if pid in group]
    return float(np.mean(hits)) if hits else None


def _mean_of_sorted(truth: np.ndarray, order: np.ndarray, k: int, from_top: bool) -> float:
    k = min(k, truth.size)
    take = order[:k] if from_top else order[-k:]
    return float(truth[take].mean())


def run_memorability_protocol(
    logs: list[SessionLog],
    features: dict[str, dict[str, SpatialDescriptor]],
    spec: KernelSpec,
    weight_maps: dict[str, MapGrid] | None = None,
    weight_source: str = "none",
    n_splits: int = 25,
    seed: int = 0,
    threshold: int = DEFAULT_THRESHOLD,
    C: float = 1.0,
    epsilon: float = 0.1,
) -> ProtocolReport:
    """Train/evaluate the SVR over repeated image and participant splits.

    ``features`` maps image id -> feature name -> descriptor; every image
    must carry the same feature names.  ``weight_maps`` (when given) are
    applied to every image's descriptors before pooling; images missing a
    weight map fall back to unweighted pooling only when the source is
    'none', otherwise they are dropped.
    """
    image_ids = sorted(features)
    if len(image_ids) < 8:
        raise StatsError(f"protocol needs at least 8 images, got {len(image_ids)}")
    participants = sorted({log.participant_id for log in logs})
    if len(participants) < 2:
        raise StatsError("protocol needs at least 2 participants")
    feature_names = sorted(next(iter(features.values())))

    if weight_maps is not None:
        image_ids = [i for i in image_ids if i in weight_maps]
        if len(image_ids) < 8:
            raise StatsError("fewer than 8 images have a weight map")

    # Pooling does not depend on the split, so vectorize it once.
    pooled: dict[str, np.ndarray] = {}
    zero_count = 0
    zero_images = set()
    for name in feature_names:
        rows = []
        for image_id in image_ids:
            if name not in features[image_id]:
                raise StatsError(f"image {image_id!r} is missing feature {name!r}")
            w = weight_maps.get(image_id) if weight_maps is not None else None
            pf = pool_weighted(features[image_id][name], w)
            if pf.all_zero:
                zero_count += 1
                zero_images.add(image_id)
            rows.append(pf.values)
        pooled[name] = np.vstack(rows)
    if zero_count:
        warnings.warn(f"{zero_count} pooled feature vectors are all-zero")
        if all((pooled[name] == 0).all() for name in feature_names):
            raise SolverError("every pooled feature vector is zero: degenerate weighting")

    hr_trials = _participant_hr(logs, threshold)
    row_of = {image_id: k for k, image_id in enumerate(image_ids)}
    rng = np.random.default_rng(seed)
    splits: list[SplitResult] = []
    for _ in range(n_splits):
        img_perm = rng.permutation(len(image_ids))
        half = len(image_ids) // 2
        train_ids = [image_ids[i] for i in img_perm[:half]]
        test_ids = [image_ids[i] for i in img_perm[half:]]
        part_perm = rng.permutation(len(participants))
        phalf = len(participants) // 2
        group1 = {participants[i] for i in part_perm[:phalf]}
        group2 = {participants[i] for i in part_perm[phalf:]}

        dropped = 0
        train_kept, y_train = [], []
        for image_id in train_ids:
            hr = _half_hr(hr_trials.get(image_id, []), group1)
            if hr is None:
                dropped += 1
            else:
                train_kept.append(image_id)
                y_train.append(hr)
        test_kept, y_test, y_test_h1 = [], [], []
        for image_id in test_ids:
            hr2 = _half_hr(hr_trials.get(image_id, []), group2)
            if hr2 is None:
                dropped += 1
            else:
                test_kept.append(image_id)
                y_test.append(hr2)
                y_test_h1.append(_half_hr(hr_trials.get(image_id, []), group1))
        if len(train_kept) < 3 or len(test_kept) < 3:
            raise StatsError(
                "too few images with defined hit rates in a split; "
                f"kept {len(train_kept)} train / {len(test_kept)} test"
            )
        feats_train = {n: pooled[n][[row_of[i] for i in train_kept]] for n in feature_names}
        feats_test = {n: pooled[n][[row_of[i] for i in test_kept]] for n in feature_names}
        resolved = resolve_gamma(spec, feats_train)
        K = kernel_matrix(feats_train, resolved)
        model = svr_train(K, np.array(y_train), C=C, epsilon=epsilon, check_kernel=False)
        preds = model.predict(kernel_cross(feats_test, feats_train, resolved))
        truth = np.array(y_test)
        try:
            rho = spearman(preds, truth)
        except StatsError:
            rho = None
        pairs = [(a, b) for a, b in zip(y_test_h1, y_test) if a is not None]
        try:
            human = spearman([p[0] for p in pairs], [p[1] for p in pairs]) if len(pairs) >= 3 else None
        except StatsError:
            human = None
        order = np.argsort(-preds, kind="stable")
        splits.append(
            SplitResult(
                rho=rho,
                human_rho=human,
                top20=_mean_of_sorted(truth, order, 20, True),
                top100=_mean_of_sorted(truth, order, 100, True),
                bottom100=_mean_of_sorted(truth, order, 100, False),
                bottom20=_mean_of_sorted(truth, order, 20, False),
                n_train=len(train_kept),
                n_test=len(test_kept),
                dropped=dropped,
            )
        )

    def _mean(vals):
        vals = [v for v in vals if v is not None]
        return float(np.mean(vals)) if vals else float("nan")

    return ProtocolReport(
        weight_source=weight_source,
        n_splits=n_splits,
        seed=seed,
        splits=splits,
        rho=_mean([s.rho for s in splits]),
        human_rho=_mean([s.human_rho for s in splits]),
        top20=_mean([s.top20 for s in splits]),
        top100=_mean([s.top100 for s in splits]),
        bottom100=_mean([s.bottom100 for s in splits]),
        bottom20=_mean([s.bottom20 for s in splits]),
        dropped_total=sum(s.dropped for s in splits),
        zero_feature_images=len(zero_images),
    )
