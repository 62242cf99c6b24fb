"""Statistical machinery: recognition rates, threshold selection, signal
detection, rank correlation, 2D map similarity and resampling tests.

Rate conventions: a trial counts as a hit when its confidence is at or
above the threshold (ties count).  A rate over zero showings is
undefined and reported as None, never silently 0.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .errors import DegenerateMapError, EmptyVmsError, StatsError
from .manifest import CategoryTree, DatasetManifest
from .maps import (
    ANALYSIS_GRID,
    DEFAULT_THRESHOLD,
    MapGrid,
    SelectionIndex,
    VmsKind,
    as_values,
    resize_map,
)
from .session import ROLE_FILLER, ROLE_REPEAT, SessionLog

# ---------------------------------------------------------------------------
# rates


@dataclass(frozen=True)
class RatePair:
    hr: float | None
    far: float | None
    n_repeat_showings: int
    n_filler_showings: int


def confidence_index(logs: list[SessionLog]) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    """image id -> (repeat confidences, filler confidences) across logs."""
    reps: dict[str, list[int]] = {}
    fils: dict[str, list[int]] = {}
    for log in logs:
        for t in log.test_trials:
            bucket = reps if t.role == ROLE_REPEAT else fils
            bucket.setdefault(t.image_id, []).append(t.confidence)
    out = {}
    for image_id in sorted(set(reps) | set(fils)):
        out[image_id] = (
            np.asarray(reps.get(image_id, []), dtype=np.float64),
            np.asarray(fils.get(image_id, []), dtype=np.float64),
        )
    return out


def _rate(confs: np.ndarray, threshold: float) -> float | None:
    if confs.size == 0:
        return None
    return float((confs >= threshold).mean())


def rates(logs: list[SessionLog], image_id: str, threshold: int = DEFAULT_THRESHOLD) -> RatePair:
    index = confidence_index(logs)
    if image_id not in index:
        raise StatsError(f"image {image_id!r} never shown in any test phase")
    rep, fil = index[image_id]
    return RatePair(
        hr=_rate(rep, threshold),
        far=_rate(fil, threshold),
        n_repeat_showings=int(rep.size),
        n_filler_showings=int(fil.size),
    )


def hit_rates(
    logs: list[SessionLog], threshold: int = DEFAULT_THRESHOLD
) -> dict[str, float]:
    """Per-image hit rate over repeat showings; undefined images omitted."""
    out = {}
    for image_id, (rep, _) in confidence_index(logs).items():
        hr = _rate(rep, threshold)
        if hr is not None:
            out[image_id] = hr
    return out


# ---------------------------------------------------------------------------
# rank correlation


def _average_ranks(x: np.ndarray) -> np.ndarray:
    order = np.argsort(x, kind="stable")
    sx = x[order]
    ranks = np.empty(x.size, dtype=np.float64)
    i = 0
    while i < x.size:
        j = i
        while j + 1 < x.size and sx[j + 1] == sx[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def spearman(xs, ys) -> float:
    """Rank correlation with average ranks for ties."""
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise StatsError("spearman expects two equal-length vectors")
    if x.size < 3:
        raise StatsError(f"need at least 3 pairs, got {x.size}")
    rx = _average_ranks(x)
    ry = _average_ranks(y)
    dx = rx - rx.mean()
    dy = ry - ry.mean()
    vx = float((dx * dx).mean())
    vy = float((dy * dy).mean())
    if vx == 0.0 or vy == 0.0:
        raise StatsError("all-ties input: rank correlation undefined")
    rho = float((dx * dy).mean() / np.sqrt(vx * vy))
    return float(np.clip(rho, -1.0, 1.0))


# ---------------------------------------------------------------------------
# threshold selection


@dataclass(frozen=True)
class ThresholdSelection:
    threshold: int
    # (threshold, rho) for every candidate; rho is None where undefined
    curve: tuple[tuple[int, float | None], ...]

    def rho_at(self, t: int) -> float | None:
        for tt, rho in self.curve:
            if tt == t:
                return rho
        raise KeyError(t)


def select_threshold(logs: list[SessionLog], floor: int = 30) -> ThresholdSelection:
    """Smallest threshold at which per-image HR and FAR stop rank-correlating.

    For each candidate t in [floor..100], Spearman rho is computed between
    the per-image hit rates and false alarm rates at t (images lacking
    showings in either role are omitted).  Returns the smallest t with
    rho < 0.01 together with the whole curve.
    """
    if not logs:
        raise StatsError("no logs")
    if not 0 <= floor <= 100:
        raise StatsError(f"floor must be in [0,100], got {floor}")
    index = confidence_index(logs)
    pairs = [(rep, fil) for rep, fil in index.values() if rep.size and fil.size]
    if len(pairs) < 3:
        raise StatsError(
            f"only {len(pairs)} images have both repeat and filler showings, need at least 3"
        )
    reps = [p[0] for p in pairs]
    fils = [p[1] for p in pairs]
    curve: list[tuple[int, float | None]] = []
    chosen = None
    for t in range(floor, 101):
        hrs = np.array([(r >= t).mean() for r in reps])
        fars = np.array([(f >= t).mean() for f in fils])
        try:
            rho = spearman(hrs, fars)
        except StatsError:
            rho = None
        curve.append((t, rho))
        if chosen is None and rho is not None and rho < 0.01:
            chosen = t
    if chosen is None:
        raise StatsError("no qualifying threshold: rho never fell below 0.01")
    return ThresholdSelection(threshold=chosen, curve=tuple(curve))


# ---------------------------------------------------------------------------
# signal detection


@dataclass(frozen=True)
class DetectionSummary:
    # (threshold, far, hr) per integer threshold, descending threshold
    roc: tuple[tuple[int, float, float], ...]
    auc: float
    d_prime: float
    hr: float
    far: float
    threshold: int
    n_repeat: int
    n_filler: int


def _clamped_ndtri(rate: float, n: int) -> float:
    lo = 1.0 / (2.0 * n)
    return float(ndtri(min(max(rate, lo), 1.0 - lo)))


def detection_summary(
    logs: list[SessionLog], threshold: int = DEFAULT_THRESHOLD
) -> DetectionSummary:
    """Pooled ROC over integer thresholds, trapezoidal AUC, and d-prime.

    d-prime is taken at the analysis threshold from pooled hit and false
    alarm rates, with rates clamped to [1/(2N), 1-1/(2N)] before the
    inverse normal CDF.
    """
    rep = np.concatenate(
        [[t.confidence for t in log.test_trials if t.role == ROLE_REPEAT] for log in logs]
        or [[]]
    ).astype(np.float64)
    fil = np.concatenate(
        [[t.confidence for t in log.test_trials if t.role == ROLE_FILLER] for log in logs]
        or [[]]
    ).astype(np.float64)
    if rep.size == 0 or fil.size == 0:
        raise StatsError("detection summary needs both repeat and filler trials")
    points = []
    for t in range(100, -1, -1):
        points.append((t, float((fil >= t).mean()), float((rep >= t).mean())))
    fars = np.array([0.0] + [p[1] for p in points] + [1.0])
    hrs = np.array([0.0] + [p[2] for p in points] + [1.0])
    order = np.lexsort((hrs, fars))
    auc = float(np.trapezoid(hrs[order], fars[order]))
    pooled = np.concatenate([rep, fil])
    if np.all(pooled == pooled[0]):
        warnings.warn("all ratings identical: ROC is degenerate, reporting auc=0.5")
        auc = 0.5
    hr = float((rep >= threshold).mean())
    far = float((fil >= threshold).mean())
    d_prime = _clamped_ndtri(hr, rep.size) - _clamped_ndtri(far, fil.size)
    return DetectionSummary(
        roc=tuple(points),
        auc=auc,
        d_prime=d_prime,
        hr=hr,
        far=far,
        threshold=threshold,
        n_repeat=int(rep.size),
        n_filler=int(fil.size),
    )


def d_prime_from_rates(hr: float, far: float, n_repeat: int, n_filler: int) -> float:
    return _clamped_ndtri(hr, n_repeat) - _clamped_ndtri(far, n_filler)


# ---------------------------------------------------------------------------
# 2D map similarity


def pearson2d(a, b) -> float:
    """Linear correlation of two same-size maps, population normalization."""
    va = as_values(a)
    vb = as_values(b)
    if va.shape != vb.shape:
        raise StatsError(f"map dims differ: {va.shape} vs {vb.shape}")
    sa = va.std()
    sb = vb.std()
    if sa == 0.0 or sb == 0.0:
        raise DegenerateMapError("degenerate map: zero variance")
    rho = float(((va - va.mean()) * (vb - vb.mean())).mean() / (sa * sb))
    return float(np.clip(rho, -1.0, 1.0))


def _binned_joint(a: np.ndarray, b: np.ndarray, bins: int) -> np.ndarray:
    counts, _, _ = np.histogram2d(a.ravel(), b.ravel(), bins=bins, range=[[0.0, 1.0], [0.0, 1.0]])
    return counts / a.size


def binned_entropy(a, bins: int = 32) -> float:
    """Entropy in bits of the equal-width binned value distribution on [0,1]."""
    va = as_values(a)
    counts, _ = np.histogram(va.ravel(), bins=bins, range=(0.0, 1.0))
    p = counts / va.size
    nz = p[p > 0]
    return float(-np.sum(nz * np.log2(nz)))


def mutual_information(a, b, bins: int = 32) -> float:
    """Mutual information in bits between the binned value distributions.

    Joint histogram over bins x bins equal-width cells on [0,1]^2, with
    0*log(0) taken as 0.
    """
    va = as_values(a)
    vb = as_values(b)
    if va.shape != vb.shape:
        raise StatsError(f"map dims differ: {va.shape} vs {vb.shape}")
    if va.min() < 0.0 or va.max() > 1.0 or vb.min() < 0.0 or vb.max() > 1.0:
        raise StatsError("mutual information expects values in [0,1]")
    p = _binned_joint(va, vb, bins)
    px = p.sum(axis=1)
    py = p.sum(axis=0)
    mask = p > 0
    pj = p[mask]
    pxm = np.broadcast_to(px[:, None], p.shape)[mask]
    pym = np.broadcast_to(py[None, :], p.shape)[mask]
    terms = pj * (np.log2(pj) - np.log2(pxm) - np.log2(pym))
    return max(0.0, float(np.sum(terms)))


_METRICS = {"pearson2d": pearson2d, "mi": mutual_information}


def _resolve_metric(metric, bins: int):
    if callable(metric):
        return metric
    if metric == "mi":
        return lambda a, b: mutual_information(a, b, bins=bins)
    if metric == "pearson2d":
        return pearson2d
    raise StatsError(f"unknown metric {metric!r}")


# ---------------------------------------------------------------------------
# split-half consistency


@dataclass(frozen=True)
class ConsistencyReport:
    metric: str
    kind: str
    per_image: dict[str, float]
    mu: float
    sigma: float
    histogram: tuple[np.ndarray, np.ndarray]  # (counts, bin edges)
    n_splits: int
    omitted: tuple[str, ...]  # images with no evaluable split

    def values(self) -> np.ndarray:
        return np.array([self.per_image[k] for k in sorted(self.per_image)])


def _histogram(values: np.ndarray, metric: str) -> tuple[np.ndarray, np.ndarray]:
    if metric == "pearson2d":
        return np.histogram(values, bins=20, range=(-1.0, 1.0))
    hi = float(values.max()) if values.size and values.max() > 0 else 1.0
    return np.histogram(values, bins=20, range=(0.0, hi))


def split_half_consistency(
    logs: list[SessionLog],
    image_ids: list[str],
    kind: VmsKind,
    metric: str = "pearson2d",
    n_splits: int = 25,
    seed: int = 0,
    grid: tuple[int, int] = ANALYSIS_GRID,
    threshold: int = DEFAULT_THRESHOLD,
    bins: int = 32,
) -> ConsistencyReport:
    """Average map similarity between maps built from two random halves of
    the participant pool, repeated over ``n_splits`` random splits.

    Images where either half yields an empty map are omitted for that
    split; combined maps pool both roles, so a half with only true
    selections still contributes.  Degenerate (constant) half maps are
    likewise skipped for that split.
    """
    if n_splits < 1:
        raise StatsError(f"n_splits must be at least 1, got {n_splits}")
    index = SelectionIndex(logs)
    participants = index.participants
    if len(participants) < 2:
        raise StatsError(f"need at least 2 participants, got {len(participants)}")
    metric_fn = _resolve_metric(metric, bins)
    rng = np.random.default_rng(seed)
    sums = {i: 0.0 for i in image_ids}
    counts = {i: 0 for i in image_ids}
    half = len(participants) // 2
    for _ in range(n_splits):
        perm = rng.permutation(len(participants))
        set_a = {participants[i] for i in perm[:half]}
        set_b = {participants[i] for i in perm[half:]}
        for image_id in image_ids:
            try:
                map_a = index.build(image_id, kind, threshold=threshold, grid=grid, participants=set_a)
                map_b = index.build(image_id, kind, threshold=threshold, grid=grid, participants=set_b)
                value = metric_fn(map_a, map_b)
            except (EmptyVmsError, DegenerateMapError):
                continue
            sums[image_id] += value
            counts[image_id] += 1
    per_image = {i: sums[i] / counts[i] for i in image_ids if counts[i] > 0}
    omitted = tuple(i for i in image_ids if counts[i] == 0)
    if not per_image:
        raise StatsError("every image was omitted: no evaluable split halves")
    values = np.array([per_image[i] for i in sorted(per_image)])
    hist = _histogram(values, metric if isinstance(metric, str) else "pearson2d")
    return ConsistencyReport(
        metric=metric if isinstance(metric, str) else getattr(metric, "__name__", "custom"),
        kind=kind.value,
        per_image=per_image,
        mu=float(values.mean()),
        sigma=float(values.std()),
        histogram=hist,
        n_splits=n_splits,
        omitted=omitted,
    )


# ---------------------------------------------------------------------------
# bootstrap


@dataclass(frozen=True)
class BootstrapResult:
    significant: bool
    ci_low: float
    ci_high: float
    mean_diff: float
    # fraction of resample means whose sign differs from the full-sample mean
    sign_flip_fraction: float
    n_boot: int


def bootstrap_diff_test(
    paired_a,
    paired_b,
    n_boot: int = 10000,
    level: float = 0.95,
    seed: int = 0,
) -> BootstrapResult:
    """Percentile bootstrap on the mean of paired differences.

    Resamples image indices with replacement; significant when the
    percentile confidence interval of the resampled mean difference
    excludes zero.
    """
    a = np.asarray(paired_a, dtype=np.float64)
    b = np.asarray(paired_b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise StatsError("paired samples must be equal-length vectors")
    if a.size < 10:
        raise StatsError(f"need at least 10 pairs, got {a.size}")
    d = a - b
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, d.size, size=(n_boot, d.size))
    means = d[idx].mean(axis=1)
    alpha = (1.0 - level) / 2.0
    ci_low, ci_high = np.quantile(means, [alpha, 1.0 - alpha])
    full = float(d.mean())
    if full == 0.0:
        flip = float(np.mean(means != 0.0))
    else:
        flip = float(np.mean(np.sign(means) == -np.sign(full)))
    return BootstrapResult(
        significant=bool(ci_low > 0.0 or ci_high < 0.0),
        ci_low=float(ci_low),
        ci_high=float(ci_high),
        mean_diff=full,
        sign_flip_fraction=flip,
        n_boot=n_boot,
    )


# ---------------------------------------------------------------------------
# map-set comparison


@dataclass(frozen=True)
class MapSetComparison:
    metric: str
    per_image: dict[str, float]
    mu: float
    sigma: float
    histogram: tuple[np.ndarray, np.ndarray]
    omitted_missing: tuple[str, ...]
    omitted_degenerate: tuple[str, ...]


def compare_map_sets(
    maps_a: dict[str, MapGrid],
    maps_b: dict[str, MapGrid],
    metric: str = "pearson2d",
    bins: int = 32,
) -> MapSetComparison:
    """Per-image similarity between two map collections paired by image id.

    The second map is resampled to the first map's dims when they differ.
    """
    shared = sorted(set(maps_a) & set(maps_b))
    if not shared:
        raise StatsError("empty intersection of image ids")
    missing = tuple(sorted((set(maps_a) | set(maps_b)) - set(shared)))
    metric_fn = _resolve_metric(metric, bins)
    per_image = {}
    degenerate = []
    for image_id in shared:
        a = maps_a[image_id]
        b = maps_b[image_id]
        if a.dims != b.dims:
            b = resize_map(b, a.dims)
        try:
            per_image[image_id] = metric_fn(a, b)
        except DegenerateMapError:
            degenerate.append(image_id)
    if not per_image:
        raise StatsError("every shared image was degenerate")
    values = np.array([per_image[i] for i in sorted(per_image)])
    hist = _histogram(values, metric if isinstance(metric, str) else "pearson2d")
    return MapSetComparison(
        metric=metric if isinstance(metric, str) else getattr(metric, "__name__", "custom"),
        per_image=per_image,
        mu=float(values.mean()),
        sigma=float(values.std()),
        histogram=hist,
        omitted_missing=missing,
        omitted_degenerate=tuple(degenerate),
    )


# ---------------------------------------------------------------------------
# per-category aggregation


@dataclass(frozen=True)
class ErrorEllipse:
    center: tuple[float, float]
    semi_axes: tuple[float, float]  # 3 standard errors along each eigenvector
    axes: np.ndarray  # 2x2, eigenvectors in columns


@dataclass(frozen=True)
class CategoryStat:
    path: str
    n_images: int
    mean_hr: float
    std_hr: float
    mean_prediction: float | None = None
    ellipse: ErrorEllipse | None = None


def category_stats(
    logs: list[SessionLog],
    manifest: DatasetManifest,
    threshold: int = DEFAULT_THRESHOLD,
    predictions: dict[str, float] | None = None,
) -> dict[str, dict[str, CategoryStat]]:
    """Mean/std hit rate per category at every level of the hierarchy.

    With predictions supplied, each category also carries the mean
    predicted score and an error ellipse: semi-axes are 3 standard errors
    (3*sqrt(eigenvalue/n)) along the eigenvectors of the covariance of
    (prediction, empirical HR) pairs.
    """
    hrs = hit_rates(logs, threshold)
    groups: dict[str, dict[str, list[str]]] = {"leaf": {}, "mid": {}, "supra": {}}
    for rec in manifest.images:
        supra, mid, _leaf = CategoryTree.split(rec.category)
        for level, path in (("leaf", rec.category), ("mid", f"{supra}/{mid}"), ("supra", supra)):
            groups[level].setdefault(path, []).append(rec.id)
    for leaf in manifest.categories.leaves():
        if not groups["leaf"].get(leaf):
            raise StatsError(f"category {leaf!r} has zero images")
    out: dict[str, dict[str, CategoryStat]] = {}
    for level, paths in groups.items():
        out[level] = {}
        for path, ids in sorted(paths.items()):
            scored = [i for i in ids if i in hrs]
            if not scored:
                raise StatsError(f"category {path!r} has zero images with a defined hit rate")
            values = np.array([hrs[i] for i in scored])
            mean_pred = None
            ellipse = None
            if predictions is not None:
                pred_ids = [i for i in scored if i in predictions]
                if pred_ids:
                    pts = np.array([[predictions[i], hrs[i]] for i in pred_ids])
                    mean_pred = float(pts[:, 0].mean())
                    if len(pred_ids) >= 2:
                        cov = np.cov(pts.T, ddof=1)
                        eigvals, eigvecs = np.linalg.eigh(cov)
                        eigvals = np.maximum(eigvals, 0.0)
                        se = 3.0 * np.sqrt(eigvals / len(pred_ids))
                        ellipse = ErrorEllipse(
                            center=(mean_pred, float(pts[:, 1].mean())),
                            semi_axes=(float(se[0]), float(se[1])),
                            axes=eigvecs,
                        )
            out[level][path] = CategoryStat(
                path=path,
                n_images=len(scored),
                mean_hr=float(values.mean()),
                std_hr=float(values.std()),
                mean_prediction=mean_pred,
                ellipse=ellipse,
            )
    return out
