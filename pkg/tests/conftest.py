"""Shared builders for synthetic sessions, manifests and observers."""

import os

import numpy as np

from memschema.manifest import CategoryTree, DatasetManifest, ImageRecord
from memschema.session import (
    RectSelection,
    SessionLog,
    StudyTrial,
    TestTrial,
    serialize_session_log,
)


def rect(x0, y0, x1, y1):
    return RectSelection(x0=x0, y0=y0, x1=x1, y1=y1)

FULL_RECT = rect(0.0, 0.0, 1.0, 1.0)


def trial(image_id, role, confidence, rects=None):
    if rects is None:
        rects = (FULL_RECT,) if confidence >= 30 else ()
    return TestTrial(
        image_id=image_id, role=role, confidence=confidence, selections=tuple(rects)
    )


def make_log(participant, test_trials, study_ids=None, session_id=None):
    if study_ids is None:
        study_ids = [t.image_id for t in test_trials if t.role == "repeat"]
    study = tuple(
        StudyTrial(image_id=i, onset_ms=4000 * k, duration_ms=3000)
        for k, i in enumerate(study_ids)
    )
    return SessionLog(
        session_id=session_id or f"session-{participant}",
        participant_id=participant,
        study_trials=study,
        test_trials=tuple(test_trials),
    )


def tiny_manifest(images_per_leaf=2, width=64, height=64, tree=None):
    tree = CategoryTree(tree) if tree else CategoryTree.default()
    records = []
    for leaf in tree.leaves():
        stem = leaf.split("/")[-1]
        for k in range(images_per_leaf):
            records.append(
                ImageRecord(
                    id=f"{stem}-{k:03d}", category=leaf, width=width, height=height
                )
            )
    return DatasetManifest(images=records, categories=tree)


def write_manifest_file(path, manifest):
    from memschema.manifest import save_manifest

    save_manifest(path, manifest)
    return path


# --- synthetic observer populations ------------------------------------

def grid_tile_rect(index, tiles=10):
    """One tile of a tiles x tiles partition of the unit square.

    Tiles make rectangle noise spatially uniform: unconstrained random
    rectangles over-cover the image center, which correlates any two
    union maps regardless of observer independence.
    """
    r, c = divmod(index % (tiles * tiles), tiles)
    return rect(c / tiles, r / tiles, (c + 1) / tiles, (r + 1) / tiles)


def shared_schema_logs(n_observers, image_ids, region=None, confidence=80, seed=0, jitter=0.0):
    """Every observer marks the same region on every image (as a repeat).

    With ``jitter`` > 0 each observer's copy of the region is translated
    by an independent offset up to +-jitter, modelling annotation noise
    around a shared schema.
    """
    rng = np.random.default_rng(seed)
    base = {}
    for k, i in enumerate(image_ids):
        if region is not None:
            base[i] = region
        else:
            x0 = 0.05 + 0.5 * ((k * 37) % 16) / 16
            y0 = 0.05 + 0.4 * ((k * 23) % 16) / 16
            base[i] = rect(x0, y0, x0 + 0.4, y0 + 0.5)
    logs = []
    for p in range(n_observers):
        trials = []
        for i in image_ids:
            r = base[i]
            if jitter > 0:
                dx, dy = rng.uniform(-jitter, jitter, 2)
                r = rect(
                    min(max(r.x0 + dx, 0.0), 0.99), min(max(r.y0 + dy, 0.0), 0.99),
                    max(min(r.x1 + dx, 1.0), 0.01), max(min(r.y1 + dy, 1.0), 0.01),
                )
            trials.append(trial(i, "repeat", confidence, [r]))
        logs.append(make_log(f"shared-{p:02d}", trials))
    return logs


def noise_schema_logs(n_observers, image_ids, tiles=10, confidence=80, seed=0):
    """Each observer marks an independently random tile per image."""
    rng = np.random.default_rng(seed)
    logs = []
    for p in range(n_observers):
        trials = [
            trial(i, "repeat", confidence, [grid_tile_rect(int(rng.integers(tiles * tiles)), tiles)])
            for i in image_ids
        ]
        logs.append(make_log(f"noise-{p:02d}", trials))
    return logs


# --- planted memorability signal ------------------------------------------

def planted_signal_dataset(n_images=48, n_observers=80, seed=0):
    """Images whose hit rate is a noiseless monotone function of a pooled
    feature living inside a planted schema region.

    Hit sets are nested (observer k recognizes image i iff k < K_i), so
    the hit rate measured over ANY participant subset is a monotone
    transform of K_i and rank correlations see no split noise.  The
    descriptor carries the signal s_i in bins 0/1 of the region cells
    (top-left quadrant); every other cell carries scrambled content whose
    total mass varies image to image.  Unweighted pooling L1-normalizes
    over all cells, so the varying distractor mass rescales the signal
    coordinates by a scrambled factor; weighted pooling zeroes the
    distractor cells first and keeps the signal clean.
    """
    from memschema.features import SpatialDescriptor
    from memschema.maps import MapGrid

    rng = np.random.default_rng(seed)
    ids = [f"img{k:03d}" for k in range(n_images)]
    K_levels = 10 + np.arange(n_images)  # nested hit-set sizes
    assert K_levels.max() < n_observers
    logs = []
    for p in range(n_observers):
        trials = [
            trial(ids[i], "repeat", 85 if p < K_levels[i] else 5)
            for i in range(n_images)
        ]
        logs.append(make_log(f"obs-{p:03d}", trials))

    # Narrow multiplicative range keeps the signal rank-sensitive to the
    # distractor-mass rescaling below.
    s = 0.5 + 0.4 * (1 + np.arange(n_images)) / (n_images + 1)
    scramble = rng.permutation(n_images)
    features = {}
    for i, image_id in enumerate(ids):
        values = np.zeros((4, 4, 8))
        values[:2, :2, 0] = s[i]
        values[:2, :2, 1] = 1.0 - s[i]
        u = (scramble[i] + 1) / (n_images + 1)
        mass = 0.1 + 6.0 * u
        mask = np.ones((4, 4), dtype=bool)
        mask[:2, :2] = False
        values[mask, 2] = u * mass
        values[mask, 3] = (1.0 - u) * mass
        features[image_id] = {"sig": SpatialDescriptor(name="sig", values=values)}

    region = np.zeros((100, 100))
    region[:50, :50] = 1.0
    weight_maps = {image_id: MapGrid(region) for image_id in ids}
    return logs, features, weight_maps


# --- on-disk desk-scale fixture ------------------------------------------

def write_desk_fixture(root, images_per_leaf=2, n_observers=6, seed=0):
    """Materialize a small but complete dataset: images, reference maps,
    a manifest and session logs, all under ``root``."""
    from PIL import Image

    from memschema.manifest import save_manifest
    from memschema.tensorfile import write_array

    rng = np.random.default_rng(seed)
    root = str(root)
    os.makedirs(os.path.join(root, "images"), exist_ok=True)
    os.makedirs(os.path.join(root, "maps"), exist_ok=True)
    os.makedirs(os.path.join(root, "sessions"), exist_ok=True)

    tree = CategoryTree.default()
    records = []
    for leaf in tree.leaves():
        stem = leaf.split("/")[-1]
        for k in range(images_per_leaf):
            image_id = f"{stem}-{k:03d}"
            pixels = rng.integers(0, 256, (64, 64, 3)).astype(np.uint8)
            Image.fromarray(pixels).save(os.path.join(root, "images", f"{image_id}.png"))
            saliency = rng.uniform(0, 1, (32, 32)).astype(np.float32)
            write_array(os.path.join(root, "maps", f"{image_id}.sal.vtns"), saliency)
            fixation = rng.uniform(0, 1, (32, 32)).astype(np.float32)
            write_array(os.path.join(root, "maps", f"{image_id}.fix.vtns"), fixation)
            records.append(
                ImageRecord(
                    id=image_id,
                    category=leaf,
                    width=64,
                    height=64,
                    path=f"images/{image_id}.png",
                    saliency_map=f"maps/{image_id}.sal.vtns",
                    fixation_map=f"maps/{image_id}.fix.vtns",
                )
            )
    manifest = DatasetManifest(images=records, categories=tree, root=root)
    manifest_path = os.path.join(root, "manifest.json")
    save_manifest(manifest_path, manifest)

    ids = [r.id for r in records]
    logs = []
    for p in range(n_observers):
        trials = []
        for j, image_id in enumerate(ids):
            role = "repeat" if (j + p) % 2 == 0 else "filler"
            conf = int(rng.integers(0, 101))
            sels = None
            if conf >= 30:
                x0, y0 = rng.uniform(0, 0.5, 2)
                sels = [rect(x0, y0, x0 + 0.4, y0 + 0.4)]
            trials.append(trial(image_id, role, conf, sels))
        log = make_log(f"part-{p:02d}", trials, session_id=f"sess-{p:02d}")
        logs.append(log)
        with open(os.path.join(root, "sessions", f"sess-{p:02d}.jsonl"), "w") as fh:
            fh.write(serialize_session_log(log))
    return manifest_path, os.path.join(root, "sessions"), logs


def planted_threshold_logs(t_star=55, n_images=40, seed=29):
    """Logs whose HR/FAR rank correlation is ~1 below t_star and ~0 at it.

    Each image gets 20 repeat and 20 filler showings.  Confidences take
    three levels: 100, t_star-1 and a sub-gate value, with counts chosen
    so the rank ordering shared by HR and FAR disappears exactly at
    t_star.  Returns (logs, high_repeat_votes, high_filler_votes); the
    rank correlation of the two vote vectors is the planted rho at and
    above t_star.
    """
    rng = np.random.default_rng(seed)
    a = rng.integers(1, 11, n_images)  # votes at 100 on the repeat side
    c = rng.integers(1, 11, n_images)  # votes at 100 on the filler side
    s = 10 + (np.arange(n_images) * 8) // n_images  # shared sub-t_star ordering
    b = s - a
    d = s - c
    mid = t_star - 1
    n_obs = 40
    trials_by_participant = {p: [] for p in range(n_obs)}
    for i in range(n_images):
        repeat_ps = [p for p in range(n_obs) if (i + p) % 2 == 0]
        filler_ps = [p for p in range(n_obs) if (i + p) % 2 == 1]
        for k, p in enumerate(repeat_ps):
            conf = 100 if k < a[i] else (mid if k < a[i] + b[i] else 10)
            trials_by_participant[p].append(trial(f"img{i:03d}", "repeat", int(conf)))
        for k, p in enumerate(filler_ps):
            conf = 100 if k < c[i] else (mid if k < c[i] + d[i] else 0)
            trials_by_participant[p].append(trial(f"img{i:03d}", "filler", int(conf)))
    logs = [make_log(f"p{p:02d}", ts) for p, ts in trials_by_participant.items()]
    return logs, a, c
