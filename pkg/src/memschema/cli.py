"""Command-line entry points for every pipeline stage.

Every command takes --seed and writes a reproducibility stamp (config
hash plus seed) next to its outputs.  Exit code 1 marks input/validation
problems, 2 unexpected runtime failures.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .errors import EmptyVmsError, MemschemaError
from .features import hog_descriptor, load_descriptor, pixel_histogram
from .kernels import HistIntersectKernel, ProductKernel, RbfKernel
from .manifest import load_manifest
from .maps import ANALYSIS_GRID, MapGrid, RECON_GRID, SelectionIndex, VmsKind, to_png16
from .protocol import resolve_weight_maps, run_memorability_protocol
from .recon import augment_plan, transform_target, variant_id
from .recon.train import TrainConfig, eval_recon, load_head, save_head, train_head
from .report import curve_svg, fmt, histogram_svg, write_csv, write_stamp
from .schedule import ScheduleConfig, generate_schedule
from .session import load_session_dir
from .stats import (
    compare_map_sets,
    confidence_index,
    detection_summary,
    select_threshold,
    split_half_consistency,
)
from .tensorfile import read_tensor, write_array


def _grid(text: str) -> tuple[int, int]:
    w, _, h = text.partition("x")
    return (int(w), int(h))


def _load_image(path) -> np.ndarray:
    from PIL import Image

    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"))


def _out_dir(args) -> str:
    os.makedirs(args.out, exist_ok=True)
    return args.out


def _stamp(args, name: str, **extra) -> None:
    config = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    config.update(extra)
    config = {k: (list(v) if isinstance(v, tuple) else v) for k, v in config.items()}
    write_stamp(os.path.join(args.out, f"{name}.stamp.json"), config, args.seed)


def cmd_schedule(args) -> int:
    manifest = load_manifest(args.manifest)
    config = ScheduleConfig(
        study_per_leaf=args.study_per_leaf,
        repeats_per_leaf=args.repeats_per_leaf,
        fillers_per_leaf=args.fillers_per_leaf,
        min_images_per_leaf=args.min_images_per_leaf,
    )
    schedule = generate_schedule(manifest, args.seed, config)
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(schedule.to_json_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"schedule with {schedule.counts()} trials -> {args.out}")
    return 0


def cmd_build_maps(args) -> int:
    out = _out_dir(args)
    logs = load_session_dir(args.logs, strict=args.strict)
    index = SelectionIndex(logs)
    kind = VmsKind(args.kind)
    manifest = load_manifest(args.manifest) if args.manifest else None
    image_ids = manifest.ids() if manifest else index.image_ids()
    skipped = []
    written = 0
    for image_id in image_ids:
        try:
            grid = index.build(image_id, kind, threshold=args.threshold, grid=args.grid)
        except EmptyVmsError as exc:
            skipped.append([image_id, str(exc)])
            continue
        write_array(os.path.join(out, f"{image_id}.{kind.value}.vtns"), grid.values)
        if args.png:
            to_png16(grid, os.path.join(out, f"{image_id}.{kind.value}.png"))
        written += 1
    write_csv(os.path.join(out, "skipped.csv"), ["image_id", "reason"], skipped)
    _stamp(args, "build-maps")
    print(f"wrote {written} maps, skipped {len(skipped)} -> {out}")
    return 0


def cmd_stats(args) -> int:
    out = _out_dir(args)
    logs = load_session_dir(args.logs, strict=args.strict)
    index = confidence_index(logs)
    rows = []
    hrs, fars = [], []
    for image_id, (rep, fil) in index.items():
        hr = float((rep >= args.threshold).mean()) if rep.size else None
        far = float((fil >= args.threshold).mean()) if fil.size else None
        rows.append([image_id, hr, far, rep.size, fil.size])
        if hr is not None:
            hrs.append(hr)
        if far is not None:
            fars.append(far)
    write_csv(
        os.path.join(out, "rates.csv"),
        ["image_id", "hr", "far", "n_repeat", "n_filler"],
        rows,
    )
    summary = detection_summary(logs, threshold=args.threshold)
    lines = [
        f"images with repeat showings: {len(hrs)}",
        f"images with filler showings: {len(fars)}",
        f"HR mean {fmt(np.mean(hrs))} sigma {fmt(np.std(hrs))}" if hrs else "HR undefined",
        f"FAR mean {fmt(np.mean(fars))} sigma {fmt(np.std(fars))}" if fars else "FAR undefined",
        f"pooled HR {fmt(summary.hr)} FAR {fmt(summary.far)} at threshold {args.threshold}",
        f"auc {fmt(summary.auc)}",
        f"d_prime {fmt(summary.d_prime)}",
    ]
    try:
        selection = select_threshold(logs, floor=args.floor)
        lines.append(f"selected threshold {selection.threshold} "
                     f"(rho {fmt(selection.rho_at(selection.threshold))})")
        write_csv(
            os.path.join(out, "threshold_curve.csv"),
            ["threshold", "rho"],
            [[t, r] for t, r in selection.curve],
        )
        defined = [(t, r) for t, r in selection.curve if r is not None]
        if defined:
            curve_svg(
                os.path.join(out, "threshold_curve.svg"),
                [t for t, _ in defined],
                [r for _, r in defined],
                "HR/FAR rank correlation vs threshold",
            )
    except MemschemaError as exc:
        lines.append(f"threshold selection unavailable: {exc}")
    write_csv(
        os.path.join(out, "roc.csv"),
        ["threshold", "far", "hr"],
        [list(p) for p in summary.roc],
    )
    curve_svg(
        os.path.join(out, "roc.svg"),
        [p[1] for p in summary.roc],
        [p[2] for p in summary.roc],
        "ROC",
    )
    with open(os.path.join(out, "summary.txt"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    _stamp(args, "stats")
    print("\n".join(lines))
    return 0


def cmd_consistency(args) -> int:
    out = _out_dir(args)
    logs = load_session_dir(args.logs, strict=args.strict)
    index = SelectionIndex(logs)
    report = split_half_consistency(
        logs,
        index.image_ids(),
        VmsKind(args.kind),
        metric=args.metric,
        n_splits=args.splits,
        seed=args.seed,
        grid=args.grid,
        threshold=args.threshold,
    )
    write_csv(
        os.path.join(out, "consistency.csv"),
        ["image_id", "value"],
        [[i, report.per_image[i]] for i in sorted(report.per_image)],
    )
    counts, edges = report.histogram
    histogram_svg(
        os.path.join(out, "consistency.svg"), counts, edges,
        f"{args.kind} split-half {args.metric}",
    )
    lines = [
        f"kind {args.kind} metric {args.metric} splits {report.n_splits}",
        f"mu {fmt(report.mu)} sigma {fmt(report.sigma)}",
        f"images {len(report.per_image)} omitted {len(report.omitted)}",
    ]
    with open(os.path.join(out, "summary.txt"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    _stamp(args, "consistency")
    print("\n".join(lines))
    return 0


def cmd_compare(args) -> int:
    out = _out_dir(args)
    logs = load_session_dir(args.logs, strict=args.strict)
    manifest = load_manifest(args.manifest)
    index = SelectionIndex(logs)
    kind = VmsKind(args.kind)
    vms_maps = {}
    for image_id in manifest.ids():
        try:
            vms_maps[image_id] = index.build(image_id, kind, threshold=args.threshold, grid=args.grid)
        except EmptyVmsError:
            continue
    attr = "saliency_map" if args.against == "saliency" else "fixation_map"
    other = {}
    for rec in manifest.images:
        rel = getattr(rec, attr)
        if rel:
            other[rec.id] = MapGrid(read_tensor(manifest.resolve(rel)).to_array())
    comparison = compare_map_sets(vms_maps, other, metric=args.metric)
    write_csv(
        os.path.join(out, "compare.csv"),
        ["image_id", "value"],
        [[i, comparison.per_image[i]] for i in sorted(comparison.per_image)],
    )
    counts, edges = comparison.histogram
    histogram_svg(
        os.path.join(out, "compare.svg"), counts, edges,
        f"{args.kind} VMS vs {args.against} ({args.metric})",
    )
    lines = [
        f"against {args.against} metric {args.metric} kind {args.kind}",
        f"mu {fmt(comparison.mu)} sigma {fmt(comparison.sigma)}",
        f"compared {len(comparison.per_image)} missing {len(comparison.omitted_missing)} "
        f"degenerate {len(comparison.omitted_degenerate)}",
    ]
    with open(os.path.join(out, "summary.txt"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    _stamp(args, "compare")
    print("\n".join(lines))
    return 0


_KERNEL_KINDS = {"hik", "rbf"}
_NATIVE_FEATURES = {"pixels", "hog"}


def _parse_feature_spec(text: str):
    parts = []
    for chunk in text.split(","):
        name, _, kind = chunk.partition(":")
        kind = kind or ("rbf" if name == "gist" else "hik")
        if kind not in _KERNEL_KINDS:
            raise MemschemaError(f"unknown kernel kind {kind!r} for feature {name!r}")
        parts.append(RbfKernel(name) if kind == "rbf" else HistIntersectKernel(name))
    if not parts:
        raise MemschemaError("empty feature spec")
    return parts[0] if len(parts) == 1 else ProductKernel(tuple(parts))


def _collect_descriptors(manifest, names, grid, cache_dir=None):
    from .features import descriptor_cache_key

    if cache_dir:
        os.makedirs(cache_dir, exist_ok=True)

    def native(rec, name):
        params = {"grid": grid} if name == "pixels" else {}
        cache_path = (
            os.path.join(cache_dir, descriptor_cache_key(rec.id, name, params) + ".vtns")
            if cache_dir
            else None
        )
        if cache_path and os.path.exists(cache_path):
            return load_descriptor(read_tensor(cache_path), name)
        img = _load_image(manifest.resolve(rec.path))
        desc = pixel_histogram(img, grid=grid) if name == "pixels" else hog_descriptor(img)
        if cache_path:
            write_array(cache_path, desc.values.astype(np.float32))
        return desc

    features = {}
    for rec in manifest.images:
        per_image = {}
        ok = True
        for name in names:
            if name in _NATIVE_FEATURES:
                if not rec.path:
                    ok = False
                    break
                per_image[name] = native(rec, name)
            else:
                rel = rec.descriptors.get(name)
                if not rel:
                    ok = False
                    break
                per_image[name] = load_descriptor(read_tensor(manifest.resolve(rel)), name)
        if ok:
            features[rec.id] = per_image
    return features


def cmd_predict_mem(args) -> int:
    out = _out_dir(args)
    logs = load_session_dir(args.logs, strict=args.strict)
    manifest = load_manifest(args.manifest)
    spec = _parse_feature_spec(args.features)
    names = [p.feature for p in (spec.parts if isinstance(spec, ProductKernel) else (spec,))]
    features = _collect_descriptors(manifest, names, args.grid, cache_dir=args.desc_cache)
    if not features:
        raise MemschemaError("no image carries every requested feature")
    weight_maps = resolve_weight_maps(
        args.weight, sorted(features), logs=logs, manifest=manifest, threshold=args.threshold
    )
    report = run_memorability_protocol(
        logs,
        features,
        spec,
        weight_maps=weight_maps,
        weight_source=args.weight,
        n_splits=args.splits,
        seed=args.seed,
        threshold=args.threshold,
        C=args.svr_c,
        epsilon=args.svr_epsilon,
    )
    write_csv(
        os.path.join(out, "protocol.csv"),
        ["row", "model", "humans"],
        [list(r) for r in report.rows()],
    )
    write_csv(
        os.path.join(out, "splits.csv"),
        ["split", "rho", "human_rho", "top20", "top100", "bottom100", "bottom20",
         "n_train", "n_test", "dropped"],
        [
            [i, s.rho, s.human_rho, s.top20, s.top100, s.bottom100, s.bottom20,
             s.n_train, s.n_test, s.dropped]
            for i, s in enumerate(report.splits)
        ],
    )
    _stamp(args, "predict-mem")
    print(
        f"weight {args.weight} features {args.features}: "
        f"rho {fmt(report.rho)} human {fmt(report.human_rho)} "
        f"(dropped {report.dropped_total}, zero-feature images {report.zero_feature_images})"
    )
    return 0


def cmd_augment(args) -> int:
    from PIL import Image

    out = _out_dir(args)
    manifest = load_manifest(args.manifest)
    images_dir = os.path.join(out, "images")
    targets_dir = os.path.join(out, "targets")
    os.makedirs(images_dir, exist_ok=True)
    os.makedirs(targets_dir, exist_ok=True)
    usable = [rec for rec in manifest.images if rec.path and rec.vms.get(args.kind)]
    if not usable:
        raise MemschemaError(f"no image has both a pixel file and a {args.kind!r} map")
    plan = augment_plan([rec.id for rec in usable])
    by_id = {rec.id: rec for rec in usable}
    entries = []
    for image_id, transform in plan:
        rec = by_id[image_id]
        vid = variant_id(image_id, transform)
        img = _load_image(manifest.resolve(rec.path))
        Image.fromarray(transform.apply(img)).save(os.path.join(images_dir, f"{vid}.png"))
        vms = MapGrid(read_tensor(manifest.resolve(rec.vms[args.kind])).to_array())
        target = transform_target(vms, transform, out_dims=args.grid)
        write_array(os.path.join(targets_dir, f"{vid}.vtns"), target.values)
        entries.append(
            {
                "id": vid,
                "source": image_id,
                "transform": transform.name,
                "image": f"images/{vid}.png",
                "target": f"targets/{vid}.vtns",
            }
        )
    with open(os.path.join(out, "variants.json"), "w", encoding="utf-8") as fh:
        json.dump({"items": entries}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _stamp(args, "augment")
    print(f"{len(entries)} variants ({len(usable)} sources x 10) -> {out}")
    return 0


def _load_recon_data(path):
    root = os.path.dirname(os.path.abspath(path))
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    ids, X, Y = [], [], []
    for item in doc["items"]:
        ids.append(item["id"])
        X.append(read_tensor(os.path.join(root, item["feature"])).to_array().reshape(-1))
        Y.append(read_tensor(os.path.join(root, item["target"])).to_array().reshape(-1))
    return ids, np.vstack(X), np.vstack(Y)


def cmd_train_recon(args) -> int:
    out = _out_dir(args)
    ids, X, Y = _load_recon_data(args.data)
    rng = np.random.default_rng(args.seed)
    n_eval = max(1, int(round(len(ids) * args.eval_fraction))) if args.eval_fraction > 0 else 0
    perm = rng.permutation(len(ids))
    eval_idx = np.sort(perm[:n_eval])
    train_idx = np.sort(perm[n_eval:])
    config = TrainConfig(
        loss=args.loss,
        lr=args.lr,
        momentum=args.momentum,
        weight_decay=args.weight_decay,
        batch_size=args.batch,
        epochs=args.epochs,
        seed=args.seed,
    )
    eval_set = (X[eval_idx], Y[eval_idx]) if n_eval else None
    head, history, snapshots = train_head(
        X[train_idx], Y[train_idx], config, eval_set=eval_set,
        snapshot_epochs=tuple(args.snapshot),
    )
    save_head(os.path.join(out, "head.vtns"), head,
              extra={"loss": args.loss, "epochs": args.epochs})
    for epoch, snap in snapshots.items():
        save_head(os.path.join(out, f"head.epoch{epoch}.vtns"), snap,
                  extra={"loss": args.loss, "epochs": epoch})
    write_csv(
        os.path.join(out, "history.csv"),
        ["epoch", "train_loss", "eval_rho"],
        [[r.epoch, r.train_loss, r.eval_rho] for r in history],
    )
    _stamp(args, "train-recon")
    last = history[-1]
    print(f"trained {len(train_idx)} samples, final loss {fmt(last.train_loss)} "
          f"eval rho {fmt(last.eval_rho)} -> {out}")
    return 0


def cmd_eval_recon(args) -> int:
    out = _out_dir(args)
    head = load_head(args.head)
    ids, X, Y = _load_recon_data(args.data)
    mean_rho, values, degenerate = eval_recon(head, X, Y)
    kept = [i for i in range(len(ids))][: len(values)]
    write_csv(
        os.path.join(out, "eval.csv"),
        ["id", "rho2d"],
        [[ids[i], v] for i, v in zip(kept, values)],
    )
    with open(os.path.join(out, "summary.txt"), "w", encoding="utf-8") as fh:
        fh.write(f"mean rho2d {fmt(mean_rho)} over {len(values)} maps "
                 f"({degenerate} degenerate)\n")
    _stamp(args, "eval-recon")
    print(f"mean rho2d {fmt(mean_rho)} over {len(values)} maps")
    return 0


def cmd_serve(args) -> int:
    from .service import ServiceConfig, serve_forever

    config = ServiceConfig(
        sessions_dir=args.sessions,
        manifest_path=args.manifest,
        token=args.token,
        strict=args.strict,
    )
    serve_forever(args.host, args.port, config)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="memschema")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out=True):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--strict", action="store_true", help="enforce full protocol counts")
        if out:
            p.add_argument("--out", required=True)

    p = sub.add_parser("schedule", help="emit a deterministic experiment schedule")
    common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--study-per-leaf", type=int, default=50)
    p.add_argument("--repeats-per-leaf", type=int, default=25)
    p.add_argument("--fillers-per-leaf", type=int, default=25)
    p.add_argument("--min-images-per-leaf", type=int, default=100)
    p.set_defaults(func=cmd_schedule)

    p = sub.add_parser("build-maps", help="accumulate schema map tensors per image")
    common(p)
    p.add_argument("--logs", required=True)
    p.add_argument("--manifest")
    p.add_argument("--kind", choices=[k.value for k in VmsKind], default="combined")
    p.add_argument("--threshold", type=int, default=40)
    p.add_argument("--grid", type=_grid, default=ANALYSIS_GRID)
    p.add_argument("--png", action="store_true")
    p.set_defaults(func=cmd_build_maps)

    p = sub.add_parser("stats", help="rates, threshold curve, ROC and d-prime")
    common(p)
    p.add_argument("--logs", required=True)
    p.add_argument("--threshold", type=int, default=40)
    p.add_argument("--floor", type=int, default=30)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("consistency", help="split-half map consistency report")
    common(p)
    p.add_argument("--logs", required=True)
    p.add_argument("--kind", choices=[k.value for k in VmsKind], default="true")
    p.add_argument("--metric", choices=["pearson2d", "mi"], default="pearson2d")
    p.add_argument("--splits", type=int, default=25)
    p.add_argument("--threshold", type=int, default=40)
    p.add_argument("--grid", type=_grid, default=ANALYSIS_GRID)
    p.set_defaults(func=cmd_consistency)

    p = sub.add_parser("compare", help="compare schema maps against reference maps")
    common(p)
    p.add_argument("--logs", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--against", choices=["saliency", "fixations"], required=True)
    p.add_argument("--kind", choices=[k.value for k in VmsKind], default="combined")
    p.add_argument("--metric", choices=["pearson2d", "mi"], default="pearson2d")
    p.add_argument("--threshold", type=int, default=40)
    p.add_argument("--grid", type=_grid, default=ANALYSIS_GRID)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("predict-mem", help="run the SVR memorability protocol")
    common(p)
    p.add_argument("--logs", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--features", default="pixels:hik",
                   help="comma list of name:kind, e.g. gist:rbf,sift:hik,hog:hik")
    p.add_argument("--weight", choices=["none", "vms", "saliency", "fixations"], default="none")
    p.add_argument("--splits", type=int, default=25)
    p.add_argument("--threshold", type=int, default=40)
    p.add_argument("--grid", type=_grid, default=(4, 4))
    p.add_argument("--svr-c", type=float, default=1.0)
    p.add_argument("--svr-epsilon", type=float, default=0.1)
    p.add_argument("--desc-cache", help="directory for cached native descriptor tensors")
    p.set_defaults(func=cmd_predict_mem)

    p = sub.add_parser("augment", help="materialize the 10x augmented variants")
    common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--kind", choices=[k.value for k in VmsKind], default="combined")
    p.add_argument("--grid", type=_grid, default=RECON_GRID)
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("train-recon", help="train the reconstruction head")
    common(p)
    p.add_argument("--data", required=True, help="JSON listing feature/target tensor pairs")
    p.add_argument("--loss", choices=["l1", "l2"], default="l1")
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--momentum", type=float, default=0.9)
    p.add_argument("--weight-decay", type=float, default=0.0005)
    p.add_argument("--batch", type=int, default=40)
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--eval-fraction", type=float, default=0.2)
    p.add_argument("--snapshot", type=int, nargs="*", default=[20])
    p.set_defaults(func=cmd_train_recon)

    p = sub.add_parser("eval-recon", help="evaluate a trained head on tensor pairs")
    common(p)
    p.add_argument("--head", required=True)
    p.add_argument("--data", required=True)
    p.set_defaults(func=cmd_eval_recon)

    p = sub.add_parser("serve", help="run the session ingestion service")
    common(p, out=False)
    p.add_argument("--sessions", required=True)
    p.add_argument("--manifest")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8321)
    p.add_argument("--token")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except MemschemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # pragma: no cover
        print(f"unexpected failure: {exc.__class__.__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
