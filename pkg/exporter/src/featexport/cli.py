"""CLI: list layers, export activations, export static descriptors."""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .activations import NETWORKS, export_images, layer_map, load_network, sha256_of
from .descriptors import dense_sift_descriptor, gist_descriptor
from .vtns import write_vtns


def _load_pixels(path) -> np.ndarray:
    from PIL import Image

    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"))


def _iter_images(args):
    """Yield (id, pixels) from --images dir or an items JSON manifest."""
    if args.images_dir:
        for name in sorted(os.listdir(args.images_dir)):
            stem, ext = os.path.splitext(name)
            if ext.lower() in (".png", ".jpg", ".jpeg", ".bmp"):
                yield stem, _load_pixels(os.path.join(args.images_dir, name))
    else:
        root = os.path.dirname(os.path.abspath(args.items))
        with open(args.items, "r", encoding="utf-8") as fh:
            for item in json.load(fh)["items"]:
                yield item["id"], _load_pixels(os.path.join(root, item["image"]))


def cmd_list_layers(args) -> int:
    for name, end in sorted(layer_map(args.network).items(), key=lambda kv: kv[1]):
        print(f"{name}\t(features[:{end + 1}])")
    return 0


def cmd_activations(args) -> int:
    sha = sha256_of(args.weights) if args.weights else None
    model = load_network(
        args.network,
        weights_path=args.weights,
        expected_sha256=args.sha256,
        random_seed=args.random_init_seed,
    )
    entries = export_images(
        model, args.network, args.layer, list(_iter_images(args)), args.out, weights_sha256=sha
    )
    dims = entries[0]["dims"] if entries else None
    print(f"exported {len(entries)} tensors ({args.network} {args.layer}, dims {dims}) -> {args.out}")
    return 0


def cmd_descriptors(args) -> int:
    os.makedirs(args.out, exist_ok=True)
    fn = gist_descriptor if args.kind == "gist" else dense_sift_descriptor
    count = 0
    for image_id, pixels in _iter_images(args):
        desc = fn(pixels, grid=(args.grid, args.grid))
        if desc.min() < 0:
            raise AssertionError(f"negative descriptor entry for {image_id}")
        write_vtns(os.path.join(args.out, f"{image_id}.{args.kind}.vtns"), desc)
        count += 1
    print(f"exported {count} {args.kind} descriptors -> {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="featexport")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("list-layers", help="show the transferable cut points of a network")
    p.add_argument("--network", choices=NETWORKS, required=True)
    p.set_defaults(func=cmd_list_layers)

    def image_source(p):
        group = p.add_mutually_exclusive_group(required=True)
        group.add_argument("--images-dir", help="directory of image files, ids from filenames")
        group.add_argument("--items", help="JSON manifest with [{id, image}] entries")

    p = sub.add_parser("activations", help="export one layer's activations per image")
    p.add_argument("--network", choices=NETWORKS, required=True)
    p.add_argument("--layer", required=True)
    p.add_argument("--weights", help="local checkpoint (torch state_dict)")
    p.add_argument("--sha256", help="pinned checksum for --weights")
    p.add_argument("--random-init-seed", type=int,
                   help="seeded random weights, for pipeline tests without a checkpoint")
    p.add_argument("--out", required=True)
    image_source(p)
    p.set_defaults(func=cmd_activations)

    p = sub.add_parser("descriptors", help="export gist or dense-sift descriptors")
    p.add_argument("--kind", choices=["gist", "dense_sift"], required=True)
    p.add_argument("--grid", type=int, default=4)
    p.add_argument("--out", required=True)
    image_source(p)
    p.set_defaults(func=cmd_descriptors)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
