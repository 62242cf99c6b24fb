"""Dataset manifest: image records, category tree and file attachments.

The manifest is a single JSON document listing every stimulus image, its
three-level category path (supra/mid/leaf) and optional per-image
attachments: an eye-fixation map, a saliency map, ground-truth schema
maps and cached descriptor tensors.  All attachment paths are relative
to the manifest file's directory.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

from .errors import ManifestError

FORMAT_NAME = "memschema-manifest"

# Stimulus-set hierarchy: 2 supra-ordinate categories, 2 mid-level each,
# 2 leaves each, 100 images per leaf at full scale.
DEFAULT_CATEGORY_TREE = {
    "indoor": {
        "private": ["kitchen", "living-room"],
        "public": ["big", "small"],
    },
    "outdoor": {
        "man-made": ["entertainment", "work-home"],
        "natural": ["open-country", "isolated"],
    },
}


class CategoryTree:
    """Three-level category hierarchy addressed by 'supra/mid/leaf' paths."""

    def __init__(self, tree: dict[str, dict[str, list[str]]]):
        if not tree:
            raise ManifestError("category tree is empty")
        self.tree = tree
        self._leaves = [
            f"{supra}/{mid}/{leaf}"
            for supra, mids in tree.items()
            for mid, leaves in mids.items()
            for leaf in leaves
        ]
        if len(set(self._leaves)) != len(self._leaves):
            raise ManifestError("duplicate leaf path in category tree")

    @classmethod
    def default(cls) -> "CategoryTree":
        return cls(DEFAULT_CATEGORY_TREE)

    def leaves(self) -> list[str]:
        return list(self._leaves)

    def contains(self, path: str) -> bool:
        return path in self._leaves

    @staticmethod
    def split(path: str) -> tuple[str, str, str]:
        parts = path.split("/")
        if len(parts) != 3:
            raise ManifestError(f"category path must have 3 levels, got {path!r}")
        return parts[0], parts[1], parts[2]


@dataclass(frozen=True)
class ImageRecord:
    id: str
    category: str  # 'supra/mid/leaf'
    width: int
    height: int
    path: str | None = None
    fixation_map: str | None = None
    saliency_map: str | None = None
    descriptors: dict[str, str] = field(default_factory=dict)
    vms: dict[str, str] = field(default_factory=dict)  # kind -> path


@dataclass
class DatasetManifest:
    images: list[ImageRecord]
    categories: CategoryTree
    root: str = "."  # directory attachment paths are relative to

    def __post_init__(self):
        seen = set()
        for rec in self.images:
            if rec.id in seen:
                raise ManifestError(f"duplicate image id {rec.id!r}")
            seen.add(rec.id)
            if rec.width <= 0 or rec.height <= 0:
                raise ManifestError(f"image {rec.id!r} has non-positive dimensions")
            if not self.categories.contains(rec.category):
                raise ManifestError(
                    f"image {rec.id!r} category {rec.category!r} not in the category tree"
                )
        self._by_id = {rec.id: rec for rec in self.images}

    def __len__(self) -> int:
        return len(self.images)

    def get(self, image_id: str) -> ImageRecord:
        try:
            return self._by_id[image_id]
        except KeyError:
            raise ManifestError(f"unknown image id {image_id!r}") from None

    def ids(self) -> list[str]:
        return [rec.id for rec in self.images]

    def by_leaf(self) -> dict[str, list[ImageRecord]]:
        groups: dict[str, list[ImageRecord]] = {leaf: [] for leaf in self.categories.leaves()}
        for rec in self.images:
            groups[rec.category].append(rec)
        return groups

    def resolve(self, relpath: str) -> str:
        return os.path.join(self.root, relpath)


def _parse_record(obj: dict) -> ImageRecord:
    try:
        return ImageRecord(
            id=str(obj["id"]),
            category=str(obj["category"]),
            width=int(obj["width"]),
            height=int(obj["height"]),
            path=obj.get("path"),
            fixation_map=obj.get("fixation_map"),
            saliency_map=obj.get("saliency_map"),
            descriptors=dict(obj.get("descriptors", {})),
            vms=dict(obj.get("vms", {})),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ManifestError(f"malformed image record: {exc}") from None


def load_manifest(path, check_files: bool = False) -> DatasetManifest:
    """Load and validate a manifest document.

    ``check_files`` additionally requires every referenced attachment to
    exist and, for map tensors, to parse with positive dims.
    """
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ManifestError(f"malformed manifest JSON: {exc.msg}") from None
    if doc.get("format") != FORMAT_NAME:
        raise ManifestError(f"unknown manifest format {doc.get('format')!r}")
    tree = CategoryTree(doc.get("categories", DEFAULT_CATEGORY_TREE))
    images = [_parse_record(obj) for obj in doc.get("images", [])]
    manifest = DatasetManifest(images=images, categories=tree, root=os.path.dirname(os.path.abspath(path)))
    if check_files:
        _check_attachments(manifest)
    return manifest


def _check_attachments(manifest: DatasetManifest) -> None:
    from .tensorfile import read_tensor

    for rec in manifest.images:
        refs = []
        if rec.path:
            refs.append(("path", rec.path, False))
        if rec.fixation_map:
            refs.append(("fixation_map", rec.fixation_map, True))
        if rec.saliency_map:
            refs.append(("saliency_map", rec.saliency_map, True))
        refs.extend((f"descriptor {name}", p, True) for name, p in rec.descriptors.items())
        refs.extend((f"vms {kind}", p, True) for kind, p in rec.vms.items())
        for label, relpath, is_tensor in refs:
            full = manifest.resolve(relpath)
            if not os.path.exists(full):
                raise ManifestError(f"image {rec.id!r}: {label} file missing: {relpath}")
            if is_tensor:
                tensor = read_tensor(full)
                if any(d <= 0 for d in tensor.dims):
                    raise ManifestError(f"image {rec.id!r}: {label} has empty dims")


def save_manifest(path, manifest: DatasetManifest) -> None:
    doc = {
        "format": FORMAT_NAME,
        "version": 1,
        "categories": manifest.categories.tree,
        "images": [
            {
                k: v
                for k, v in {
                    "id": rec.id,
                    "category": rec.category,
                    "width": rec.width,
                    "height": rec.height,
                    "path": rec.path,
                    "fixation_map": rec.fixation_map,
                    "saliency_map": rec.saliency_map,
                    "descriptors": rec.descriptors or None,
                    "vms": rec.vms or None,
                }.items()
                if v is not None
            }
            for rec in manifest.images
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
