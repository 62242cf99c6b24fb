"""Deterministic export of intermediate CNN activations.

The network registry covers torchvision architectures; layers are
discovered by walking the convolutional feature stack (pool-delimited
blocks), so the available cut points are listed rather than hardcoded.
A named layer's output is taken after its ReLU.  Weights load from a
local checkpoint whose sha256 can be pinned; everything runs in eval
mode on CPU, so re-exports are bit-identical.
"""

from __future__ import annotations

import hashlib
import json
import os

import numpy as np

INPUT_SIZE = 224
# torchvision-convention preprocessing, fixed for reproducibility
MEAN = np.array([0.485, 0.456, 0.406], dtype=np.float32)
STD = np.array([0.229, 0.224, 0.225], dtype=np.float32)

NETWORKS = ("alexnet", "vgg11", "vgg13", "vgg16", "vgg19")


def _build(network: str):
    import torchvision.models as models

    if network not in NETWORKS:
        raise ValueError(f"unknown network {network!r}, choose from {NETWORKS}")
    return getattr(models, network)(weights=None)


def layer_map(network: str) -> dict[str, int]:
    """layer name -> index of the feature-stack slice end (post-ReLU)."""
    import torch.nn as nn

    model = _build(network)
    names: dict[str, int] = {}
    block = 1
    conv_in_block = 0
    for idx, module in enumerate(model.features):
        if isinstance(module, nn.Conv2d):
            conv_in_block += 1
            names[f"conv{block}_{conv_in_block}"] = idx + 1  # include the ReLU
        elif isinstance(module, nn.MaxPool2d):
            block += 1
            conv_in_block = 0
    return names


def sha256_of(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def load_network(network: str, weights_path=None, expected_sha256=None, random_seed=None):
    """Instantiate the feature stack with local weights (or a seeded
    random init when explicitly requested for pipeline tests)."""
    import torch

    model = _build(network)
    if weights_path is not None:
        if expected_sha256 is not None:
            actual = sha256_of(weights_path)
            if actual != expected_sha256:
                raise ValueError(
                    f"weight checksum mismatch for {weights_path}: {actual} != {expected_sha256}"
                )
        state = torch.load(weights_path, map_location="cpu", weights_only=True)
        model.load_state_dict(state)
    elif random_seed is not None:
        torch.manual_seed(random_seed)
        for p in model.parameters():
            p.data.normal_(0.0, 0.02)
    else:
        raise ValueError("pre-trained weights are required (or pass random_seed for plumbing tests)")
    model.eval()
    return model


def preprocess(pixels: np.ndarray) -> np.ndarray:
    """HxWx3 uint8/float pixels to the fixed (3,224,224) network input."""
    from PIL import Image

    arr = np.asarray(pixels)
    if arr.dtype != np.uint8:
        arr = (np.clip(arr, 0, 1) * 255).astype(np.uint8)
    im = Image.fromarray(arr).convert("RGB").resize((INPUT_SIZE, INPUT_SIZE), Image.BILINEAR)
    x = np.asarray(im).astype(np.float32) / 255.0
    x = (x - MEAN) / STD
    return x.transpose(2, 0, 1)


def extract(model, network: str, layer: str, pixels: np.ndarray) -> np.ndarray:
    """(m, n, f) activation tensor for one image at a named layer."""
    import torch

    layers = layer_map(network)
    if layer not in layers:
        raise ValueError(f"unknown layer {layer!r} for {network}; available: {sorted(layers)}")
    end = layers[layer] + 1
    x = torch.from_numpy(preprocess(pixels)).unsqueeze(0)
    with torch.no_grad():
        y = model.features[:end](x)
    out = y.squeeze(0).numpy()  # (f, m, n)
    return np.ascontiguousarray(out.transpose(1, 2, 0)).astype(np.float32)


def export_images(
    model,
    network: str,
    layer: str,
    images: list[tuple[str, np.ndarray]],
    out_dir,
    weights_sha256: str | None = None,
) -> list[dict]:
    """Run every (id, pixels) pair through the network and write one
    VTNS per image plus a manifest of dims; returns the manifest entries."""
    from .vtns import write_vtns

    os.makedirs(out_dir, exist_ok=True)
    entries = []
    for image_id, pixels in images:
        tensor = extract(model, network, layer, pixels)
        rel = f"{image_id}.{network}.{layer}.vtns"
        write_vtns(os.path.join(out_dir, rel), tensor)
        entries.append(
            {
                "id": image_id,
                "file": rel,
                "dims": list(tensor.shape),
                "network": network,
                "layer": layer,
                "weights_sha256": weights_sha256,
            }
        )
    manifest_path = os.path.join(out_dir, "activations.json")
    existing = []
    if os.path.exists(manifest_path):
        with open(manifest_path, "r", encoding="utf-8") as fh:
            existing = json.load(fh)["items"]
    merged = {(e["id"], e["network"], e["layer"]): e for e in existing}
    for e in entries:
        merged[(e["id"], e["network"], e["layer"])] = e
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump({"items": sorted(merged.values(), key=lambda e: (e["id"], e["layer"]))}, fh,
                  indent=2, sort_keys=True)
        fh.write("\n")
    return entries
