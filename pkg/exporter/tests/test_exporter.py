import hashlib
import json

import numpy as np
import pytest
import torch

from featexport.activations import (
    export_images,
    extract,
    layer_map,
    load_network,
    sha256_of,
)
from featexport.descriptors import dense_sift_descriptor, gist_descriptor
from featexport.vtns import read_vtns, write_vtns


# --- VTNS interface -----------------------------------------------------

def test_vtns_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    arr = rng.standard_normal((3, 5, 7)).astype(np.float32)
    path = tmp_path / "t.vtns"
    write_vtns(path, arr)
    assert np.array_equal(read_vtns(path), arr)


def test_vtns_readable_by_analysis_toolkit(tmp_path):
    memschema_tf = pytest.importorskip("memschema.tensorfile")
    arr = np.arange(24, dtype=np.float32).reshape(2, 3, 4)
    path = tmp_path / "x.vtns"
    write_vtns(path, arr)
    assert np.array_equal(memschema_tf.read_array(path), arr)


def test_vtns_rejects_nonfinite(tmp_path):
    with pytest.raises(ValueError, match="non-finite"):
        write_vtns(tmp_path / "bad.vtns", np.array([np.inf], dtype=np.float32))


# --- static descriptors ------------------------------------------------

def test_gist_constant_image_near_zero():
    img = np.full((100, 100, 3), 180, dtype=np.uint8)
    desc = gist_descriptor(img)
    assert desc.shape == (4, 4, 32)
    assert desc.max() < 1e-6


def test_gist_nonnegative_and_deterministic():
    rng = np.random.default_rng(1)
    img = rng.integers(0, 256, (90, 110, 3)).astype(np.uint8)
    a = gist_descriptor(img)
    b = gist_descriptor(img)
    assert np.array_equal(a, b)
    assert a.min() >= 0.0


def test_gist_oriented_stimulus_prefers_matching_orientation():
    # vertical stripes: energy concentrates in the horizontal-frequency band
    img = np.zeros((128, 128), dtype=np.uint8)
    img[:, ::8] = 255
    desc = gist_descriptor(img, n_scales=4, n_orients=8)
    per_orient = desc.sum(axis=(0, 1)).reshape(4, 8).sum(axis=0)
    assert np.argmax(per_orient) == 0


def test_dense_sift_shape_and_norm():
    rng = np.random.default_rng(2)
    img = rng.integers(0, 256, (128, 128, 3)).astype(np.uint8)
    desc = dense_sift_descriptor(img)
    assert desc.shape == (4, 4, 128)
    assert desc.min() >= 0.0
    norms = np.sqrt((desc**2).sum(axis=2))
    assert norms.max() <= 1.0 + 1e-9


def test_descriptor_round_trips_vtns(tmp_path):
    rng = np.random.default_rng(3)
    img = rng.integers(0, 256, (64, 64, 3)).astype(np.uint8)
    desc = dense_sift_descriptor(img)
    path = tmp_path / "d.vtns"
    write_vtns(path, desc)
    assert np.allclose(read_vtns(path), desc, atol=1e-7)


# --- activations --------------------------------------------------------

DECLARED_DIMS = {
    ("vgg19", "conv5_2"): (14, 14, 512),
    ("vgg19", "conv4_1"): (28, 28, 512),
    ("vgg19", "conv1_1"): (224, 224, 64),
    ("alexnet", "conv1_1"): (55, 55, 64),
}


@pytest.fixture(scope="module")
def vgg19_checkpoint(tmp_path_factory):
    torch.manual_seed(0)
    import torchvision.models as models

    model = models.vgg19(weights=None)
    path = tmp_path_factory.mktemp("weights") / "vgg19-random.pt"
    torch.save(model.state_dict(), path)
    return str(path)


def test_layer_map_names_every_conv():
    layers = layer_map("vgg19")
    assert len(layers) == 16
    assert "conv5_2" in layers and "conv1_1" in layers
    assert len(layer_map("vgg16")) == 13
    assert len(layer_map("alexnet")) == 5


def test_activation_dims_match_declared(vgg19_checkpoint):
    rng = np.random.default_rng(4)
    img = rng.integers(0, 256, (64, 64, 3)).astype(np.uint8)
    model = load_network("vgg19", weights_path=vgg19_checkpoint)
    for (network, layer), dims in DECLARED_DIMS.items():
        if network != "vgg19":
            continue
        tensor = extract(model, "vgg19", layer, img)
        assert tensor.shape == dims, (layer, tensor.shape)


def test_alexnet_dims():
    model = load_network("alexnet", random_seed=1)
    img = np.zeros((64, 64, 3), dtype=np.uint8)
    tensor = extract(model, "alexnet", "conv1_1", img)
    assert tensor.shape == DECLARED_DIMS[("alexnet", "conv1_1")]


def test_reexport_bit_identical(vgg19_checkpoint, tmp_path):
    rng = np.random.default_rng(5)
    img = rng.integers(0, 256, (80, 80, 3)).astype(np.uint8)
    model = load_network("vgg19", weights_path=vgg19_checkpoint)
    out1 = tmp_path / "a"
    out2 = tmp_path / "b"
    export_images(model, "vgg19", "conv5_2", [("im0", img)], out1)
    export_images(model, "vgg19", "conv5_2", [("im0", img)], out2)
    b1 = (out1 / "im0.vgg19.conv5_2.vtns").read_bytes()
    b2 = (out2 / "im0.vgg19.conv5_2.vtns").read_bytes()
    assert b1 == b2


def test_mirrored_variant_differs(vgg19_checkpoint):
    rng = np.random.default_rng(6)
    img = rng.integers(0, 256, (64, 64, 3)).astype(np.uint8)
    model = load_network("vgg19", weights_path=vgg19_checkpoint)
    a = extract(model, "vgg19", "conv5_2", img)
    b = extract(model, "vgg19", "conv5_2", img[:, ::-1])
    assert hashlib.sha256(a.tobytes()).hexdigest() != hashlib.sha256(b.tobytes()).hexdigest()


def test_unknown_layer_rejected(vgg19_checkpoint):
    model = load_network("vgg19", weights_path=vgg19_checkpoint)
    with pytest.raises(ValueError, match="unknown layer"):
        extract(model, "vgg19", "conv9_9", np.zeros((32, 32, 3), dtype=np.uint8))


def test_checksum_mismatch_rejected(vgg19_checkpoint):
    with pytest.raises(ValueError, match="checksum mismatch"):
        load_network("vgg19", weights_path=vgg19_checkpoint, expected_sha256="0" * 64)


def test_checksum_pin_accepts_matching(vgg19_checkpoint):
    load_network("vgg19", weights_path=vgg19_checkpoint,
                 expected_sha256=sha256_of(vgg19_checkpoint))


def test_weights_required_without_random_flag():
    with pytest.raises(ValueError, match="weights are required"):
        load_network("vgg19")


def test_export_manifest_records_dims(vgg19_checkpoint, tmp_path):
    rng = np.random.default_rng(7)
    imgs = [(f"im{k}", rng.integers(0, 256, (48, 48, 3)).astype(np.uint8)) for k in range(2)]
    model = load_network("vgg19", weights_path=vgg19_checkpoint)
    entries = export_images(
        model, "vgg19", "conv5_2", imgs, tmp_path, weights_sha256=sha256_of(vgg19_checkpoint)
    )
    manifest = json.loads((tmp_path / "activations.json").read_text())
    assert len(manifest["items"]) == 2
    for item in manifest["items"]:
        assert tuple(item["dims"]) == (14, 14, 512)
        tensor = read_vtns(tmp_path / item["file"])
        assert tensor.shape == tuple(item["dims"])
    assert entries[0]["weights_sha256"] == sha256_of(vgg19_checkpoint)
