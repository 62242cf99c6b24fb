from .activations import export_images, extract, layer_map, load_network, sha256_of
from .descriptors import dense_sift_descriptor, gist_descriptor
from .vtns import read_vtns, write_vtns

__all__ = [
    "export_images",
    "extract",
    "layer_map",
    "load_network",
    "sha256_of",
    "dense_sift_descriptor",
    "gist_descriptor",
    "read_vtns",
    "write_vtns",
]
