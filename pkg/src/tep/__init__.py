"""Texture edge detection by patch-response consensus."""

__version__ = "0.1.0"

from .consensus import EdgeFunction, TepConfig, detect_edges
from .edge_segmentation import (CBDecomposition, DiffusionConfig, decompose, diffuse_brightness,
                                diffuse_chromaticity, edge_stopping, refine_junctions,
                                segment_image, split_cb)
from .errors import ConfigError, ImageIOError, NumericalError, TepError
from .image_core import ColorImage, ImageGrid, PatchVector, load_color_image, load_image
from .local_segmentation import (LocalEdgeMask, SegmentationResult, clip_edges, extract_edges,
                                 segment_response)
from .patch_response import PatchResponse, compute_response, normalize_response, repair_center
from .random_field import FieldSpec, ResponseDistribution, synthesize_field


def data_path(name: str) -> str:
    """Absolute path of a bundled sample image."""
    from importlib.resources import files
    return str(files(__name__) / "data" / name)


__all__ = [
    "CBDecomposition", "ColorImage", "ConfigError", "DiffusionConfig", "EdgeFunction",
    "FieldSpec", "ImageGrid", "ImageIOError", "LocalEdgeMask", "NumericalError",
    "PatchResponse", "PatchVector", "ResponseDistribution", "SegmentationResult", "TepConfig",
    "TepError", "clip_edges", "compute_response", "data_path", "decompose", "detect_edges",
    "diffuse_brightness", "diffuse_chromaticity", "edge_stopping", "extract_edges",
    "load_color_image", "load_image", "normalize_response", "refine_junctions", "repair_center",
    "segment_image", "segment_response", "split_cb", "synthesize_field",
]
