"""Raster datasets, labels and feature files."""

from .features import FeatureSet, export_features, import_features
from .frames import (DatasetManifest, GridFrame, load_frame, load_manifest, load_stack,
                     write_dataset)
from .labels import EVENTS, LabelTable, align_labels, label_stats, load_labels, write_labels
from .preprocess import bilinear_resize, crop_to_box, rescale_unit
from .synthetic import generate_synthetic

__all__ = [
    "EVENTS", "DatasetManifest", "FeatureSet", "GridFrame", "LabelTable", "align_labels",
    "bilinear_resize", "crop_to_box", "export_features", "generate_synthetic", "import_features",
    "label_stats", "load_frame", "load_labels", "load_manifest", "load_stack", "rescale_unit",
    "write_dataset", "write_labels",
]
