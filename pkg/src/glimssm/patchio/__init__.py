"""Dataset ingestion, canvas construction, patch sampling and coverage tracking."""

from .canvas import Canvas, bilinear_resize, make_eval_canvas, make_train_canvas
from .coverage import CoverageMap
from .policies import (
    DETERMINISTIC_KINDS,
    POLICY_KINDS,
    GlimpseStep,
    ScanPolicy,
    generate_trajectory,
    grid_coords,
    iter_trajectory,
)
from .datasets import DatasetError, LabeledImages, dataset_hash, load_cifar10, load_image_folder
from .synthetic import make_bars_dataset, make_shapes_dataset
from .augment import AugmentConfig, augment

__all__ = [
    "Canvas", "make_train_canvas", "make_eval_canvas", "bilinear_resize",
    "CoverageMap",
    "GlimpseStep", "ScanPolicy", "POLICY_KINDS", "DETERMINISTIC_KINDS",
    "generate_trajectory", "iter_trajectory", "grid_coords",
    "LabeledImages", "DatasetError", "load_cifar10", "load_image_folder",
    "dataset_hash",
    "make_shapes_dataset", "make_bars_dataset",
    "AugmentConfig", "augment",
]
