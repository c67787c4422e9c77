"""balloonseg: balloon-inflation segmentation of star-shaped lesions.

Draw one approximate contour on a central slice; the toolkit derives a seed
(center, trimmed intensity range, mean radius), inflates a triangulated cube
outward along fixed radial directions until the target radius is reached,
voxelizes the resulting star-shaped mesh, and scores it with the Dice
similarity coefficient.
"""
from .evaluation import EvalReport, compare, dsc, mask_volume_cm3
from .inflation import InflationParams, SegStats, run_segmentation
from .initializer import InitContour, SeedModel, derive_seed, rasterize_contour
from .mesh import TriMesh, make_seed_cube, voxelize
from .phantom import PhantomSpec, generate
from .volume import (
    BinaryMask,
    ImageVolume,
    load_metaimage,
    mean_spacing,
    sample_at_world,
    save_mask,
    save_volume,
)

__all__ = [
    "BinaryMask",
    "EvalReport",
    "ImageVolume",
    "InflationParams",
    "InitContour",
    "PhantomSpec",
    "SeedModel",
    "SegStats",
    "TriMesh",
    "compare",
    "derive_seed",
    "dsc",
    "generate",
    "load_metaimage",
    "make_seed_cube",
    "mask_volume_cm3",
    "mean_spacing",
    "rasterize_contour",
    "run_segmentation",
    "sample_at_world",
    "save_mask",
    "save_volume",
    "voxelize",
]

__version__ = "0.1.0"
