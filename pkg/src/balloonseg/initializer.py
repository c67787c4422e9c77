"""Turn the user-drawn contour into a seed: center (mm), intensity range, mean radius.

The contour lives on one slice, as an implicitly closed polygon in continuous
voxel coordinates of that plane. In-plane coordinates are ordered by ascending
axis: a z-slice carries (x, y) points, a y-slice (x, z), an x-slice (y, z).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .volume import ImageVolume

AXIS_INDEX = {"x": 0, "y": 1, "z": 2}


class ContourError(ValueError):
    """Invalid contour input (schema or geometry)."""


class DegenerateContourError(ContourError):
    """Polygon area below one pixel."""


class ContourTooSmallError(ContourError):
    """Fewer than 10 interior pixels."""


@dataclass
class InitContour:
    slice_axis: str  # "x" | "y" | "z"
    slice_index: int
    points: np.ndarray  # (N, 2) float, continuous voxel coords of the slice plane

    def __post_init__(self) -> None:
        if self.slice_axis not in AXIS_INDEX:
            raise ContourError(f"slice_axis must be one of x, y, z, got {self.slice_axis!r}")
        self.slice_index = int(self.slice_index)
        self.points = np.asarray(self.points, dtype=np.float64)
        if self.points.ndim != 2 or self.points.shape[1] != 2 or len(self.points) < 3:
            raise ContourError("points must be an (N, 2) list with N >= 3")

    def plane_axes(self) -> tuple[int, int]:
        """The two in-plane volume axes, ascending."""
        a = AXIS_INDEX[self.slice_axis]
        return tuple(i for i in range(3) if i != a)  # type: ignore[return-value]


@dataclass
class SeedModel:
    center: tuple[float, float, float]  # world mm
    intensity_min: float
    intensity_max: float
    radius: float  # mm

    def __post_init__(self) -> None:
        self.center = tuple(float(c) for c in self.center)
        self.intensity_min = float(self.intensity_min)
        self.intensity_max = float(self.intensity_max)
        self.radius = float(self.radius)
        if self.intensity_min > self.intensity_max:
            raise ValueError("intensity_min must not exceed intensity_max")
        if not self.radius > 0:
            raise ValueError("radius must be positive")


def contour_from_dict(obj) -> InitContour:
    """Parse the wire-format dict; error messages name the offending field."""
    if not isinstance(obj, dict):
        raise ContourError("contour must be a JSON object")
    unknown = set(obj) - {"slice_axis", "slice_index", "points"}
    if unknown:
        raise ContourError(f"unknown contour field {sorted(unknown)[0]!r}")
    for field in ("slice_axis", "slice_index", "points"):
        if field not in obj:
            raise ContourError(f"missing contour field {field!r}")
    if not isinstance(obj["slice_index"], int) or isinstance(obj["slice_index"], bool):
        raise ContourError("slice_index must be an integer")
    pts = obj["points"]
    if not isinstance(pts, list) or any(
        not isinstance(p, list) or len(p) != 2
        or any(not isinstance(c, (int, float)) or isinstance(c, bool) for c in p)
        for p in pts
    ):
        raise ContourError("points must be a list of [x, y] number pairs")
    return InitContour(obj["slice_axis"], obj["slice_index"], np.asarray(pts, dtype=np.float64))


def contour_from_json(text: str) -> InitContour:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ContourError(f"contour is not valid JSON: {exc}") from exc
    return contour_from_dict(obj)


def contour_to_json(c: InitContour) -> str:
    """Bit-exact wire schema: pinned key order, compact separators, repr floats."""
    obj = {
        "slice_axis": c.slice_axis,
        "slice_index": int(c.slice_index),
        "points": [[float(x), float(y)] for x, y in c.points],
    }
    return json.dumps(obj, separators=(",", ":"))


def _polygon_area(points: np.ndarray) -> float:
    """Shoelace area (signed) in squared voxel units."""
    x, y = points[:, 0], points[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _even_odd_inside(px: np.ndarray, py: np.ndarray, poly: np.ndarray) -> np.ndarray:
    """Vectorized even-odd (ray parity) test for pixel centers against a polygon."""
    inside = np.zeros(px.shape, dtype=bool)
    x0, y0 = poly[-1]
    for x1, y1 in poly:
        straddles = (y0 > py) != (y1 > py)
        if np.any(straddles):
            # x of the edge at height py; y1 != y0 wherever straddles holds
            with np.errstate(divide="ignore", invalid="ignore"):
                xcross = (x1 - x0) * (py - y0) / (y1 - y0) + x0
            inside ^= straddles & (px < xcross)
        x0, y0 = x1, y1
    return inside


def validate_slice_index(c: InitContour, v: ImageVolume) -> None:
    axis = AXIS_INDEX[c.slice_axis]
    if not 0 <= c.slice_index < v.dims[axis]:
        raise ContourError(
            f"slice_index {c.slice_index} outside grid (axis {c.slice_axis} has "
            f"{v.dims[axis]} slices)"
        )


def rasterize_contour(c: InitContour, v: ImageVolume) -> np.ndarray:
    """(M, 2) integer in-plane indices of pixels whose centers fall inside the polygon."""
    validate_slice_index(c, v)
    if abs(_polygon_area(c.points)) < 1.0:
        raise DegenerateContourError("degenerate contour")
    a0, a1 = c.plane_axes()
    lo = np.maximum(np.ceil(c.points.min(axis=0) - 0.5).astype(int), 0)
    hi = np.minimum(np.floor(c.points.max(axis=0) + 0.5).astype(int),
                    np.array([v.dims[a0] - 1, v.dims[a1] - 1]))
    if np.any(hi < lo):
        return np.empty((0, 2), dtype=np.int64)
    gx, gy = np.meshgrid(np.arange(lo[0], hi[0] + 1), np.arange(lo[1], hi[1] + 1),
                         indexing="ij")
    keep = _even_odd_inside(gx.astype(np.float64), gy.astype(np.float64), c.points)
    return np.column_stack([gx[keep], gy[keep]]).astype(np.int64)


def _slice_scalars(c: InitContour, v: ImageVolume, pixels: np.ndarray) -> np.ndarray:
    axis = AXIS_INDEX[c.slice_axis]
    idx = np.empty((len(pixels), 3), dtype=np.int64)
    a0, a1 = c.plane_axes()
    idx[:, a0] = pixels[:, 0]
    idx[:, a1] = pixels[:, 1]
    idx[:, axis] = c.slice_index
    return v.data[idx[:, 0], idx[:, 1], idx[:, 2]]


def _nearest_rank(sorted_values: np.ndarray, q: float) -> float:
    """Nearest-rank quantile on a sorted sample: order statistics only."""
    n = len(sorted_values)
    k = min(n - 1, max(0, math.ceil(q * n) - 1))
    return float(sorted_values[k])


def _resample_closed(points: np.ndarray, step: float = 1.0) -> np.ndarray:
    """Arc-length resampling of the closed polyline at roughly ``step`` spacing.

    Keeps the radius estimate independent of how many clicks the user made.
    """
    closed = np.vstack([points, points[:1]])
    seg = np.diff(closed, axis=0)
    seglen = np.hypot(seg[:, 0], seg[:, 1])
    total = float(seglen.sum())
    n = max(len(points), int(math.ceil(total / step)))
    targets = np.arange(n) * total / n
    cum = np.concatenate([[0.0], np.cumsum(seglen)])
    seg_idx = np.clip(np.searchsorted(cum, targets, side="right") - 1, 0, len(seglen) - 1)
    local = (targets - cum[seg_idx]) / np.where(seglen[seg_idx] > 0, seglen[seg_idx], 1.0)
    return closed[seg_idx] + local[:, None] * seg[seg_idx]


def derive_seed(c: InitContour, v: ImageVolume, trim_percent: float = 0.02) -> SeedModel:
    """Center, trimmed intensity range and mean radius from one drawn contour.

    The mean center-to-boundary distance is dimensionality-invariant for
    sphere-like objects, so the slice-plane mean doubles as the 3D target.
    """
    if not 0.0 <= trim_percent < 0.5:
        raise ValueError(f"trim_percent must be in [0, 0.5), got {trim_percent}")
    pixels = rasterize_contour(c, v)
    if len(pixels) < 10:
        raise ContourTooSmallError("contour too small")

    axis = AXIS_INDEX[c.slice_axis]
    a0, a1 = c.plane_axes()
    centroid = pixels.mean(axis=0)
    center_idx = np.empty(3, dtype=np.float64)
    center_idx[a0], center_idx[a1] = centroid
    center_idx[axis] = float(c.slice_index)
    center_world = v.index_to_world(center_idx)

    scalars = np.sort(_slice_scalars(c, v, pixels))
    intensity_min = _nearest_rank(scalars, trim_percent)
    intensity_max = _nearest_rank(scalars, 1.0 - trim_percent)

    samples = _resample_closed(c.points)
    sample_idx = np.empty((len(samples), 3), dtype=np.float64)
    sample_idx[:, a0] = samples[:, 0]
    sample_idx[:, a1] = samples[:, 1]
    sample_idx[:, axis] = float(c.slice_index)
    world = v.index_to_world(sample_idx)
    radius = float(np.linalg.norm(world - center_world, axis=1).mean())

    return SeedModel(tuple(center_world), intensity_min, intensity_max, radius)
