"""Synthetic volumes with analytically known ground truth.

These stand in for clinical data as the verification oracle: every phantom is
a pure function of its spec (noise included, via numpy's seeded PCG64
generator), so masks, volumes, and suggested contours are bit-reproducible.

The star_blob radial surface is R(u) = R0 * (1 + sum_k a_k * cos(d_k * azimuth)
* sin(polar)^d_k), a sectoral-harmonic-like perturbation: smooth at the poles,
single-valued in every direction (hence star-shaped), positive whenever
sum |a_k| < 1.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, fields

import numpy as np

from .initializer import InitContour
from .volume import BinaryMask, ImageVolume

KINDS = ("sphere", "ellipsoid", "star_blob")


class PhantomSpecError(ValueError):
    """Invalid phantom parameters."""


@dataclass
class PhantomSpec:
    kind: str
    dims: tuple[int, int, int]
    spacing: tuple[float, float, float]
    center: tuple[float, float, float]  # world mm; grid origin is (0, 0, 0)
    radii: tuple[float, ...]  # 1 value for sphere/star_blob base, 3 for ellipsoid
    blob_harmonics: tuple[tuple[int, float], ...] = field(default_factory=tuple)
    fg_intensity: float = 100.0
    bg_intensity: float = 0.0
    noise_sigma: float = 0.0
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise PhantomSpecError(f"kind must be one of {KINDS}, got {self.kind!r}")
        self.dims = tuple(int(d) for d in self.dims)
        self.spacing = tuple(float(s) for s in self.spacing)
        self.center = tuple(float(c) for c in self.center)
        self.radii = tuple(float(r) for r in self.radii)
        self.blob_harmonics = tuple(
            (int(d), float(a)) for d, a in self.blob_harmonics
        )
        if len(self.dims) != 3 or any(d <= 0 for d in self.dims):
            raise PhantomSpecError("dims must be three positive counts")
        if len(self.spacing) != 3 or any(s <= 0 for s in self.spacing):
            raise PhantomSpecError("spacing must be three positive floats")
        need = 3 if self.kind == "ellipsoid" else 1
        if len(self.radii) != need:
            raise PhantomSpecError(f"{self.kind} needs {need} radii, got {len(self.radii)}")
        if any(r <= 0 for r in self.radii):
            raise PhantomSpecError("radii must be positive")
        if self.kind != "star_blob" and self.blob_harmonics:
            raise PhantomSpecError("blob_harmonics only apply to star_blob")
        if any(d < 1 for d, _ in self.blob_harmonics):
            raise PhantomSpecError("harmonic degrees must be >= 1")
        if sum(abs(a) for _, a in self.blob_harmonics) >= 1.0:
            raise PhantomSpecError("total harmonic amplitude must stay below 1")
        if self.fg_intensity == self.bg_intensity:
            raise PhantomSpecError("fg and bg intensities must differ")
        if self.noise_sigma < 0:
            raise PhantomSpecError("noise_sigma must be >= 0")

    @classmethod
    def from_dict(cls, obj) -> "PhantomSpec":
        if not isinstance(obj, dict):
            raise PhantomSpecError("phantom spec must be a JSON object")
        known = {f.name for f in fields(cls)}
        for key in obj:
            if key not in known:
                raise PhantomSpecError(f"unknown phantom spec field {key!r}")
        return cls(**obj)

    @classmethod
    def from_json(cls, text: str) -> "PhantomSpec":
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise PhantomSpecError(f"phantom spec is not valid JSON: {exc}") from exc
        return cls.from_dict(obj)


def _inside(spec: PhantomSpec, points: np.ndarray) -> np.ndarray:
    """Analytic inside-test for (N, 3) world points."""
    rel = points - np.asarray(spec.center)
    if spec.kind == "sphere":
        return np.einsum("ij,ij->i", rel, rel) <= spec.radii[0] ** 2
    if spec.kind == "ellipsoid":
        scaled = rel / np.asarray(spec.radii)
        return np.einsum("ij,ij->i", scaled, scaled) <= 1.0
    dist = np.linalg.norm(rel, axis=1)
    reach = _blob_reach(spec, rel[:, 0], rel[:, 1], dist)
    return dist <= reach


def _blob_reach(spec: PhantomSpec, relx, rely, dist) -> np.ndarray:
    """R(u) of the star_blob for offsets from the center (any broadcastable shape)."""
    safe = np.where(dist > 0, dist, 1.0)
    sin_polar = np.hypot(relx, rely) / safe
    azimuth = np.arctan2(rely, relx)
    factor = np.ones_like(safe)
    for degree, amp in spec.blob_harmonics:
        factor = factor + amp * np.cos(degree * azimuth) * sin_polar**degree
    return spec.radii[0] * factor


def _inside_grid(spec: PhantomSpec) -> np.ndarray:
    """Inside-test over the whole voxel grid, broadcast along axes to stay lean."""
    dx = np.arange(spec.dims[0]) * spec.spacing[0] - spec.center[0]
    dy = np.arange(spec.dims[1]) * spec.spacing[1] - spec.center[1]
    dz = np.arange(spec.dims[2]) * spec.spacing[2] - spec.center[2]
    if spec.kind == "ellipsoid":
        dx, dy, dz = dx / spec.radii[0], dy / spec.radii[1], dz / spec.radii[2]
    sq = dx[:, None, None] ** 2 + dy[None, :, None] ** 2 + dz[None, None, :] ** 2
    if spec.kind == "sphere":
        return sq <= spec.radii[0] ** 2
    if spec.kind == "ellipsoid":
        return sq <= 1.0
    dist = np.sqrt(sq)
    reach = _blob_reach(spec, dx[:, None, None], dy[None, :, None], dist)
    return dist <= reach


def _max_extent(spec: PhantomSpec) -> float:
    if spec.kind == "ellipsoid":
        return max(spec.radii)
    if spec.kind == "sphere":
        return spec.radii[0]
    return spec.radii[0] * (1.0 + sum(abs(a) for _, a in spec.blob_harmonics))


def _suggested_contour(spec: PhantomSpec, volume: ImageVolume, n_points: int = 24) -> InitContour:
    """Ground-truth boundary polygon on the center z-slice, 24 points.

    Boundary radius per azimuth found by bisection on the analytic inside
    test, so the same contour works for all three kinds.
    """
    slice_index = int(round(spec.center[2] / spec.spacing[2]))
    slice_index = min(max(slice_index, 0), spec.dims[2] - 1)
    z_world = slice_index * spec.spacing[2]

    hi0 = _max_extent(spec) * 1.5 + max(spec.spacing)
    pts = []
    for k in range(n_points):
        phi = 2.0 * np.pi * k / n_points
        u = np.array([np.cos(phi), np.sin(phi), 0.0])
        lo, hi = 0.0, hi0
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            p = np.array([spec.center[0] + mid * u[0], spec.center[1] + mid * u[1], z_world])
            if _inside(spec, p[None, :])[0]:
                lo = mid
            else:
                hi = mid
        boundary = 0.5 * (lo + hi)
        pts.append(
            [
                (spec.center[0] + boundary * u[0]) / spec.spacing[0],
                (spec.center[1] + boundary * u[1]) / spec.spacing[1],
            ]
        )
    return InitContour("z", slice_index, np.asarray(pts))


def generate(spec: PhantomSpec) -> tuple[ImageVolume, BinaryMask, InitContour]:
    """(volume, ground-truth mask, suggested init contour) for a phantom spec."""
    inside = _inside_grid(spec)
    data = np.where(inside, spec.fg_intensity, spec.bg_intensity)
    if spec.noise_sigma > 0:
        rng = np.random.default_rng(spec.rng_seed)  # PCG64, pinned for reproducibility
        # noise drawn in on-disk order (x fastest) so files are seed-reproducible
        noise = rng.standard_normal(inside.size).reshape(spec.dims, order="F")
        data = data + spec.noise_sigma * noise
    volume = ImageVolume(spec.dims, spec.spacing, (0.0, 0.0, 0.0),
                         data.astype(np.float32))
    mask = BinaryMask(spec.dims, spec.spacing, (0.0, 0.0, 0.0), inside)
    contour = _suggested_contour(spec, volume)
    return volume, mask, contour
