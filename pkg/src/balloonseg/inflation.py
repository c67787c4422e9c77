"""Balloon inflation: split, recompute, gated radial movement, smooth, terminate.

Each iteration runs, in order: (1) split edges longer than S * mean voxel
spacing, (2) recompute per-vertex normals and curvature, (3) try to move every
vertex outward along its fixed radial direction, (4) smooth radii slightly.
The loop stops when the mean vertex radius reaches the seed radius, when the
surface stops moving, or at the iteration cap.

Movement is gated twice per vertex: the destination voxel intensity must lie
inside the seed's range of interest (hard gate), and it must not fall too far
below the maximum intensity this vertex has seen recently (decaying memory,
which favors boundaries against darker surrounding tissue while letting a
vertex retry as the memory fades).
"""
from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, fields

import numpy as np

from .initializer import SeedModel
from .mesh import (
    TriMesh,
    VertexState,
    make_seed_cube,
    radial_smooth,
    recompute_normals_and_curvature,
    split_long_edges,
    voxelize,
)
from .volume import ImageVolume, mean_spacing, sample_at_world, sample_world_points


class ParamsError(ValueError):
    """Malformed inflation parameters."""


class SeedIntensityError(ValueError):
    """Seed center voxel falls outside the intensity range of interest."""


@dataclass
class InflationParams:
    """Knobs of the inflation loop; None fields resolve against volume and seed.

    base_step defaults to half the mean voxel spacing (sub-voxel steps so the
    hard gate cannot jump a one-voxel boundary), max_iterations to
    ceil(2 * seed radius / base_step) + 50, convergence_eps to 1% of the mean
    spacing.
    """

    split_factor: float = 2.95
    base_step: float | None = None  # mm per iteration
    cosine_exponent: float = 1.0
    curvature_gain: float = 1.0
    smooth_lambda: float = 0.2
    trim_percent: float = 0.02
    intensity_tolerance: float = 0.05
    memory_decay: float = 0.95
    max_iterations: int | None = None
    convergence_eps: float | None = None  # mm
    convergence_window: int = 5
    radius_stop_ratio: float = 1.0

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        if not self.split_factor > 0:
            raise ParamsError("split_factor must be positive")
        if self.base_step is not None and not self.base_step > 0:
            raise ParamsError("base_step must be positive")
        if self.cosine_exponent < 0:
            raise ParamsError("cosine_exponent must be >= 0")
        if self.curvature_gain < 0:
            raise ParamsError("curvature_gain must be >= 0")
        if not 0.0 <= self.smooth_lambda <= 1.0:
            raise ParamsError("smooth_lambda must be in [0, 1]")
        if not 0.0 <= self.trim_percent < 0.5:
            raise ParamsError("trim_percent must be in [0, 0.5)")
        if not 0.0 <= self.intensity_tolerance <= 1.0:
            raise ParamsError("intensity_tolerance must be in [0, 1]")
        if not 0.0 <= self.memory_decay <= 1.0:
            raise ParamsError("memory_decay must be in [0, 1]")
        if self.max_iterations is not None and self.max_iterations < 1:
            raise ParamsError("max_iterations must be >= 1")
        if self.convergence_eps is not None and self.convergence_eps < 0:
            raise ParamsError("convergence_eps must be >= 0")
        if self.convergence_window < 1:
            raise ParamsError("convergence_window must be >= 1")
        if not self.radius_stop_ratio > 0:
            raise ParamsError("radius_stop_ratio must be positive")

    @classmethod
    def from_dict(cls, obj) -> "InflationParams":
        if not isinstance(obj, dict):
            raise ParamsError("params must be a JSON object")
        known = {f.name for f in fields(cls)}
        for key in obj:
            if key not in known:
                raise ParamsError(f"unknown params field {key!r}")
        return cls(**obj)

    @classmethod
    def from_json(cls, text: str) -> "InflationParams":
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParamsError(f"params are not valid JSON: {exc}") from exc
        return cls.from_dict(obj)

    def resolve(self, volume: ImageVolume, seed: SeedModel) -> "InflationParams":
        """Concrete copy with every None default filled in."""
        step = mean_spacing(volume)
        base_step = self.base_step if self.base_step is not None else 0.5 * step
        max_iterations = (
            self.max_iterations
            if self.max_iterations is not None
            else math.ceil(2.0 * seed.radius / base_step) + 50
        )
        convergence_eps = (
            self.convergence_eps if self.convergence_eps is not None else 0.01 * step
        )
        return InflationParams(
            split_factor=self.split_factor,
            base_step=base_step,
            cosine_exponent=self.cosine_exponent,
            curvature_gain=self.curvature_gain,
            smooth_lambda=self.smooth_lambda,
            trim_percent=self.trim_percent,
            intensity_tolerance=self.intensity_tolerance,
            memory_decay=self.memory_decay,
            max_iterations=max_iterations,
            convergence_eps=convergence_eps,
            convergence_window=self.convergence_window,
            radius_stop_ratio=self.radius_stop_ratio,
        )


@dataclass
class SegStats:
    iterations_run: int
    final_mean_radius: float
    vertex_count: int
    triangle_count: int
    volume_cm3: float
    wall_time: float
    termination_reason: str  # radius_reached | converged | max_iterations

    def to_dict(self) -> dict:
        return {
            "iterations_run": self.iterations_run,
            "final_mean_radius": self.final_mean_radius,
            "vertex_count": self.vertex_count,
            "triangle_count": self.triangle_count,
            "volume_cm3": self.volume_cm3,
            "wall_time": self.wall_time,
            "termination_reason": self.termination_reason,
        }


def split_threshold(params: InflationParams, volume: ImageVolume) -> float:
    """Edge-split length bound: split_factor times the mean voxel spacing (mm)."""
    return params.split_factor * mean_spacing(volume)


def _speed(cos_phi: np.ndarray, curvature: np.ndarray, params: InflationParams) -> np.ndarray:
    """max(0, cos phi)^p / (1 + g * kappa): slower when the normal tilts away
    from the radial direction and near high-curvature features."""
    gated = np.maximum(cos_phi, 0.0)
    return gated ** params.cosine_exponent / (1.0 + params.curvature_gain * curvature)


def inflation_speed(state: VertexState, params: InflationParams) -> float:
    """Fraction of base_step this vertex may move, in [0, 1]."""
    cos_phi = float(np.dot(state.direction, state.normal))
    return float(_speed(np.asarray([cos_phi]), np.asarray([state.curvature]), params)[0])


def _move_vertices(mesh: TriMesh, volume: ImageVolume, seed: SeedModel,
                   params: InflationParams) -> tuple[np.ndarray, np.ndarray]:
    """Step 3 for every vertex at once; returns (accepted mask, destination values)."""
    cos_phi = np.einsum("ij,ij->i", mesh.directions, mesh.normals)
    speed = _speed(cos_phi, mesh.curvatures, params)
    step = speed * params.base_step
    candidates = mesh.center + (mesh.radii + step)[:, None] * mesh.directions
    values, in_grid = sample_world_points(volume, candidates)

    in_range = in_grid & (values >= seed.intensity_min) & (values <= seed.intensity_max)
    mesh.frozen = ~in_range
    memory_ok = values >= (1.0 - params.intensity_tolerance) * mesh.recent_max
    accepted = in_range & memory_ok

    mesh.radii = mesh.radii + np.where(accepted, step, 0.0)
    decayed = params.memory_decay * mesh.recent_max
    mesh.recent_max = np.where(
        accepted,
        np.maximum(decayed, values),
        np.where(in_range, decayed, mesh.recent_max),  # decay only on memory-test rejection
    )
    return accepted, values


def try_move_vertex(state: VertexState, volume: ImageVolume, seed: SeedModel,
                    params: InflationParams) -> float:
    """Single-vertex form of the move gate; mutates state, returns the radius.

    Same code path as the vectorized loop: a one-vertex scratch mesh is run
    through it so the two can never drift apart.
    """
    scratch = TriMesh.__new__(TriMesh)
    scratch.center = np.asarray(seed.center, dtype=np.float64)
    scratch.directions = np.asarray([state.direction], dtype=np.float64)
    scratch.normals = np.asarray([state.normal], dtype=np.float64)
    scratch.radii = np.asarray([state.radius], dtype=np.float64)
    scratch.curvatures = np.asarray([state.curvature], dtype=np.float64)
    scratch.recent_max = np.asarray([state.recent_max_intensity], dtype=np.float64)
    scratch.frozen = np.asarray([state.frozen])
    _move_vertices(scratch, volume, seed, params)
    state.radius = float(scratch.radii[0])
    state.recent_max_intensity = float(scratch.recent_max[0])
    state.frozen = bool(scratch.frozen[0])
    return state.radius


def run_segmentation(volume: ImageVolume, seed: SeedModel,
                     params: InflationParams | None = None,
                     observer=None, after_split_pass=None) -> tuple[TriMesh, SegStats]:
    """Inflate a seed-cube mesh until the seed radius is reached.

    observer(mesh, iteration, info) fires after each iteration with
    info = {accepted, destination_values, max_radial_change}; after_split_pass
    is forwarded to the edge splitter. Both default to None and exist for
    instrumentation only. Deterministic: same inputs give bit-identical meshes.
    """
    t0 = time.perf_counter()
    params = (params or InflationParams()).resolve(volume, seed)

    center_value = sample_at_world(volume, seed.center)
    if center_value is None or not seed.intensity_min <= center_value <= seed.intensity_max:
        raise SeedIntensityError("seed outside intensity range")

    step = mean_spacing(volume)
    mesh = make_seed_cube(np.asarray(seed.center), edge_length=step)
    mesh.recent_max[:] = center_value
    threshold = split_threshold(params, volume)

    reason = "max_iterations"
    iterations = 0
    recent_changes: list[float] = []
    for iteration in range(1, params.max_iterations + 1):
        radii_before = mesh.radii.copy()
        split_long_edges(mesh, threshold, after_pass=after_split_pass)
        recompute_normals_and_curvature(mesh)
        accepted, values = _move_vertices(mesh, volume, seed, params)
        radial_smooth(mesh, params.smooth_lambda)
        iterations = iteration

        n_before = len(radii_before)
        max_change = float(np.abs(mesh.radii[:n_before] - radii_before).max())
        if observer is not None:
            observer(mesh, iteration, {
                "accepted": accepted,
                "destination_values": values,
                "max_radial_change": max_change,
            })

        if float(mesh.radii.mean()) >= params.radius_stop_ratio * seed.radius:
            reason = "radius_reached"
            break
        recent_changes.append(max_change)
        if len(recent_changes) >= params.convergence_window and all(
            c < params.convergence_eps for c in recent_changes[-params.convergence_window:]
        ):
            reason = "converged"
            break

    mask = voxelize(mesh, volume)
    volume_cm3 = mask.count * volume.spacing[0] * volume.spacing[1] * volume.spacing[2] / 1000.0
    stats = SegStats(
        iterations_run=iterations,
        final_mean_radius=float(mesh.radii.mean()),
        vertex_count=mesh.vertex_count,
        triangle_count=mesh.triangle_count,
        volume_cm3=float(volume_cm3),
        wall_time=time.perf_counter() - t0,
        termination_reason=reason,
    )
    return mesh, stats
