"""Closed triangle meshes that stay star-shaped about a fixed center.

Every vertex is stored as (unit direction, radius) from the center, so its
position is ``center + radius * direction`` at all times. The direction never
changes after creation; only the radius moves. That single invariant buys
self-intersection freedom, a single-valued radial function R(direction), and
an exact ray-cast voxelization.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .volume import BinaryMask, ImageVolume


class MeshError(ValueError):
    pass


class SplitConvergenceError(MeshError):
    """Edge splitting hit the pass cap with long edges remaining."""


class NotWatertightError(MeshError):
    """A radial ray from the center pierced no triangle."""


@dataclass
class VertexState:
    """Per-vertex bookkeeping; position == center + radius * direction."""

    direction: np.ndarray  # unit vector from center
    radius: float  # mm, >= 0
    normal: np.ndarray  # unit outward surface normal
    curvature: float  # dimensionless 1-ring estimate
    recent_max_intensity: float  # decaying memory for the intensity gate
    frozen: bool = False  # hard-gate rejection marker for the last iteration


# outward-wound triangulation of a cube; corners in (-,-,-) .. (-,+,+) order
_CUBE_SIGNS = np.array(
    [
        [-1, -1, -1],
        [+1, -1, -1],
        [+1, +1, -1],
        [-1, +1, -1],
        [-1, -1, +1],
        [+1, -1, +1],
        [+1, +1, +1],
        [-1, +1, +1],
    ],
    dtype=np.float64,
)
_CUBE_TRIANGLES = np.array(
    [
        [0, 3, 2], [0, 2, 1],  # z-
        [4, 5, 6], [4, 6, 7],  # z+
        [0, 1, 5], [0, 5, 4],  # y-
        [2, 3, 7], [2, 7, 6],  # y+
        [0, 4, 7], [0, 7, 3],  # x-
        [1, 2, 6], [1, 6, 5],  # x+
    ],
    dtype=np.int64,
)


class TriMesh:
    """Closed 2-manifold triangle mesh, star-shaped about ``center``."""

    def __init__(self, center, directions, radii, triangles, recent_max=None):
        self.center = np.asarray(center, dtype=np.float64).copy()
        directions = np.asarray(directions, dtype=np.float64)
        norms = np.linalg.norm(directions, axis=1)
        if np.any(norms <= 0):
            raise MeshError("vertex direction has zero length")
        self.directions = directions / norms[:, None]
        self.radii = np.asarray(radii, dtype=np.float64).copy()
        if np.any(self.radii <= 0):
            raise MeshError("star shape requires every vertex at positive radius")
        self.triangles = np.asarray(triangles, dtype=np.int64).copy()
        n = len(self.radii)
        self.normals = self.directions.copy()
        self.curvatures = np.zeros(n, dtype=np.float64)
        self.recent_max = (
            np.asarray(recent_max, dtype=np.float64).copy()
            if recent_max is not None
            else np.zeros(n, dtype=np.float64)
        )
        self.frozen = np.zeros(n, dtype=bool)
        self._invalidate()

    @classmethod
    def from_positions(cls, center, positions, triangles) -> "TriMesh":
        rel = np.asarray(positions, dtype=np.float64) - np.asarray(center, dtype=np.float64)
        radii = np.linalg.norm(rel, axis=1)
        if np.any(radii <= 0):
            raise MeshError("vertex coincides with the star center")
        return cls(center, rel / radii[:, None], radii, triangles)

    # --- derived geometry -----------------------------------------------------

    @property
    def positions(self) -> np.ndarray:
        return self.center + self.radii[:, None] * self.directions

    @property
    def vertex_count(self) -> int:
        return len(self.radii)

    @property
    def triangle_count(self) -> int:
        return len(self.triangles)

    def vertex_state(self, i: int) -> VertexState:
        return VertexState(
            direction=self.directions[i].copy(),
            radius=float(self.radii[i]),
            normal=self.normals[i].copy(),
            curvature=float(self.curvatures[i]),
            recent_max_intensity=float(self.recent_max[i]),
            frozen=bool(self.frozen[i]),
        )

    def _invalidate(self) -> None:
        self._edges = None
        self._edge_counts = None
        self._ring_src = None
        self._ring_dst = None
        self._degree = None

    def _build_connectivity(self) -> None:
        tri = self.triangles
        e = np.vstack([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]])
        e.sort(axis=1)
        self._edges, self._edge_counts = np.unique(e, axis=0, return_counts=True)
        self._ring_src = np.concatenate([self._edges[:, 0], self._edges[:, 1]])
        self._ring_dst = np.concatenate([self._edges[:, 1], self._edges[:, 0]])
        self._degree = np.bincount(self._ring_src, minlength=self.vertex_count)

    @property
    def edges(self) -> np.ndarray:
        if self._edges is None:
            self._build_connectivity()
        return self._edges

    @property
    def edge_counts(self) -> np.ndarray:
        if self._edge_counts is None:
            self._build_connectivity()
        return self._edge_counts

    def is_closed_manifold(self) -> bool:
        return bool(np.all(self.edge_counts == 2))

    def euler_characteristic(self) -> int:
        return self.vertex_count - len(self.edges) + self.triangle_count

    def signed_volume(self) -> float:
        """Fan volume about the center; positive for outward winding."""
        rel = self.positions - self.center
        a = rel[self.triangles[:, 0]]
        b = rel[self.triangles[:, 1]]
        c = rel[self.triangles[:, 2]]
        return float(np.einsum("ij,ij->i", np.cross(a, b), c).sum() / 6.0)

    def neighbor_mean(self, values: np.ndarray) -> np.ndarray:
        """Per-vertex mean of a scalar field over the 1-ring."""
        if self._ring_src is None:
            self._build_connectivity()
        sums = np.bincount(self._ring_src, weights=values[self._ring_dst],
                           minlength=self.vertex_count)
        return sums / self._degree


def make_seed_cube(center, edge_length: float) -> TriMesh:
    """Triangulated cube seed; inflation rounds it into a sphere in a few steps."""
    if not edge_length > 0:
        raise MeshError("edge_length must be positive")
    directions = _CUBE_SIGNS / np.sqrt(3.0)
    radii = np.full(8, edge_length * np.sqrt(3.0) / 2.0)
    return TriMesh(center, directions, radii, _CUBE_TRIANGLES)


def _pack(a: np.ndarray, b: np.ndarray, base: int) -> np.ndarray:
    lo = np.minimum(a, b).astype(np.int64)
    hi = np.maximum(a, b).astype(np.int64)
    return lo * base + hi


def _split_pass(m: TriMesh, long_edges: np.ndarray) -> None:
    pos = m.positions
    base = m.vertex_count
    midpoint_index: dict[int, int] = {}
    new_dirs, new_radii, new_mem = [], [], []
    for a, b in long_edges:
        mid = 0.5 * (pos[a] + pos[b])
        rel = mid - m.center
        r = float(np.linalg.norm(rel))
        if r <= 0:
            raise MeshError("edge midpoint coincides with the star center")
        midpoint_index[int(a) * base + int(b)] = base + len(new_radii)
        new_dirs.append(rel / r)
        new_radii.append(r)
        new_mem.append(max(m.recent_max[a], m.recent_max[b]))

    tri = m.triangles
    packed = [
        _pack(tri[:, 0], tri[:, 1], base),
        _pack(tri[:, 1], tri[:, 2], base),
        _pack(tri[:, 2], tri[:, 0], base),
    ]
    long_keys = _pack(long_edges[:, 0], long_edges[:, 1], base)
    touched = np.zeros(len(tri), dtype=bool)
    for pk in packed:
        touched |= np.isin(pk, long_keys)

    out = list(tri[~touched])
    for ti in np.nonzero(touched)[0]:
        a, b, c = (int(v) for v in tri[ti])
        mab = midpoint_index.get(packed[0][ti])
        mbc = midpoint_index.get(packed[1][ti])
        mca = midpoint_index.get(packed[2][ti])
        # rotate so the first corner leads a marked edge; keeps one pattern table
        if mab is not None and mbc is not None and mca is not None:
            children = [(a, mab, mca), (mab, b, mbc), (mca, mbc, c), (mab, mbc, mca)]
        elif mab is not None and mbc is not None:
            children = [(mab, b, mbc), (a, mab, mbc), (a, mbc, c)]
        elif mbc is not None and mca is not None:
            children = [(mbc, c, mca), (b, mbc, mca), (b, mca, a)]
        elif mca is not None and mab is not None:
            children = [(mca, a, mab), (c, mca, mab), (c, mab, b)]
        elif mab is not None:
            children = [(a, mab, c), (mab, b, c)]
        elif mbc is not None:
            children = [(b, mbc, a), (mbc, c, a)]
        else:
            children = [(c, mca, b), (mca, a, b)]
        out.extend(children)

    m.directions = np.vstack([m.directions, np.asarray(new_dirs)])
    m.radii = np.concatenate([m.radii, np.asarray(new_radii)])
    m.normals = np.vstack([m.normals, np.asarray(new_dirs)])
    m.curvatures = np.concatenate([m.curvatures, np.zeros(len(new_radii))])
    m.recent_max = np.concatenate([m.recent_max, np.asarray(new_mem)])
    m.frozen = np.concatenate([m.frozen, np.zeros(len(new_radii), dtype=bool)])
    m.triangles = np.asarray(out, dtype=np.int64)
    m._invalidate()


def _long_edges(m: TriMesh, threshold: float) -> np.ndarray:
    pos = m.positions
    edges = m.edges
    lengths = np.linalg.norm(pos[edges[:, 0]] - pos[edges[:, 1]], axis=1)
    return edges[lengths > threshold]


def split_long_edges(m: TriMesh, threshold: float, after_pass=None,
                     max_passes: int = 16) -> None:
    """Midpoint-split every edge longer than ``threshold`` (mm), repeatedly.

    New vertices inherit the chord midpoint's direction and radius, and the
    max of the parents' intensity memories (conservative for the move gate).
    """
    if not threshold > 0:
        raise MeshError("threshold must be positive")
    for _ in range(max_passes):
        todo = _long_edges(m, threshold)
        if len(todo) == 0:
            return
        _split_pass(m, todo)
        if after_pass is not None:
            after_pass(m)
    if len(_long_edges(m, threshold)) > 0:
        raise SplitConvergenceError("split did not converge")


def recompute_normals_and_curvature(m: TriMesh) -> None:
    """Area-weighted vertex normals plus a normalized umbrella curvature.

    curvature = |ring centroid - vertex| / (2 * mean ring distance): scale-free,
    zero on a plane, larger at ridges/peaks/dents; exactly the 1-neighborhood
    estimate the inflation speed law needs.
    """
    pos = m.positions
    tri = m.triangles
    # cross product = 2 * area * unit normal, so summing is area weighting
    face = np.cross(pos[tri[:, 1]] - pos[tri[:, 0]], pos[tri[:, 2]] - pos[tri[:, 0]])
    acc = np.zeros_like(pos)
    for k in range(3):
        np.add.at(acc, tri[:, k], face)
    norms = np.linalg.norm(acc, axis=1)
    degenerate = norms <= 0
    if np.any(degenerate):
        acc[degenerate] = m.directions[degenerate]
        norms[degenerate] = 1.0
    m.normals = acc / norms[:, None]

    if m._ring_src is None:
        m._build_connectivity()
    assert np.all(m._degree > 0), "isolated vertex on a closed mesh"
    nbr = np.column_stack([m.neighbor_mean(pos[:, k]) for k in range(3)])
    delta = nbr - pos
    dist = np.linalg.norm(pos[m._ring_dst] - pos[m._ring_src], axis=1)
    ring = np.bincount(m._ring_src, weights=dist, minlength=m.vertex_count) / m._degree
    m.curvatures = np.linalg.norm(delta, axis=1) / (2.0 * ring)


def radial_smooth(m: TriMesh, lam: float) -> None:
    """Blend every radius toward its 1-ring mean; directions stay fixed.

    A convex combination of radii can neither raise the max nor lower the min,
    and it provably preserves the star shape (positions never leave their rays).
    """
    if not 0.0 <= lam <= 1.0:
        raise MeshError(f"lambda must be in [0, 1], got {lam}")
    if lam == 0.0:
        return
    m.radii = (1.0 - lam) * m.radii + lam * m.neighbor_mean(m.radii)


# --- star-shape ray-cast voxelization ------------------------------------------


def _spherical_membership(edge_normals: np.ndarray, dirs: np.ndarray) -> np.ndarray:
    """min over the three edge-plane signs; >= 0 means inside the spherical triangle.

    edge_normals has shape (..., 3, 3); dirs must broadcast to (..., 3).
    """
    s = np.einsum("...ej,...j->...e", edge_normals, dirs)
    return s.min(axis=-1)


def radial_distances(m: TriMesh, dirs: np.ndarray, k: int = 16) -> np.ndarray:
    """R(u) for an (N, 3) array of unit directions via the star ray-cast.

    The radial projections of the triangles tile the direction sphere exactly
    once, so each direction is matched to the triangle whose spherical image
    contains it (KD-tree shortlist, brute-force fallback), then intersected
    with that triangle's plane.
    """
    dirs = np.atleast_2d(np.asarray(dirs, dtype=np.float64))
    tri = m.triangles
    d0, d1, d2 = (m.directions[tri[:, i]] for i in range(3))
    edge_normals = np.stack(
        [np.cross(d0, d1), np.cross(d1, d2), np.cross(d2, d0)], axis=1
    )  # (T, 3, 3)
    pos = m.positions
    p0 = pos[tri[:, 0]]
    face_normals = np.cross(pos[tri[:, 1]] - p0, pos[tri[:, 2]] - p0)
    plane_offset = np.einsum("ij,ij->i", p0 - m.center, face_normals)

    n_tri = len(tri)
    chosen = np.full(len(dirs), -1, dtype=np.int64)
    if n_tri <= k:
        # few triangles: test them all at once
        signs = np.einsum("tkj,nj->ntk", edge_normals, dirs).min(axis=2)
        chosen = np.argmax(signs, axis=1)
        unresolved = signs[np.arange(len(dirs)), chosen] < -1e-9
    else:
        centroids = d0 + d1 + d2
        centroids /= np.linalg.norm(centroids, axis=1)[:, None]
        tree = cKDTree(centroids)
        _, cand = tree.query(dirs, k=k)
        cand = np.atleast_2d(cand)
        signs = _spherical_membership(edge_normals[cand], dirs[:, None, :])
        pick = np.argmax(signs, axis=1)
        rows = np.arange(len(dirs))
        chosen = cand[rows, pick]
        unresolved = signs[rows, pick] < -1e-9

    if np.any(unresolved):
        for i in np.nonzero(unresolved)[0]:
            s = np.einsum("tkj,j->tk", edge_normals, dirs[i]).min(axis=1)
            t = int(np.argmax(s))
            if s[t] < -1e-6:
                raise NotWatertightError("mesh not watertight")
            chosen[i] = t

    denom = np.einsum("ij,ij->i", face_normals[chosen], dirs)
    if np.any(denom <= 0):
        raise NotWatertightError("mesh not watertight")
    return plane_offset[chosen] / denom


def voxelize(m: TriMesh, grid: ImageVolume) -> BinaryMask:
    """Exact star-shape voxelization: voxel center inside iff |p - c| <= R(u)."""
    bits = np.zeros(grid.dims, dtype=bool)
    center = m.center
    r_max = float(m.radii.max())
    spacing = np.asarray(grid.spacing)
    origin = np.asarray(grid.origin)
    lo = np.maximum(np.ceil((center - r_max - origin) / spacing).astype(int), 0)
    hi = np.minimum(
        np.floor((center + r_max - origin) / spacing).astype(int),
        np.asarray(grid.dims) - 1,
    )
    if np.any(hi < lo):
        return BinaryMask(grid.dims, grid.spacing, grid.origin, bits)

    axes = [np.arange(lo[k], hi[k] + 1) for k in range(3)]
    ii, jj, kk = np.meshgrid(*axes, indexing="ij")
    idx = np.column_stack([ii.ravel(), jj.ravel(), kk.ravel()])
    world = origin + idx * spacing
    rel = world - center
    dist = np.linalg.norm(rel, axis=1)
    inside = np.zeros(len(idx), dtype=bool)
    at_center = dist == 0.0
    inside[at_center] = True
    off = ~at_center
    if np.any(off):
        dirs = rel[off] / dist[off, None]
        reach = radial_distances(m, dirs)
        inside[off] = dist[off] <= reach
    sel = idx[inside]
    bits[sel[:, 0], sel[:, 1], sel[:, 2]] = True
    return BinaryMask(grid.dims, grid.spacing, grid.origin, bits)


def count_ray_crossings(m: TriMesh, dirs: np.ndarray) -> np.ndarray:
    """Moller-Trumbore crossing counts for rays from the center; the parity oracle.

    Independent of the spherical-membership route used by voxelize: a closed
    star-shaped surface must be crossed exactly once in every direction.
    """
    pos = m.positions
    tri = m.triangles
    v0 = pos[tri[:, 0]]
    e1 = pos[tri[:, 1]] - v0
    e2 = pos[tri[:, 2]] - v0
    tvec = m.center - v0
    counts = np.empty(len(dirs), dtype=np.int64)
    for i, d in enumerate(np.atleast_2d(dirs)):
        pvec = np.cross(d, e2)
        det = np.einsum("ij,ij->i", e1, pvec)
        ok = np.abs(det) > 1e-300
        inv = np.where(ok, 1.0 / np.where(ok, det, 1.0), 0.0)
        u = np.einsum("ij,ij->i", tvec, pvec) * inv
        qvec = np.cross(tvec, e1)
        v = np.einsum("j,ij->i", d, qvec) * inv
        t = np.einsum("ij,ij->i", e2, qvec) * inv
        counts[i] = int(np.sum(ok & (u >= 0) & (v >= 0) & (u + v <= 1) & (t > 0)))
    return counts


# --- export ---------------------------------------------------------------------


def obj_bytes(m: TriMesh) -> bytes:
    lines = [f"v {x!r} {y!r} {z!r}" for x, y, z in m.positions.tolist()]
    lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in m.triangles.tolist()]
    return ("\n".join(lines) + "\n").encode("ascii")


def stl_bytes(m: TriMesh) -> bytes:
    pos = m.positions.astype(np.float32)
    tri = m.triangles
    n = np.cross(
        pos[tri[:, 1]] - pos[tri[:, 0]], pos[tri[:, 2]] - pos[tri[:, 0]]
    ).astype(np.float32)
    norms = np.linalg.norm(n, axis=1)
    n[norms > 0] /= norms[norms > 0, None]
    rec = np.zeros(
        len(tri),
        dtype=np.dtype(
            [("normal", "<f4", 3), ("verts", "<f4", (3, 3)), ("attr", "<u2")]
        ),
    )
    rec["normal"] = n
    rec["verts"] = pos[tri]
    header = b"balloonseg binary STL".ljust(80, b"\0")
    return header + struct.pack("<I", len(tri)) + rec.tobytes()


def write_obj(m: TriMesh, path) -> None:
    Path(path).write_bytes(obj_bytes(m))


def write_stl(m: TriMesh, path) -> None:
    Path(path).write_bytes(stl_bytes(m))
