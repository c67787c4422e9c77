"""Shared test utilities: topology assertions, sphere meshes, brute-force oracles.

The oracles here are deliberately written as plain scalar loops, independent of
the vectorized production code paths they check.
"""
from __future__ import annotations

import numpy as np

from balloonseg import mesh as M
from balloonseg.volume import BinaryMask


def assert_topology(m: M.TriMesh) -> None:
    assert m.is_closed_manifold(), "every edge must bound exactly 2 triangles"
    assert m.euler_characteristic() == 2
    assert m.signed_volume() > 0


def make_sphere_mesh(center, radius: float, edge: float) -> M.TriMesh:
    """Sphere-like mesh: seed cube split to the edge budget, radii projected."""
    m = M.make_seed_cube(np.asarray(center, dtype=np.float64), edge_length=radius)

    def project(mesh):
        mesh.radii[:] = radius

    project(m)
    M.split_long_edges(m, edge, after_pass=project, max_passes=32)
    return m


# standard icosahedron: 12 equivalent vertices, 20 triangles, outward wound
_PHI = (1.0 + np.sqrt(5.0)) / 2.0
ICOSA_VERTS = np.array(
    [
        [-1, _PHI, 0], [1, _PHI, 0], [-1, -_PHI, 0], [1, -_PHI, 0],
        [0, -1, _PHI], [0, 1, _PHI], [0, -1, -_PHI], [0, 1, -_PHI],
        [_PHI, 0, -1], [_PHI, 0, 1], [-_PHI, 0, -1], [-_PHI, 0, 1],
    ],
    dtype=np.float64,
)
ICOSA_FACES = np.array(
    [
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ],
    dtype=np.int64,
)


def make_icosahedron(center=(0.0, 0.0, 0.0), radius: float = 1.0) -> M.TriMesh:
    verts = ICOSA_VERTS / np.linalg.norm(ICOSA_VERTS[0]) * radius + np.asarray(center)
    m = M.TriMesh.from_positions(center, verts, ICOSA_FACES)
    assert_topology(m)
    return m


def point_in_polygon_even_odd(x: float, y: float, poly) -> bool:
    """Scalar ray-parity test, coded independently of the vectorized rasterizer."""
    inside = False
    n = len(poly)
    for i in range(n):
        x0, y0 = poly[i - 1]
        x1, y1 = poly[i]
        if (y0 > y) != (y1 > y):
            xcross = x0 + (x1 - x0) * (y - y0) / (y1 - y0)
            if x < xcross:
                inside = not inside
    return inside


def brute_force_dsc(a: BinaryMask, r: BinaryMask) -> float:
    """Triple-loop voxel counting; the Eq.-style oracle for dsc()."""
    assert a.dims == r.dims
    inter = na = nr = 0
    nx, ny, nz = a.dims
    for i in range(nx):
        for j in range(ny):
            for k in range(nz):
                va = bool(a.bits[i, j, k])
                vr = bool(r.bits[i, j, k])
                na += va
                nr += vr
                inter += va and vr
    return 100.0 * 2.0 * inter / (na + nr)


def circle_contour(cx: float, cy: float, radius_px: float, n: int = 256,
                   axis: str = "z", slice_index: int = 0):
    from balloonseg.initializer import InitContour

    angles = 2.0 * np.pi * np.arange(n) / n
    pts = np.column_stack([cx + radius_px * np.cos(angles), cy + radius_px * np.sin(angles)])
    return InitContour(axis, slice_index, pts)
