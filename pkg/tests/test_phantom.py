import numpy as np
import pytest

from balloonseg import mesh as M
from balloonseg import phantom as P
from balloonseg.initializer import derive_seed, rasterize_contour
from helpers import make_sphere_mesh


def _sphere_spec(**overrides):
    kw = dict(kind="sphere", dims=(32, 32, 32), spacing=(1.0, 1.0, 1.0),
              center=(16.0, 16.0, 16.0), radii=(10.0,))
    kw.update(overrides)
    return P.PhantomSpec(**kw)


class TestSpecValidation:
    def test_bad_kind(self):
        with pytest.raises(P.PhantomSpecError):
            _sphere_spec(kind="cube")

    def test_ellipsoid_needs_three_radii(self):
        with pytest.raises(P.PhantomSpecError, match="3 radii"):
            _sphere_spec(kind="ellipsoid")

    def test_blob_amplitude_bound(self):
        with pytest.raises(P.PhantomSpecError, match="amplitude"):
            _sphere_spec(kind="star_blob", blob_harmonics=((2, 0.6), (3, 0.5)))

    def test_fg_bg_must_differ(self):
        with pytest.raises(P.PhantomSpecError):
            _sphere_spec(fg_intensity=5.0, bg_intensity=5.0)

    def test_unknown_json_key(self):
        with pytest.raises(P.PhantomSpecError, match="unknown phantom spec field"):
            P.PhantomSpec.from_json('{"kind": "sphere", "size": 3}')

    def test_json_round_trip(self):
        spec = P.PhantomSpec.from_json(
            '{"kind": "star_blob", "dims": [32, 32, 32], "spacing": [1, 1, 1],'
            ' "center": [16, 16, 16], "radii": [9.0],'
            ' "blob_harmonics": [[2, 0.1], [3, 0.05]], "noise_sigma": 2.0,'
            ' "rng_seed": 4}')
        assert spec.blob_harmonics == ((2, 0.1), (3, 0.05))


class TestGenerate:
    def test_sphere_ground_truth_matches_scalar_loop(self):
        spec = _sphere_spec(spacing=(1.0, 1.5, 0.8), center=(15.0, 20.0, 12.0))
        _, gt, _ = P.generate(spec)
        # independent scalar triple loop over voxel centers
        cx, cy, cz = spec.center
        for i in range(0, 32, 3):
            for j in range(0, 32, 3):
                for k in range(0, 32, 3):
                    d2 = ((i * 1.0 - cx) ** 2 + (j * 1.5 - cy) ** 2
                          + (k * 0.8 - cz) ** 2)
                    assert bool(gt.bits[i, j, k]) == (d2 <= 100.0)

    def test_sphere_count_near_analytic(self):
        _, gt, _ = P.generate(_sphere_spec(radii=(10.0,)))
        analytic = 4.0 / 3.0 * np.pi * 1000.0
        # one boundary layer of voxels: surface area * spacing
        band = 4.0 * np.pi * 100.0
        assert abs(gt.count - analytic) < band

    def test_two_values_when_noiseless(self):
        vol, _, _ = P.generate(_sphere_spec(fg_intensity=6.0, bg_intensity=5.0))
        assert set(np.unique(vol.data)) == {5.0, 6.0}

    def test_determinism(self):
        spec = _sphere_spec(noise_sigma=4.0, rng_seed=77)
        v1, g1, c1 = P.generate(spec)
        v2, g2, c2 = P.generate(spec)
        assert np.array_equal(v1.data, v2.data)
        assert np.array_equal(g1.bits, g2.bits)
        assert np.array_equal(c1.points, c2.points)

    def test_different_seeds_differ(self):
        v1, _, _ = P.generate(_sphere_spec(noise_sigma=4.0, rng_seed=1))
        v2, _, _ = P.generate(_sphere_spec(noise_sigma=4.0, rng_seed=2))
        assert not np.array_equal(v1.data, v2.data)

    def test_ellipsoid_extents(self):
        spec = _sphere_spec(kind="ellipsoid", dims=(48, 48, 48),
                            center=(24.0, 24.0, 24.0), radii=(14.0, 9.0, 6.0))
        _, gt, _ = P.generate(spec)
        assert gt.bits[24 + 13, 24, 24] and not gt.bits[24 + 15, 24, 24]
        assert gt.bits[24, 24 + 8, 24] and not gt.bits[24, 24 + 10, 24]
        assert gt.bits[24, 24, 24 + 5] and not gt.bits[24, 24, 24 + 7]


class TestStarBlob:
    def _blob_spec(self):
        return P.PhantomSpec(kind="star_blob", dims=(64, 64, 64),
                             spacing=(1.0, 1.0, 1.0), center=(32.0, 32.0, 32.0),
                             radii=(15.0,),
                             blob_harmonics=((2, 0.10), (3, 0.08), (5, 0.07)))

    def test_ground_truth_is_star_shaped(self):
        # sample the analytic radial function onto a fine sphere mesh and run
        # the mesh module's parity test: one crossing in every direction
        spec = self._blob_spec()
        m = make_sphere_mesh(spec.center, spec.radii[0], edge=2.0)
        rel = m.directions
        dist = np.ones(len(rel))
        reach = P._blob_reach(spec, rel[:, 0], rel[:, 1], dist)
        m.radii = reach.copy()
        rng = np.random.default_rng(31)
        dirs = rng.standard_normal((1000, 3))
        dirs /= np.linalg.norm(dirs, axis=1)[:, None]
        assert np.all(M.count_ray_crossings(m, dirs) == 1)

    def test_blob_reach_positive_and_bounded(self):
        spec = self._blob_spec()
        rng = np.random.default_rng(5)
        rel = rng.standard_normal((5000, 3))
        dist = np.linalg.norm(rel, axis=1)
        reach = P._blob_reach(spec, rel[:, 0], rel[:, 1], dist)
        assert np.all(reach > 0)
        assert np.all(reach <= 15.0 * 1.25 + 1e-9)
        assert np.all(reach >= 15.0 * 0.75 - 1e-9)


class TestSuggestedContour:
    def test_contour_is_usable_and_accurate(self):
        spec = _sphere_spec(dims=(48, 48, 48), center=(24.0, 24.0, 24.0))
        vol, gt, contour = P.generate(spec)
        assert contour.slice_axis == "z"
        assert contour.slice_index == 24
        assert len(contour.points) == 24
        assert len(rasterize_contour(contour, vol)) > 100
        seed = derive_seed(contour, vol)
        assert seed.center[0] == pytest.approx(24.0, abs=0.2)
        assert seed.radius == pytest.approx(10.0, rel=0.02)

    def test_contour_points_lie_on_boundary(self):
        spec = _sphere_spec()
        vol, _, contour = P.generate(spec)
        for x, y in contour.points:
            world = np.array([x * spec.spacing[0], y * spec.spacing[1],
                              contour.slice_index * spec.spacing[2]])
            r = np.linalg.norm(world - np.asarray(spec.center))
            assert r == pytest.approx(10.0, abs=1e-6)
