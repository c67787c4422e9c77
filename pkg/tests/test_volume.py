import numpy as np
import pytest

from balloonseg import volume as V


def _random_volume(rng, dims=(8, 8, 8), spacing=(1.0, 1.0, 1.0), origin=(0.0, 0.0, 0.0)):
    data = rng.integers(0, 200, size=dims).astype(np.float32)
    return V.ImageVolume(dims, spacing, origin, data)


class TestGrid:
    def test_mean_spacing_isotropic(self):
        v = V.ImageVolume((2, 2, 2), (1, 1, 1), (0, 0, 0), np.zeros((2, 2, 2)))
        assert V.mean_spacing(v) == 1.0

    def test_mean_spacing_cube_root(self):
        v = V.ImageVolume((2, 2, 2), (1, 1, 8), (0, 0, 0), np.zeros((2, 2, 2)))
        assert V.mean_spacing(v) == pytest.approx(2.0, rel=1e-12)

    def test_mean_spacing_matches_log_mean(self):
        # cross-check the geometric mean against exp(mean(log s))
        spacing = (0.5, 0.5, 3.0)
        v = V.ImageVolume((2, 2, 2), spacing, (0, 0, 0), np.zeros((2, 2, 2)))
        expected = float(np.exp(np.mean(np.log(spacing))))
        assert V.mean_spacing(v) == pytest.approx(expected, rel=1e-12)
        assert V.mean_spacing(v) == pytest.approx(0.9085602964160698, rel=1e-12)

    def test_index_world_round_trip(self):
        rng = np.random.default_rng(3)
        v = _random_volume(rng, spacing=(0.7, 1.3, 2.9), origin=(-12.5, 4.25, 9.0))
        idx = np.array(np.meshgrid(*[np.arange(8)] * 3, indexing="ij")).reshape(3, -1).T
        back = v.world_to_index(v.index_to_world(idx))
        assert np.array_equal(np.rint(back).astype(int), idx)

    def test_invariant_checks(self):
        with pytest.raises(ValueError):
            V.ImageVolume((2, 2, 2), (1.0, 0.0, 1.0), (0, 0, 0), np.zeros((2, 2, 2)))
        with pytest.raises(ValueError):
            V.ImageVolume((2, 2, 2), (1, 1, 1), (0, 0, 0), np.zeros(9))


class TestSampling:
    def test_exact_voxel_center(self):
        rng = np.random.default_rng(0)
        v = _random_volume(rng, spacing=(0.5, 0.5, 2.0), origin=(1.0, -2.0, 3.0))
        p = v.index_to_world((2, 3, 4))
        assert V.sample_at_world(v, p) == float(v.data[2, 3, 4])

    def test_outside_returns_marker(self):
        rng = np.random.default_rng(1)
        v = _random_volume(rng)
        assert V.sample_at_world(v, (-10.0, 0.0, 0.0)) is None
        assert V.sample_at_world(v, (0.0, 0.0, 17.0)) is None

    def test_rounding_oracle(self):
        # offsets up to 0.49 * spacing must still hit the same voxel
        rng = np.random.default_rng(2)
        spacing = (0.8, 1.1, 2.5)
        v = _random_volume(rng, spacing=spacing)
        offsets = np.array([-0.49, -0.25, 0.0, 0.25, 0.49])
        for idx in [(0, 0, 0), (3, 5, 2), (7, 7, 7)]:
            base = v.index_to_world(idx)
            for ox in offsets:
                for oy in offsets:
                    for oz in offsets:
                        p = base + np.array([ox, oy, oz]) * np.asarray(spacing)
                        assert V.sample_at_world(v, p) == float(v.data[idx])

    def test_every_center_returns_own_scalar(self):
        rng = np.random.default_rng(4)
        v = _random_volume(rng, spacing=(1.5, 0.5, 1.0), origin=(3.0, -1.0, 2.0))
        for i in range(8):
            for j in range(8):
                for k in range(8):
                    p = v.index_to_world((i, j, k))
                    assert V.sample_at_world(v, p) == float(v.data[i, j, k])


def _write_mha(path, header_lines, payload: bytes):
    path.write_bytes(("\n".join(header_lines) + "\n").encode("ascii") + payload)


class TestLoad:
    def test_uchar_identity_payload(self, tmp_path):
        path = tmp_path / "sevens.mha"
        _write_mha(path, [
            "ObjectType = Image",
            "NDims = 3",
            "DimSize = 4 4 4",
            "ElementType = MET_UCHAR",
            "ElementDataFile = LOCAL",
        ], bytes([7] * 64))
        v = V.load_metaimage(path)
        assert v.dims == (4, 4, 4)
        assert v.spacing == (1.0, 1.0, 1.0)
        assert np.all(v.data == 7.0)

    def test_ndims_2_rejected(self, tmp_path):
        path = tmp_path / "flat.mha"
        _write_mha(path, [
            "NDims = 2",
            "DimSize = 4 4",
            "ElementType = MET_UCHAR",
            "ElementDataFile = LOCAL",
        ], bytes(16))
        with pytest.raises(V.UnsupportedDimensionalityError, match="unsupported dimensionality"):
            V.load_metaimage(path)

    def test_unsupported_element_type(self, tmp_path):
        path = tmp_path / "d.mha"
        _write_mha(path, [
            "NDims = 3",
            "DimSize = 2 2 2",
            "ElementType = MET_DOUBLE",
            "ElementDataFile = LOCAL",
        ], bytes(64))
        with pytest.raises(V.UnsupportedElementTypeError):
            V.load_metaimage(path)

    def test_compressed_rejected(self, tmp_path):
        path = tmp_path / "c.mha"
        _write_mha(path, [
            "NDims = 3",
            "DimSize = 2 2 2",
            "CompressedData = True",
            "ElementType = MET_UCHAR",
            "ElementDataFile = LOCAL",
        ], bytes(8))
        with pytest.raises(V.CompressedDataError):
            V.load_metaimage(path)

    def test_short_payload(self, tmp_path):
        path = tmp_path / "s.mha"
        _write_mha(path, [
            "NDims = 3",
            "DimSize = 4 4 4",
            "ElementType = MET_SHORT",
            "ElementDataFile = LOCAL",
        ], bytes(10))
        with pytest.raises(V.PayloadError, match="short raw payload"):
            V.load_metaimage(path)

    def test_missing_raw_file(self, tmp_path):
        path = tmp_path / "m.mhd"
        _write_mha(path, [
            "NDims = 3",
            "DimSize = 2 2 2",
            "ElementType = MET_UCHAR",
            "ElementDataFile = m.raw",
        ], b"")
        with pytest.raises(V.PayloadError, match="missing"):
            V.load_metaimage(path)

    def test_big_endian_shorts(self, tmp_path):
        path = tmp_path / "be.mha"
        values = np.array([258, -2, 3, 4, 5, 6, 7, 8], dtype=">i2")
        _write_mha(path, [
            "NDims = 3",
            "DimSize = 2 2 2",
            "BinaryDataByteOrderMSB = True",
            "ElementType = MET_SHORT",
            "ElementDataFile = LOCAL",
        ], values.tobytes())
        v = V.load_metaimage(path)
        assert np.array_equal(v.data.ravel(order="F"), values.astype(np.float32))

    def test_payload_is_x_fastest(self, tmp_path):
        path = tmp_path / "order.mha"
        _write_mha(path, [
            "NDims = 3",
            "DimSize = 2 3 2",
            "ElementType = MET_UCHAR",
            "ElementDataFile = LOCAL",
        ], bytes(range(12)))
        v = V.load_metaimage(path)
        assert v.data[1, 0, 0] == 1.0
        assert v.data[0, 1, 0] == 2.0
        assert v.data[0, 0, 1] == 6.0


class TestSaveRoundTrip:
    def test_empty_mask_all_zero_payload(self, tmp_path):
        mask = V.BinaryMask((3, 3, 3), (1, 1, 1), (0, 0, 0), np.zeros((3, 3, 3), bool))
        path = tmp_path / "empty.mha"
        V.save_mask(mask, path)
        raw = path.read_bytes()
        assert raw[-27:] == bytes(27)

    def test_full_mask_all_ones(self, tmp_path):
        mask = V.BinaryMask((3, 3, 3), (1, 1, 1), (0, 0, 0), np.ones((3, 3, 3), bool))
        path = tmp_path / "full.mha"
        V.save_mask(mask, path)
        assert path.read_bytes()[-27:] == b"\x01" * 27

    def test_random_mask_round_trip(self, tmp_path):
        rng = np.random.default_rng(5)
        bits = rng.random((8, 8, 8)) > 0.5
        mask = V.BinaryMask((8, 8, 8), (0.5, 0.5, 2.0), (1.0, 2.0, 3.0), bits)
        for name in ("m.mha", "m.mhd"):
            path = tmp_path / name
            V.save_mask(mask, path)
            back = V.mask_from_volume(V.load_metaimage(path))
            assert back.same_grid(mask)
            assert np.array_equal(back.bits, mask.bits)

    def test_large_short_phantom_round_trip(self, tmp_path):
        # write-then-read oracle at clinical size, bit-equal scalars
        rng = np.random.default_rng(6)
        dims = (512, 512, 80)
        data = rng.integers(-1024, 3000, size=dims).astype(np.float32)
        vol = V.ImageVolume(dims, (0.5, 0.5, 3.0), (-120.0, -120.0, 0.0), data)
        path = tmp_path / "big.mhd"
        V.save_volume(vol, path, element_type="MET_SHORT")
        back = V.load_metaimage(path)
        assert back.dims == dims
        assert back.spacing == vol.spacing
        assert back.origin == vol.origin
        assert np.array_equal(back.data, vol.data)

    def test_save_volume_auto_picks_float_for_noise(self, tmp_path):
        data = np.full((2, 2, 2), 1.5, dtype=np.float32)
        vol = V.ImageVolume((2, 2, 2), (1, 1, 1), (0, 0, 0), data)
        path = tmp_path / "f.mha"
        V.save_volume(vol, path)
        back = V.load_metaimage(path)
        assert np.array_equal(back.data, data)

    def test_header_metadata_reader(self, tmp_path):
        mask = V.BinaryMask((4, 5, 6), (1.5, 2.0, 0.5), (9.0, 8.0, 7.0), np.zeros((4, 5, 6), bool))
        path = tmp_path / "h.mha"
        V.save_mask(mask, path)
        dims, spacing, origin = V.read_metaimage_header(path)
        assert dims == (4, 5, 6)
        assert spacing == (1.5, 2.0, 0.5)
        assert origin == (9.0, 8.0, 7.0)
