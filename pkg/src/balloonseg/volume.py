"""Scalar 3D image volumes with physical spacing, plus MetaImage (.mha/.mhd) I/O.

Conventions used throughout the package:

* a volume is addressed as ``data[x, y, z]`` (the on-disk payload is x-fastest,
  so ``data.ravel(order="F")`` reproduces the file layout bit for bit);
* integer indices address voxel *centers*; world coordinates are millimetres
  with ``world = origin + index * spacing``;
* scalars are converted to float32 at load time, whatever the storage type.
"""
from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

ELEMENT_DTYPES = {
    "MET_UCHAR": np.dtype(np.uint8),
    "MET_SHORT": np.dtype(np.int16),
    "MET_USHORT": np.dtype(np.uint16),
    "MET_FLOAT": np.dtype(np.float32),
}


class MetaImageError(ValueError):
    """Malformed or unsupported MetaImage file."""


class UnsupportedDimensionalityError(MetaImageError):
    """NDims is not 3."""


class UnsupportedElementTypeError(MetaImageError):
    """ElementType outside the supported subset."""


class CompressedDataError(MetaImageError):
    """CompressedData = True is not supported."""


class PayloadError(MetaImageError):
    """Raw payload missing or shorter than the header promises."""


@dataclass
class ImageVolume:
    """Immutable-after-load scalar grid; safe to share across readers."""

    dims: tuple[int, int, int]
    spacing: tuple[float, float, float]
    origin: tuple[float, float, float]
    data: np.ndarray  # float32, shape == dims, indexed [x, y, z]

    def __post_init__(self) -> None:
        self.dims = tuple(int(d) for d in self.dims)
        self.spacing = tuple(float(s) for s in self.spacing)
        self.origin = tuple(float(o) for o in self.origin)
        if len(self.dims) != 3 or any(d <= 0 for d in self.dims):
            raise ValueError(f"dims must be three positive counts, got {self.dims}")
        if any(s <= 0 for s in self.spacing):
            raise ValueError(f"spacing must be strictly positive, got {self.spacing}")
        self.data = np.asarray(self.data, dtype=np.float32)
        if self.data.shape != self.dims:
            if self.data.size != int(np.prod(self.dims)):
                raise ValueError(
                    f"data length {self.data.size} != nx*ny*nz {int(np.prod(self.dims))}"
                )
            self.data = self.data.reshape(self.dims, order="F")

    def index_to_world(self, index) -> np.ndarray:
        """Affine index -> mm mapping; accepts fractional indices, (3,) or (N, 3)."""
        return np.asarray(self.origin) + np.asarray(index, dtype=np.float64) * np.asarray(self.spacing)

    def world_to_index(self, point) -> np.ndarray:
        """Inverse of :meth:`index_to_world`; continuous (unrounded) indices."""
        return (np.asarray(point, dtype=np.float64) - np.asarray(self.origin)) / np.asarray(self.spacing)


@dataclass
class BinaryMask:
    """Voxel occupancy on the same grid as the volume it was derived from."""

    dims: tuple[int, int, int]
    spacing: tuple[float, float, float]
    origin: tuple[float, float, float]
    bits: np.ndarray  # bool, shape == dims, indexed [x, y, z]

    def __post_init__(self) -> None:
        self.dims = tuple(int(d) for d in self.dims)
        self.spacing = tuple(float(s) for s in self.spacing)
        self.origin = tuple(float(o) for o in self.origin)
        if any(s <= 0 for s in self.spacing):
            raise ValueError(f"spacing must be strictly positive, got {self.spacing}")
        self.bits = np.asarray(self.bits, dtype=bool)
        if self.bits.shape != self.dims:
            if self.bits.size != int(np.prod(self.dims)):
                raise ValueError(
                    f"bits length {self.bits.size} != nx*ny*nz {int(np.prod(self.dims))}"
                )
            self.bits = self.bits.reshape(self.dims, order="F")

    @property
    def count(self) -> int:
        return int(self.bits.sum())

    def same_grid(self, other: "BinaryMask | ImageVolume", atol: float = 1e-9) -> bool:
        return (
            self.dims == other.dims
            and np.allclose(self.spacing, other.spacing, rtol=0.0, atol=atol)
            and np.allclose(self.origin, other.origin, rtol=0.0, atol=atol)
        )


def mask_from_volume(v: ImageVolume) -> BinaryMask:
    """Occupancy view of a loaded mask file (nonzero scalar = inside)."""
    return BinaryMask(v.dims, v.spacing, v.origin, v.data != 0)


def mean_spacing(v: ImageVolume) -> float:
    """Geometric mean of the per-axis spacings, in mm."""
    sx, sy, sz = v.spacing
    return float(np.cbrt(sx * sy * sz))


def sample_world_points(v: ImageVolume, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Nearest-voxel lookup for an (N, 3) array of world points.

    Returns ``(values, in_grid)``: values are the scalars of the voxels whose
    centers are nearest to each point (0 where outside), and ``in_grid`` flags
    which rounded indices landed inside the grid. Ties round half-to-even.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    idx = np.rint(v.world_to_index(pts)).astype(np.int64)
    dims = np.asarray(v.dims)
    in_grid = np.all((idx >= 0) & (idx < dims), axis=1)
    values = np.zeros(len(pts), dtype=np.float32)
    if np.any(in_grid):
        ii = idx[in_grid]
        values[in_grid] = v.data[ii[:, 0], ii[:, 1], ii[:, 2]]
    return values, in_grid


def sample_at_world(v: ImageVolume, point) -> float | None:
    """Scalar of the voxel nearest to ``point`` (mm), or None outside the grid."""
    values, in_grid = sample_world_points(v, np.asarray(point, dtype=np.float64)[None, :])
    if not in_grid[0]:
        return None
    return float(values[0])


# --- MetaImage subset ---------------------------------------------------------
#
# ASCII "Key = Value" header; payload x-fastest then y then z. Required keys per
# the supported subset: NDims (3), DimSize, ElementType, ElementDataFile.
# ElementSpacing defaults to 1 1 1, Offset to 0 0 0, byte order to little-endian.


def _parse_bool(value: str) -> bool:
    return value.strip().lower() == "true"


def _split_header(raw: bytes, path: Path) -> tuple[dict[str, str], int]:
    """Header keys plus the byte offset where an inline payload would start."""
    header: dict[str, str] = {}
    offset = 0
    stream = io.BytesIO(raw)
    while True:
        line = stream.readline()
        if not line:
            raise MetaImageError(f"{path}: header has no ElementDataFile line")
        offset = stream.tell()
        try:
            text = line.decode("ascii")
        except UnicodeDecodeError as exc:
            raise MetaImageError(f"{path}: non-ASCII bytes in header") from exc
        if "=" not in text:
            raise MetaImageError(f"{path}: malformed header line {text!r}")
        key, value = text.split("=", 1)
        header[key.strip()] = value.strip()
        if key.strip() == "ElementDataFile":
            return header, offset


def _grid_from_header(header: dict[str, str], path: Path):
    ndims = header.get("NDims")
    if ndims is None or ndims.strip() != "3":
        raise UnsupportedDimensionalityError(
            f"{path}: unsupported dimensionality (NDims = {ndims})"
        )
    if _parse_bool(header.get("CompressedData", "False")):
        raise CompressedDataError(f"{path}: compressed data is not supported")
    element_type = header.get("ElementType", "")
    if element_type not in ELEMENT_DTYPES:
        raise UnsupportedElementTypeError(
            f"{path}: unsupported ElementType {element_type!r}"
        )
    try:
        dims = tuple(int(t) for t in header["DimSize"].split())
    except (KeyError, ValueError) as exc:
        raise MetaImageError(f"{path}: missing or malformed DimSize") from exc
    if len(dims) != 3:
        raise MetaImageError(f"{path}: DimSize needs three ints, got {header['DimSize']!r}")
    spacing = tuple(float(t) for t in header.get("ElementSpacing", "1 1 1").split())
    origin = tuple(float(t) for t in header.get("Offset", "0 0 0").split())
    big_endian = _parse_bool(
        header.get("BinaryDataByteOrderMSB", header.get("ElementByteOrderMSB", "False"))
    )
    return dims, spacing, origin, element_type, big_endian


def load_metaimage(path) -> ImageVolume:
    """Load a .mha (inline payload) or .mhd (header + raw file) volume.

    Scalars are converted to float32; byte order honored; the raw payload of a
    .mhd is resolved relative to the header file.
    """
    path = Path(path)
    raw = path.read_bytes()
    header, payload_offset = _split_header(raw, path)
    dims, spacing, origin, element_type, big_endian = _grid_from_header(header, path)

    dtype = ELEMENT_DTYPES[element_type].newbyteorder(">" if big_endian else "<")
    expected = int(np.prod(dims)) * dtype.itemsize

    data_file = header["ElementDataFile"]
    if data_file == "LOCAL":
        payload = raw[payload_offset:]
        source = str(path)
    else:
        raw_path = path.parent / data_file
        if not raw_path.exists():
            raise PayloadError(f"{path}: raw payload file {raw_path} is missing")
        payload = raw_path.read_bytes()
        source = str(raw_path)
    if len(payload) < expected:
        raise PayloadError(
            f"{source}: short raw payload, expected {expected} bytes, got {len(payload)}"
        )
    flat = np.frombuffer(payload[:expected], dtype=dtype)
    return ImageVolume(dims, spacing, origin, flat.astype(np.float32))


def read_metaimage_header(path) -> tuple[tuple[int, int, int], tuple[float, float, float], tuple[float, float, float]]:
    """(dims, spacing, origin) without touching the payload."""
    path = Path(path)
    header, _ = _split_header(path.read_bytes(), path)
    dims, spacing, origin, _, _ = _grid_from_header(header, path)
    return dims, spacing, origin


def _format_floats(values) -> str:
    return " ".join(repr(float(x)) for x in values)


def _metaimage_blob(dims, spacing, origin, element_type: str, payload: bytes,
                    data_file: str) -> bytes:
    lines = [
        "ObjectType = Image",
        "NDims = 3",
        "BinaryData = True",
        "BinaryDataByteOrderMSB = False",
        "CompressedData = False",
        f"DimSize = {dims[0]} {dims[1]} {dims[2]}",
        f"ElementSpacing = {_format_floats(spacing)}",
        f"Offset = {_format_floats(origin)}",
        f"ElementType = {element_type}",
        f"ElementDataFile = {data_file}",
    ]
    head = ("\n".join(lines) + "\n").encode("ascii")
    return head + (payload if data_file == "LOCAL" else b"")


def mask_to_mha_bytes(mask: BinaryMask) -> bytes:
    """Serialize a mask as an inline MET_UCHAR .mha blob (1 inside, 0 outside)."""
    payload = mask.bits.astype(np.uint8).ravel(order="F").tobytes()
    return _metaimage_blob(mask.dims, mask.spacing, mask.origin, "MET_UCHAR", payload, "LOCAL")


def _write_metaimage(path: Path, dims, spacing, origin, element_type: str, payload: bytes) -> None:
    if path.suffix == ".mhd":
        raw_name = path.stem + ".raw"
        path.write_bytes(_metaimage_blob(dims, spacing, origin, element_type, b"", raw_name))
        (path.parent / raw_name).write_bytes(payload)
    else:
        path.write_bytes(_metaimage_blob(dims, spacing, origin, element_type, payload, "LOCAL"))


def save_mask(mask: BinaryMask, path) -> None:
    """Write a MET_UCHAR MetaImage; load_metaimage(save_mask(m)) preserves occupancy."""
    path = Path(path)
    payload = mask.bits.astype(np.uint8).ravel(order="F").tobytes()
    _write_metaimage(path, mask.dims, mask.spacing, mask.origin, "MET_UCHAR", payload)


def save_volume(volume: ImageVolume, path, element_type: str = "auto") -> None:
    """Write a scalar volume; element_type "auto" keeps integral data as MET_SHORT.

    MET_SHORT holds every integer in [-32768, 32767] exactly, so integral
    volumes round-trip bit for bit; anything else falls back to MET_FLOAT.
    """
    path = Path(path)
    data = volume.data
    if element_type == "auto":
        integral = bool(np.all(data == np.rint(data)))
        in_range = bool(data.size == 0 or (data.min() >= -32768 and data.max() <= 32767))
        element_type = "MET_SHORT" if integral and in_range else "MET_FLOAT"
    if element_type not in ELEMENT_DTYPES:
        raise UnsupportedElementTypeError(f"unsupported ElementType {element_type!r}")
    dtype = ELEMENT_DTYPES[element_type]
    if np.issubdtype(dtype, np.integer):
        payload = np.rint(data).astype(dtype).ravel(order="F").tobytes()
    else:
        payload = data.astype(dtype).ravel(order="F").tobytes()
    _write_metaimage(path, volume.dims, volume.spacing, volume.origin, element_type, payload)
