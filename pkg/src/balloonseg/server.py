"""Local HTTP service driving the contour UI.

JSON API (exact paths the UI consumes):

    GET  /api/volumes                                  -> [{id, dims, spacing}]
    GET  /api/volumes/{id}/slice/{axis}/{index}?wl&ww  -> PNG (8-bit grayscale)
    POST /api/segment {volume_id, contour, params?}    -> {job_id}
    GET  /api/jobs/{job_id}                            -> {status, stats?, error?}
    GET  /api/jobs/{job_id}/mask                       -> .mha download
    GET  /api/jobs/{job_id}/mask/slice/{axis}/{index}  -> RLE rows JSON
    GET  /api/jobs/{job_id}/mesh?format=obj|stl        -> mesh download

Jobs are asynchronous with polling; one segmentation job per volume at a time
(409 while busy). Volumes are immutable after load, so slice reads never block
on a running job. Slice windowing (wl/ww) is presentation-only.
"""
from __future__ import annotations

import io
import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from fastapi import Body, FastAPI, HTTPException, Response
from PIL import Image

from .inflation import InflationParams, ParamsError, SegStats, run_segmentation
from .initializer import (
    ContourError,
    InitContour,
    contour_from_dict,
    derive_seed,
    validate_slice_index,
)
from .mesh import TriMesh, obj_bytes, stl_bytes, voxelize
from .volume import (
    BinaryMask,
    ImageVolume,
    load_metaimage,
    mask_to_mha_bytes,
    read_metaimage_header,
)

AXIS_INDEX = {"x": 0, "y": 1, "z": 2}


@dataclass
class JobRecord:
    job_id: str
    volume_id: str
    contour: InitContour
    params: InflationParams
    status: str = "pending"  # pending -> running -> done | failed
    error: Optional[str] = None
    mesh: Optional[TriMesh] = None
    mask: Optional[BinaryMask] = None
    stats: Optional[SegStats] = None


class VolumeStore:
    """Lazy-loading cache over a directory of MetaImage volumes."""

    def __init__(self, root: Path):
        self.root = Path(root)
        self._cache: dict[str, ImageVolume] = {}
        self._lock = threading.Lock()

    def paths(self) -> dict[str, Path]:
        found: dict[str, Path] = {}
        for p in sorted(self.root.glob("*")):
            if p.suffix in (".mha", ".mhd") and p.is_file():
                found.setdefault(p.stem, p)
        return found

    def listing(self) -> list[dict]:
        out = []
        for vid, path in self.paths().items():
            dims, spacing, _ = read_metaimage_header(path)
            out.append({"id": vid, "dims": list(dims), "spacing": list(spacing)})
        return out

    def get(self, vid: str) -> ImageVolume:
        with self._lock:
            if vid not in self._cache:
                path = self.paths().get(vid)
                if path is None:
                    raise KeyError(vid)
                self._cache[vid] = load_metaimage(path)
            return self._cache[vid]


def _plane(data: np.ndarray, axis: int, index: int) -> np.ndarray:
    """2D slice as an image array: rows = higher in-plane axis, cols = lower."""
    return np.take(data, index, axis=axis).T


def _slice_png(volume: ImageVolume, axis: int, index: int,
               wl: Optional[float], ww: Optional[float]) -> bytes:
    plane = _plane(volume.data, axis, index).astype(np.float64)
    if wl is None or ww is None:
        lo = float(volume.data.min())
        hi = float(volume.data.max())
        wl = (lo + hi) / 2.0 if wl is None else wl
        ww = (hi - lo) if ww is None else ww
    ww = max(float(ww), 1e-9)
    img = np.clip((plane - (wl - ww / 2.0)) / ww, 0.0, 1.0)
    buf = io.BytesIO()
    Image.fromarray((img * 255.0 + 0.5).astype(np.uint8), mode="L").save(buf, format="PNG")
    return buf.getvalue()


def _rle_rows(bits_plane: np.ndarray) -> list[dict]:
    """Run-length encode an image-oriented boolean plane; empty rows omitted."""
    rows = []
    for y in range(bits_plane.shape[0]):
        row = bits_plane[y]
        if not row.any():
            continue
        padded = np.concatenate([[False], row, [False]])
        flips = np.nonzero(padded[1:] != padded[:-1])[0]
        runs = [[int(x0), int(x1 - x0)] for x0, x1 in zip(flips[::2], flips[1::2])]
        rows.append({"y": y, "runs": runs})
    return rows


def _parse_axis(axis: str) -> int:
    if axis not in AXIS_INDEX:
        raise HTTPException(400, detail=f"axis must be one of x, y, z, got {axis!r}")
    return AXIS_INDEX[axis]


def create_app(volume_dir, frontend_dir=None) -> FastAPI:
    app = FastAPI(title="balloonseg")
    store = VolumeStore(Path(volume_dir))
    jobs: dict[str, JobRecord] = {}
    busy_volumes: set[str] = set()
    lock = threading.Lock()

    def _volume_or_404(vid: str) -> ImageVolume:
        try:
            return store.get(vid)
        except KeyError:
            raise HTTPException(404, detail=f"unknown volume {vid!r}")

    def _job_or_404(job_id: str) -> JobRecord:
        job = jobs.get(job_id)
        if job is None:
            raise HTTPException(404, detail=f"unknown job {job_id!r}")
        return job

    def _finished_job(job_id: str) -> JobRecord:
        job = _job_or_404(job_id)
        if job.status != "done":
            raise HTTPException(404, detail=f"job {job_id!r} has no result (status {job.status})")
        return job

    def _check_index(volume: ImageVolume, axis: int, index: int) -> None:
        if not 0 <= index < volume.dims[axis]:
            raise HTTPException(
                400, detail=f"index {index} outside grid (axis has {volume.dims[axis]} slices)"
            )

    def _worker(job: JobRecord, volume: ImageVolume) -> None:
        try:
            job.status = "running"
            seed = derive_seed(job.contour, volume, trim_percent=job.params.trim_percent)
            mesh, stats = run_segmentation(volume, seed, job.params)
            job.mask = voxelize(mesh, volume)
            job.mesh = mesh
            job.stats = stats
            job.status = "done"
        except Exception as exc:  # any failure must release the volume
            job.error = str(exc)
            job.status = "failed"
        finally:
            with lock:
                busy_volumes.discard(job.volume_id)

    @app.get("/api/volumes")
    def list_volumes():
        return store.listing()

    @app.get("/api/volumes/{vid}/slice/{axis}/{index}")
    def volume_slice(vid: str, axis: str, index: int,
                     wl: Optional[float] = None, ww: Optional[float] = None):
        volume = _volume_or_404(vid)
        ax = _parse_axis(axis)
        _check_index(volume, ax, index)
        return Response(_slice_png(volume, ax, index, wl, ww), media_type="image/png")

    @app.post("/api/segment")
    def segment(body: dict = Body(...)):
        vid = body.get("volume_id")
        if not isinstance(vid, str):
            raise HTTPException(400, detail="volume_id must be a string")
        unknown = set(body) - {"volume_id", "contour", "params"}
        if unknown:
            raise HTTPException(400, detail=f"unknown field {sorted(unknown)[0]!r}")
        volume = _volume_or_404(vid)
        try:
            contour = contour_from_dict(body.get("contour"))
            validate_slice_index(contour, volume)
            params = InflationParams.from_dict(body.get("params") or {})
        except (ContourError, ParamsError) as exc:
            raise HTTPException(400, detail=str(exc))
        with lock:
            if vid in busy_volumes:
                raise HTTPException(409, detail=f"volume {vid!r} already has a running job")
            busy_volumes.add(vid)
            job = JobRecord(uuid.uuid4().hex[:12], vid, contour, params)
            jobs[job.job_id] = job
        threading.Thread(target=_worker, args=(job, volume), daemon=True).start()
        return {"job_id": job.job_id}

    @app.get("/api/jobs/{job_id}")
    def job_status(job_id: str):
        job = _job_or_404(job_id)
        out: dict = {"status": job.status}
        if job.stats is not None:
            out["stats"] = job.stats.to_dict()
        if job.error is not None:
            out["error"] = job.error
        return out

    @app.get("/api/jobs/{job_id}/mask")
    def job_mask(job_id: str):
        job = _finished_job(job_id)
        return Response(
            mask_to_mha_bytes(job.mask),
            media_type="application/octet-stream",
            headers={"Content-Disposition": f'attachment; filename="{job_id}.mha"'},
        )

    @app.get("/api/jobs/{job_id}/mask/slice/{axis}/{index}")
    def job_mask_slice(job_id: str, axis: str, index: int):
        job = _finished_job(job_id)
        ax = _parse_axis(axis)
        if not 0 <= index < job.mask.dims[ax]:
            raise HTTPException(
                400, detail=f"index {index} outside grid (axis has {job.mask.dims[ax]} slices)"
            )
        return _rle_rows(_plane(job.mask.bits, ax, index))

    @app.get("/api/jobs/{job_id}/mesh")
    def job_mesh(job_id: str, format: str = "obj"):
        job = _finished_job(job_id)
        if format == "obj":
            payload, media = obj_bytes(job.mesh), "text/plain"
        elif format == "stl":
            payload, media = stl_bytes(job.mesh), "application/octet-stream"
        else:
            raise HTTPException(400, detail=f"format must be obj or stl, got {format!r}")
        return Response(
            payload,
            media_type=media,
            headers={"Content-Disposition": f'attachment; filename="{job_id}.{format}"'},
        )

    if frontend_dir is not None and Path(frontend_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=frontend_dir, html=True), name="ui")
    return app
