"""Scoring: Dice similarity coefficient, physical volumes, batch reports.

DSC = 100 * 2|A n R| / (|A| + |R|) on voxel counts; the voxel size cancels in
the ratio, so counts and cm^3 give the same number.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path

from .volume import BinaryMask

CSV_FIELDS = ("id", "vol_auto", "vol_ref", "voxels_auto", "voxels_ref", "dsc")


class GridMismatchError(ValueError):
    """Masks live on different grids."""


class UndefinedDscError(ValueError):
    """Both masks empty: 0/0."""


@dataclass
class EvalReport:
    dsc_percent: float
    volume_auto_cm3: float
    volume_ref_cm3: float
    voxels_auto: int
    voxels_ref: int


def _require_same_grid(a: BinaryMask, r: BinaryMask) -> None:
    if not a.same_grid(r):
        raise GridMismatchError(
            f"mask grids differ: {a.dims}/{a.spacing}/{a.origin} vs "
            f"{r.dims}/{r.spacing}/{r.origin}"
        )


def dsc(a: BinaryMask, r: BinaryMask) -> float:
    """Dice similarity coefficient as a percentage."""
    _require_same_grid(a, r)
    na, nr = a.count, r.count
    if na == 0 and nr == 0:
        raise UndefinedDscError("undefined DSC")
    inter = int((a.bits & r.bits).sum())
    return 100.0 * 2.0 * inter / (na + nr)


def mask_volume_cm3(m: BinaryMask) -> float:
    """Voxel count times voxel size, in cm^3."""
    sx, sy, sz = m.spacing
    return m.count * sx * sy * sz / 1000.0


def compare(auto: BinaryMask, ref: BinaryMask) -> EvalReport:
    return EvalReport(
        dsc_percent=dsc(auto, ref),
        volume_auto_cm3=mask_volume_cm3(auto),
        volume_ref_cm3=mask_volume_cm3(ref),
        voxels_auto=auto.count,
        voxels_ref=ref.count,
    )


def summarize(values) -> tuple[float, float, float, float]:
    """(min, max, mean, population std) of a batch metric."""
    vals = [float(v) for v in values]
    if not vals:
        raise ValueError("empty batch")
    mean = sum(vals) / len(vals)
    var = sum((v - mean) ** 2 for v in vals) / len(vals)
    return min(vals), max(vals), mean, math.sqrt(var)


def report_rows(cases: list[tuple[str, EvalReport]]) -> list[dict]:
    """Per-case rows followed by a min/max/mean/std summary block."""
    rows = [
        {
            "id": case_id,
            "vol_auto": rep.volume_auto_cm3,
            "vol_ref": rep.volume_ref_cm3,
            "voxels_auto": rep.voxels_auto,
            "voxels_ref": rep.voxels_ref,
            "dsc": rep.dsc_percent,
        }
        for case_id, rep in cases
    ]
    summary = {}
    for field in ("vol_auto", "vol_ref", "voxels_auto", "voxels_ref", "dsc"):
        summary[field] = summarize(row[field] for row in rows)
    for k, label in enumerate(("min", "max", "mean", "std")):
        rows.append({"id": label, **{f: summary[f][k] for f in summary}})
    return rows


def _fmt(value) -> str:
    # repr keeps floats shortest-round-trip, so golden files stay byte-stable
    if isinstance(value, float):
        return repr(value)
    return str(value)


def format_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_FIELDS)
    for row in rows:
        writer.writerow([_fmt(row[f]) for f in CSV_FIELDS])
    return buf.getvalue()


def write_report_csv(rows: list[dict], path) -> None:
    Path(path).write_text(format_csv(rows), encoding="ascii")
