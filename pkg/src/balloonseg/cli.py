"""Command-line entry points.

    balloonseg segment --volume t1.mhd --contour init.json --out-mask seg.mha
    balloonseg dsc auto.mha ref.mha
    balloonseg phantom spec.json out/case01
    balloonseg report --pairs pairs.csv --out-dir report/
    balloonseg serve --port 8000 --volume-dir data/

All anticipated errors exit 2 with a single diagnostic line on stderr.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from . import evaluation, report
from .inflation import InflationParams, ParamsError, SeedIntensityError, run_segmentation
from .initializer import ContourError, contour_from_json, contour_to_json, derive_seed
from .mesh import MeshError, voxelize, write_obj, write_stl
from .phantom import PhantomSpec, PhantomSpecError, generate
from .volume import (
    MetaImageError,
    load_metaimage,
    mask_from_volume,
    save_mask,
    save_volume,
)

_EXPECTED_ERRORS = (
    MetaImageError,
    ContourError,
    ParamsError,
    SeedIntensityError,
    MeshError,
    PhantomSpecError,
    evaluation.GridMismatchError,
    evaluation.UndefinedDscError,
    FileNotFoundError,
    IsADirectoryError,
    PermissionError,
    ValueError,
)


def _read_text(path: str) -> str:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"no such file: {p}")
    return p.read_text(encoding="utf-8")


def _write_mesh(mesh, path: str) -> None:
    if path.endswith(".stl"):
        write_stl(mesh, path)
    else:
        write_obj(mesh, path)


def cmd_segment(args) -> int:
    volume = load_metaimage(args.volume)
    contour = contour_from_json(_read_text(args.contour))
    params = InflationParams.from_json(_read_text(args.params)) if args.params else InflationParams()
    seed = derive_seed(contour, volume, trim_percent=params.trim_percent)
    mesh, stats = run_segmentation(volume, seed, params)
    mask = voxelize(mesh, volume)
    save_mask(mask, args.out_mask)
    if args.out_mesh:
        _write_mesh(mesh, args.out_mesh)
    if args.out_stats:
        Path(args.out_stats).write_text(json.dumps(stats.to_dict(), indent=2) + "\n")
    print(
        f"segmented in {stats.iterations_run} iterations "
        f"({stats.termination_reason}), volume {stats.volume_cm3:.3f} cm^3, "
        f"{stats.wall_time:.2f} s"
    )
    return 0


def cmd_dsc(args) -> int:
    a = mask_from_volume(load_metaimage(args.mask_a))
    r = mask_from_volume(load_metaimage(args.mask_r))
    rep = evaluation.compare(a, r)
    rows = [{
        "id": Path(args.mask_a).stem,
        "vol_auto": rep.volume_auto_cm3,
        "vol_ref": rep.volume_ref_cm3,
        "voxels_auto": rep.voxels_auto,
        "voxels_ref": rep.voxels_ref,
        "dsc": rep.dsc_percent,
    }]
    # header + the single EvalReport row
    sys.stdout.write(evaluation.format_csv(rows))
    return 0


def cmd_phantom(args) -> int:
    spec = PhantomSpec.from_json(_read_text(args.spec))
    volume, mask, contour = generate(spec)
    prefix = Path(args.out_prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    save_volume(volume, prefix.with_suffix(".mha"))
    save_mask(mask, Path(str(prefix) + ".gt.mha"))
    Path(str(prefix) + ".contour.json").write_text(contour_to_json(contour) + "\n")
    print(f"wrote {prefix}.mha, {prefix}.gt.mha, {prefix}.contour.json")
    return 0


def cmd_report(args) -> int:
    pairs = []
    with open(args.pairs, newline="") as fh:
        for row in csv.DictReader(fh):
            missing = {"id", "auto", "ref"} - set(row)
            if missing:
                raise ValueError(f"pairs file missing column {sorted(missing)[0]!r}")
            pairs.append((row["id"], row["auto"], row["ref"]))
    if not pairs:
        raise ValueError("pairs file lists no cases")
    cases = []
    for case_id, auto_path, ref_path in pairs:
        auto = mask_from_volume(load_metaimage(auto_path))
        ref = mask_from_volume(load_metaimage(ref_path))
        cases.append((case_id, evaluation.compare(auto, ref)))
    rows = evaluation.report_rows(cases)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    evaluation.write_report_csv(rows, out_dir / "report.csv")
    figures = report.render_report_figures(rows, out_dir)
    names = ", ".join(p.name for p in figures)
    print(f"wrote {out_dir / 'report.csv'} and {names}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .server import create_app

    # running from the repo root auto-serves the built UI, if present
    frontend = Path("frontend/dist")
    app = create_app(args.volume_dir, frontend_dir=frontend if frontend.is_dir() else None)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="balloonseg", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    seg = sub.add_parser("segment", help="segment a volume from a drawn contour")
    seg.add_argument("--volume", required=True, help="MetaImage volume (.mha/.mhd)")
    seg.add_argument("--contour", required=True, help="InitContour JSON file")
    seg.add_argument("--params", help="InflationParams JSON file (defaults if omitted)")
    seg.add_argument("--out-mask", required=True, help="output mask (.mha/.mhd)")
    seg.add_argument("--out-mesh", help="optional mesh output (.obj or .stl)")
    seg.add_argument("--out-stats", help="optional stats JSON output")
    seg.set_defaults(func=cmd_segment)

    d = sub.add_parser("dsc", help="Dice similarity of two masks, as a CSV row")
    d.add_argument("mask_a", help="automatic segmentation mask")
    d.add_argument("mask_r", help="reference segmentation mask")
    d.set_defaults(func=cmd_dsc)

    ph = sub.add_parser("phantom", help="generate a synthetic phantom with ground truth")
    ph.add_argument("spec", help="PhantomSpec JSON file")
    ph.add_argument("out_prefix", help="output prefix for .mha/.gt.mha/.contour.json")
    ph.set_defaults(func=cmd_phantom)

    rep = sub.add_parser("report", help="batch evaluation: CSV plus figures")
    rep.add_argument("--pairs", required=True,
                     help="CSV with columns id,auto,ref (mask file paths)")
    rep.add_argument("--out-dir", required=True, help="directory for report.csv and figures")
    rep.set_defaults(func=cmd_report)

    srv = sub.add_parser("serve", help="run the HTTP service for the contour UI")
    srv.add_argument("--port", type=int, default=8000)
    srv.add_argument("--host", default="127.0.0.1")
    srv.add_argument("--volume-dir", required=True, help="directory of MetaImage volumes")
    srv.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _EXPECTED_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
