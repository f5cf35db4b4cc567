"""Command-line front end.

Thin composition of the library: every subcommand loads inputs, calls the
analysis modules and writes CSV/JSON/SVG artifacts into the output
directory.  No analysis logic lives here.

Exit codes: 0 success, 2 usage error, 3 input-file error, 4 analysis
anomaly (e.g. a cusp candidate failing cross-validation).  Errors are
reported as one JSON object on stderr.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import io as io_
from . import svgplot
from .classify import (atlas_scan, check_simplifying_conditions,
                       classify_robot, count_cusps_numeric,
                       is_cuspidal_closed_form)
from .config import (ATLAS_TRACE_GRID, DEFAULT_TOLS, TOPO_GRID, TRACE_GRID,
                     WORKSPACE_GRID, Tolerances)
from .errors import (CuspidalError, NonOrthogonalGeometry,
                     PostureChangeImpossible, RobotFileError)
from .ik import inverse_kinematics
from .model import JointConfig, RobotParams, wrap_angle
from .path import WorkspacePath, check_feasibility, plan_posture_change
from .singular import scan_cusps, trace_singularity_curves, workspace_boundary
from .topo import (characteristic_surfaces, compute_aspects, feasible_regions,
                   label_solutions, partition_regions, uniqueness_domains)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_ANOMALY = 4


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _emit_error(kind: str, message: str):
    sys.stderr.write(json.dumps({"error": {"kind": kind, "message": message}},
                                sort_keys=True) + "\n")


def _pow2_at_least_64(value: str) -> int:
    n = int(value)
    if n < 64 or (n & (n - 1)) != 0:
        raise argparse.ArgumentTypeError("resolution must be a power of two >= 64")
    return n


def build_parser() -> _Parser:
    ap = _Parser(prog="cuspidal",
                 description="Cuspidality analysis of 3-R serial robots")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(sp, robot=True, resolution=None):
        if robot:
            sp.add_argument("--robot", required=True, help="robot JSON file")
        sp.add_argument("--out", default="out", help="output directory")
        sp.add_argument("--format", default="csv,json,svg",
                        help="comma list of csv,json,svg")
        sp.add_argument("--seed", type=int, default=0,
                        help="seed for sampling-based checks")
        sp.add_argument("--degrees", action="store_true",
                        help="angle inputs are degrees")
        sp.add_argument("--tol", action="append", default=[],
                        metavar="KEY=VALUE", help="tolerance override")
        if resolution is not None:
            sp.add_argument("--resolution", type=_pow2_at_least_64,
                            default=resolution)

    sp = sub.add_parser("classify", help="rules, closed form and cusp count")
    common(sp, resolution=TRACE_GRID)

    sp = sub.add_parser("singularities",
                        help="singularity curves, workspace boundary, cusps")
    common(sp, resolution=TRACE_GRID)

    sp = sub.add_parser("aspects", help="aspect decomposition of joint space")
    common(sp, resolution=TOPO_GRID)

    sp = sub.add_parser("charsurf", help="characteristic surfaces")
    common(sp, resolution=TOPO_GRID)

    sp = sub.add_parser("uniqueness",
                        help="basic regions and maximal uniqueness domains")
    common(sp, resolution=TOPO_GRID)

    sp = sub.add_parser("feasible-regions",
                        help="workspace regions of feasible paths")
    common(sp, resolution=TOPO_GRID)

    sp = sub.add_parser("ik", help="inverse kinematics at a point")
    common(sp)
    sp.add_argument("--at", nargs=3, type=float, required=True,
                    metavar=("X", "Y", "Z"))

    sp = sub.add_parser("check-path", help="workspace path feasibility")
    common(sp)
    sp.add_argument("--path", required=True, help="waypoint CSV/JSON file")
    sp.add_argument("--frame", choices=("rho-z", "xyz"))

    sp = sub.add_parser("plan-posture-change",
                        help="non-singular joint path between two postures")
    common(sp, resolution=TOPO_GRID)
    sp.add_argument("--from", dest="q_from", nargs=3, type=float,
                    required=True, metavar=("T1", "T2", "T3"))
    sp.add_argument("--to", dest="q_to", nargs=3, type=float, required=True,
                    metavar=("T1", "T2", "T3"))

    sp = sub.add_parser("atlas", help="parameter-space cusp-count scan")
    common(sp, robot=False, resolution=64)
    sp.add_argument("--r2", type=float, required=True)
    sp.add_argument("--r3", type=float, default=0.0)
    sp.add_argument("--d3-range", nargs=2, type=float, default=(0.2, 3.0))
    sp.add_argument("--d4-range", nargs=2, type=float, default=(0.2, 3.0))
    sp.add_argument("--trace-grid", type=_pow2_at_least_64,
                    default=ATLAS_TRACE_GRID)
    return ap


def _tolerances(args) -> Tolerances:
    tols = DEFAULT_TOLS
    names = {f.name for f in dataclasses.fields(Tolerances)}
    for item in args.tol:
        if "=" not in item:
            raise _UsageError(f"bad --tol {item!r}, expected KEY=VALUE")
        key, val = item.split("=", 1)
        if key not in names:
            raise _UsageError(f"unknown tolerance {key!r}")
        v = float(val)
        if v <= 0:
            raise _UsageError("tolerance overrides must be positive")
        tols = tols.replace(**{key: v})
    return tols


def _report_base(args, tols: Tolerances, robot: Optional[RobotParams]) -> dict:
    base = {"command": args.command, "tolerances": tols.as_dict(),
            "seed": args.seed}
    if robot is not None:
        base["robot"] = robot.as_dict()
    if hasattr(args, "resolution"):
        base["resolution"] = args.resolution
    return base


def _formats(args) -> set:
    fmts = {f.strip() for f in args.format.split(",") if f.strip()}
    bad = fmts - {"csv", "json", "svg"}
    if bad:
        raise _UsageError(f"unknown formats: {sorted(bad)}")
    return fmts


def _load_robot(args) -> RobotParams:
    p = RobotParams.load(args.robot)
    if args.degrees:
        d = p.as_dict()
        d["alpha2"] = math.radians(d["alpha2"])
        d["alpha3"] = math.radians(d["alpha3"])
        if "joint_limits" in d and d["joint_limits"] is not None:
            d["joint_limits"] = [[math.radians(x) for x in pair]
                                 for pair in d["joint_limits"]]
        p = RobotParams.from_dict(d)
    return p


def _angles(values, degrees: bool) -> List[float]:
    return [math.radians(v) if degrees else v for v in values]


# ---------------------------------------------------------------------------
# subcommand bodies
# ---------------------------------------------------------------------------

def _cmd_classify(args, out: Path, fmts, tols) -> int:
    p = _load_robot(args)
    result = classify_robot(p, args.resolution, compute_count=True, tols=tols)
    report = _report_base(args, tols, p)
    report.update(result.as_dict())
    report["matched_rule_text"] = {
        str(r): check_desc(r) for r in result.matched_rules}
    try:
        report["closed_form"] = is_cuspidal_closed_form(p, tols.closed_form_band)
    except NonOrthogonalGeometry:
        report["closed_form"] = None
    if "json" in fmts:
        io_.write_json(out / "classification.json", report)
    print(json.dumps({k: report[k] for k in
                      ("verdict", "cusp_count", "method", "matched_rules",
                       "domain_id")}, sort_keys=True))
    return EXIT_OK


def check_desc(rule: int) -> str:
    from .classify import RULE_DESCRIPTIONS
    return RULE_DESCRIPTIONS[rule]


def _cmd_singularities(args, out: Path, fmts, tols) -> int:
    p = _load_robot(args)
    curves = trace_singularity_curves(p, args.resolution, tols)
    cusps, anomalies = scan_cusps(p, curves, tols)
    boundary = workspace_boundary(p, curves, cusps, tols=tols)
    if "csv" in fmts:
        io_.write_curves_csv(out / "curves.csv", p, curves)
        io_.write_cusps_csv(out / "cusps.csv", cusps)
        io_.write_polylines_csv(
            out / "boundary.csv",
            [(seg.label, seg.image_samples) for seg in boundary.segments]
            + [(f"{'WS1' if bc.kind == 'internal' else 'WS2'}-curve{bc.curve_id}",
                bc.image) for bc in boundary.curves if bc.kind != "degenerate"])
    if "json" in fmts:
        report = _report_base(args, tols, p)
        report["curves"] = [
            {"label": c.label, "closed": bool(c.closed), "samples": len(c),
             "degenerate_image": bool(c.degenerate_image)} for c in curves]
        report["cusps"] = [{"rho": c.rho, "z": c.z, "theta2": c.theta2,
                            "theta3": c.theta3,
                            "multiplicity": c.multiplicity} for c in cusps]
        report["boundary"] = [
            {"curve_id": bc.curve_id, "kind": bc.kind,
             "side_counts": list(bc.side_counts)} for bc in boundary.curves]
        report["segments"] = [s.label for s in boundary.segments]
        report["anomalies"] = [a.reason for a in anomalies]
        io_.write_json(out / "singularities.json", report)
    if "svg" in fmts:
        (out / "singularities_joint.svg").write_text(svgplot.joint_space_figure(
            curves=curves,
            cusp_preimages=[(c.theta2, c.theta3) for c in cusps] or None))
        (out / "singularities_workspace.svg").write_text(svgplot.workspace_figure(
            p=p, boundary=boundary, cusps=cusps))
    print(f"curves={len(curves)} cusps={len(cusps)} anomalies={len(anomalies)}")
    return EXIT_ANOMALY if anomalies else EXIT_OK


def _topology(p, args, tols):
    curves = trace_singularity_curves(p, min(args.resolution, TRACE_GRID), tols)
    cusps, anomalies = scan_cusps(p, curves, tols)
    boundary = workspace_boundary(p, curves, cusps, tols=tols)
    aspects = compute_aspects(p, args.resolution, tols)
    return curves, cusps, anomalies, boundary, aspects


def _cmd_aspects(args, out: Path, fmts, tols) -> int:
    p = _load_robot(args)
    curves, cusps, anomalies, boundary, aspects = _topology(p, args, tols)
    if "csv" in fmts:
        io_.write_raster_csv(out / "aspects.csv", aspects.labels,
                             (-math.pi, math.pi, -math.pi, math.pi),
                             aspects.periodic)
    if "json" in fmts:
        report = _report_base(args, tols, p)
        report["aspect_ids"] = aspects.aspect_ids
        report["cells_per_aspect"] = {
            str(a): int((aspects.labels == a).sum()) for a in aspects.aspect_ids}
        io_.write_json(out / "aspects.json", report)
    if "svg" in fmts:
        lbls = []
        for aid in aspects.aspect_ids:
            cells = aspects.cells(aid)
            mid = cells[len(cells) // 2]
            t2, t3 = aspects.cell_center(int(mid[0]), int(mid[1]))
            lbls.append((t2, t3, f"A{aid}"))
        (out / "aspects.svg").write_text(svgplot.joint_space_figure(
            curves=curves, aspects=aspects, labels=lbls))
    print(f"aspects={len(aspects.aspect_ids)}")
    return EXIT_ANOMALY if anomalies else EXIT_OK


def _cmd_charsurf(args, out: Path, fmts, tols) -> int:
    p = _load_robot(args)
    curves, cusps, anomalies, boundary, aspects = _topology(p, args, tols)
    cs = characteristic_surfaces(p, aspects, boundary, tols=tols)
    if "csv" in fmts:
        io_.write_polylines_csv(out / "charsurf.csv",
                                [(c.label(), wrap_angle(c.points))
                                 for c in cs.chains])
    if "json" in fmts:
        report = _report_base(args, tols, p)
        report["chains"] = [{"aspect": c.aspect_id, "segment": c.segment_label,
                             "points": len(c.points)} for c in cs.chains]
        report["skipped_samples"] = cs.skipped_samples
        io_.write_json(out / "charsurf.json", report)
    if "svg" in fmts:
        (out / "charsurf.svg").write_text(svgplot.joint_space_figure(
            curves=curves, chains=cs.chains,
            cusp_preimages=[(c.theta2, c.theta3) for c in cusps] or None))
    print(f"chains={len(cs.chains)}")
    return EXIT_ANOMALY if anomalies else EXIT_OK


def _cmd_uniqueness(args, out: Path, fmts, tols) -> int:
    p = _load_robot(args)
    curves, cusps, anomalies, boundary, aspects = _topology(p, args, tols)
    cs = characteristic_surfaces(p, aspects, boundary, tols=tols)
    part = partition_regions(p, aspects, cs, boundary, WORKSPACE_GRID, tols)
    domains = uniqueness_domains(part)
    if "csv" in fmts:
        io_.write_raster_csv(out / "basic_regions.csv", part.ra_labels,
                             (-math.pi, math.pi, -math.pi, math.pi),
                             aspects.periodic)
    if "json" in fmts:
        report = _report_base(args, tols, p)
        report["basic_regions"] = [
            {"label": r.label(), "aspect": r.aspect_id,
             "ws_region": r.ws_region, "ik_count": r.ws_count,
             "cells": int(len(r.cells))} for r in part.regions]
        report["uniqueness_domains"] = [
            {"label": d.label, "aspect": d.aspect_id, "removed": d.removed,
             "cells": int(len(d.cells))} for d in domains]
        io_.write_json(out / "uniqueness.json", report)
    if "svg" in fmts:
        (out / "basic_regions.svg").write_text(svgplot.joint_space_figure(
            curves=curves, ra_labels=part.ra_labels))
        for d in domains:
            mask = np.zeros((aspects.grid_n, aspects.grid_n), bool)
            mask[d.cells[:, 0], d.cells[:, 1]] = True
            (out / f"{d.label.lower()}.svg").write_text(
                svgplot.joint_space_figure(curves=curves,
                                           qu_cells=(aspects.grid_n, mask)))
    print(f"basic_regions={len(part.regions)} uniqueness_domains={len(domains)}")
    return EXIT_ANOMALY if anomalies else EXIT_OK


def _cmd_feasible_regions(args, out: Path, fmts, tols) -> int:
    p = _load_robot(args)
    curves, cusps, anomalies, boundary, aspects = _topology(p, args, tols)
    cs = characteristic_surfaces(p, aspects, boundary, tols=tols)
    part = partition_regions(p, aspects, cs, boundary, WORKSPACE_GRID, tols)
    domains = uniqueness_domains(part)
    regions = feasible_regions(p, part, domains, boundary)
    if "json" in fmts:
        report = _report_base(args, tols, p)
        report["regions"] = [{"label": r.label, "uniqueness_domain": r.qu_label,
                              "slits": r.slits,
                              "cells": int(r.raster.sum())} for r in regions]
        io_.write_json(out / "feasible_regions.json", report)
    if "csv" in fmts:
        for r in regions:
            io_.write_raster_csv(out / f"{r.label.lower()}.csv",
                                 r.raster.astype(int),
                                 (0.0, part.ws_grid.rho_max,
                                  part.ws_grid.z_min, part.ws_grid.z_max),
                                 (False, False))
    if "svg" in fmts:
        for r in regions:
            (out / f"{r.label.lower()}.svg").write_text(svgplot.workspace_figure(
                p=p, boundary=boundary, cusps=cusps, ws_grid=part.ws_grid,
                region_raster=r.raster, slits=r.slit_polylines))
    print(f"regions={len(regions)}")
    return EXIT_ANOMALY if anomalies else EXIT_OK


def _cmd_ik(args, out: Path, fmts, tols) -> int:
    p = _load_robot(args)
    x, y, z = args.at
    sols = inverse_kinematics(p, x, y, z, tols)
    try:
        aspects = compute_aspects(p, 256, tols)
        label_solutions(aspects, sols)
    except Exception:
        pass
    report = _report_base(args, tols, p)
    report["target"] = [x, y, z]
    report["solutions"] = [
        {"theta1": s.config.theta1, "theta2": s.config.theta2,
         "theta3": s.config.theta3, "abs_det_j": s.abs_det_j,
         "near_coincident": bool(s.near_coincident),
         "aspect_id": s.aspect_id} for s in sols.solutions]
    report["anomalies"] = sols.anomalies
    if "json" in fmts:
        io_.write_json(out / "ik.json", report)
    if "csv" in fmts:
        io_.write_csv(out / "ik.csv",
                      ["theta1", "theta2", "theta3", "abs_det_j",
                       "near_coincident", "aspect_id"],
                      [(s.config.theta1, s.config.theta2, s.config.theta3,
                        s.abs_det_j, int(s.near_coincident),
                        s.aspect_id if s.aspect_id is not None else -1)
                       for s in sols.solutions])
    print(json.dumps({"count": len(sols),
                      "solutions": [[round(s.config.theta1, 6),
                                     round(s.config.theta2, 6),
                                     round(s.config.theta3, 6)]
                                    for s in sols.solutions]}, sort_keys=True))
    return EXIT_OK


def _cmd_check_path(args, out: Path, fmts, tols) -> int:
    p = _load_robot(args)
    path = io_.load_path(args.path, args.frame)
    report_obj = check_feasibility(p, path, tols)
    report = _report_base(args, tols, p)
    for direction in ("forward", "backward"):
        lifts = getattr(report_obj, direction)
        report[direction] = [
            {"start": list(b.start.as_array()),
             "status": b.result.status,
             "min_abs_det_j": b.result.min_abs_det,
             "blocked_s": b.result.blocked_s} for b in lifts]
        report[f"{direction}_feasible_branches"] = \
            report_obj.feasible_branches(direction)
    if "json" in fmts:
        io_.write_json(out / "path_feasibility.json", report)
    print(json.dumps({"forward": report["forward_feasible_branches"],
                      "backward": report["backward_feasible_branches"]},
                     sort_keys=True))
    return EXIT_OK


def _cmd_plan(args, out: Path, fmts, tols) -> int:
    p = _load_robot(args)
    q_from = JointConfig(*_angles(args.q_from, args.degrees))
    q_to = JointConfig(*_angles(args.q_to, args.degrees))
    plan = plan_posture_change(p, q_from, q_to, args.resolution, tols=tols)
    report = _report_base(args, tols, p)
    report["min_abs_det_j"] = plan.min_abs_det
    report["aspect_id"] = plan.aspect_id
    report["samples"] = int(len(plan.joints))
    if "csv" in fmts:
        io_.write_trajectory_csv(out / "plan.csv", p, plan.s_values, plan.joints)
    if "json" in fmts:
        io_.write_json(out / "plan.json", report)
    if "svg" in fmts:
        curves = trace_singularity_curves(p, TRACE_GRID, tols)
        cusps, _ = scan_cusps(p, curves, tols)
        boundary = workspace_boundary(p, curves, cusps, tols=tols)
        (out / "plan.svg").write_text(svgplot.workspace_figure(
            p=p, boundary=boundary, cusps=cusps, trace=plan.workspace_trace))
    print(json.dumps({"min_abs_det_j": plan.min_abs_det,
                      "aspect_id": plan.aspect_id}, sort_keys=True))
    return EXIT_OK


def _cmd_atlas(args, out: Path, fmts, tols) -> int:
    atlas = atlas_scan(args.r2, args.r3, tuple(args.d3_range),
                       tuple(args.d4_range), args.resolution,
                       args.trace_grid, tols)
    report = _report_base(args, tols, None)
    report["r2"], report["r3"] = args.r2, args.r3
    report["domains"] = [{"domain_id": d.domain_id, "cusp_count": d.cusp_count,
                          "cells": d.n_cells, "sample_d3": d.sample[0],
                          "sample_d4": d.sample[1]} for d in atlas.table]
    if "csv" in fmts:
        io_.write_atlas_csv(out / "atlas.csv", atlas)
    if "json" in fmts:
        io_.write_json(out / "atlas.json", report)
    if "svg" in fmts:
        (out / "atlas.svg").write_text(svgplot.atlas_figure(atlas))
    print(json.dumps({"domains": [[d.domain_id, d.cusp_count]
                                  for d in atlas.table]}, sort_keys=True))
    return EXIT_OK


_COMMANDS = {
    "classify": _cmd_classify,
    "singularities": _cmd_singularities,
    "aspects": _cmd_aspects,
    "charsurf": _cmd_charsurf,
    "uniqueness": _cmd_uniqueness,
    "feasible-regions": _cmd_feasible_regions,
    "ik": _cmd_ik,
    "check-path": _cmd_check_path,
    "plan-posture-change": _cmd_plan,
    "atlas": _cmd_atlas,
}


def run(argv=None) -> int:
    """Entry point returning the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        tols = _tolerances(args)
        fmts = _formats(args)
    except _UsageError as e:
        _emit_error("usage", str(e))
        return EXIT_USAGE
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        return _COMMANDS[args.command](args, out, fmts, tols)
    except RobotFileError as e:
        _emit_error("input", str(e))
        return EXIT_INPUT
    except PostureChangeImpossible as e:
        _emit_error("posture-change-impossible", str(e))
        return EXIT_ANOMALY
    except CuspidalError as e:
        _emit_error("analysis", str(e))
        return EXIT_ANOMALY
    except ValueError as e:
        _emit_error("usage", str(e))
        return EXIT_USAGE


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
