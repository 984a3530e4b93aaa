"""Command-line front end binding all analysis modules.

Every subcommand prints a JSON report to stdout (or --out) and, where
applicable, writes CSV/SVG artifacts next to it.  All file writes are
atomic (temp file + rename) and outputs are byte-identical across
repeated runs with the same flags.

Exit codes: 0 success, 1 usage/input error, 2 numerical-degeneracy abort.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile

import numpy as np

from . import __version__
from .atlas import classify_section, count_aspects
from .cusp import find_cusps_in_section
from .geometry import GeometryError, GeometryParams, check_analytic_class, load_geometry
from .kinematics import (
    JointVector,
    KinematicsError,
    Pose,
    forward_kinematics_analytic,
    forward_kinematics_reference,
    ik_residual,
    inverse_kinematics,
    match_solution_sets,
)
from .motion import (
    MotionError,
    make_circle_loop,
    make_cusp_loop,
    track_branch,
)
from .singularity import (
    branch_surface,
    discriminant_grid,
    jacobian_parallel_det,
    workspace_singularity_factors,
)

#: Default grid spec (lo, hi, n) for joint-space sections (contains both
#: cusp points and all printed branch arcs of the reference geometry).
DEFAULT_SECTION_GRID = (0.1, 4.0, 200)

FLOAT_FMT = "%.17g"


class UsageError(Exception):
    """Bad flags or bad input values; mapped to exit code 1."""


class DegeneracyAbort(Exception):
    """A numerical computation could not be completed; exit code 2."""


# ---------------------------------------------------------------------------
# output helpers


def _atomic_write(path: str, data: str | bytes):
    mode = "wb" if isinstance(data, bytes) else "w"
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp_", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, mode) as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _meta(g: GeometryParams, args) -> dict:
    return {
        "tool": "planar3rpr",
        "version": __version__,
        "geometry": {
            "c2": g.c2,
            "c3": g.c3,
            "d3": g.d3,
            "l2": g.l2,
            "l3": g.l3,
            "beta": g.beta,
        },
        "tol": getattr(args, "tol", None),
        "seed": getattr(args, "seed", 0),
    }


def _emit_json(args, report: dict):
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if getattr(args, "out", None):
        _atomic_write(args.out, text)
    else:
        sys.stdout.write(text)


def _csv_text(meta: dict, header: list[str], rows) -> str:
    lines = [f"# {k}: {json.dumps(v, sort_keys=True)}" for k, v in sorted(meta.items())]
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(FLOAT_FMT % v for v in row))
    return "\n".join(lines) + "\n"


def _artifact_base(args, default: str) -> str:
    base = getattr(args, "out", None) or default
    for ext in (".json", ".csv", ".svg"):
        if base.endswith(ext):
            base = base[: -len(ext)]
    return base


def _new_figure():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "planar3rpr"
    fig, ax = plt.subplots(figsize=(8.0, 8.0), dpi=100)
    return plt, fig, ax


def _save_svg(plt, fig, path: str):
    import io

    buf = io.BytesIO()
    fig.savefig(buf, format="svg", metadata={"Date": None})
    plt.close(fig)
    _atomic_write(path, buf.getvalue())


# ---------------------------------------------------------------------------
# flag parsing helpers


def _parse_floats(text: str, n: int, name: str) -> tuple[float, ...]:
    parts = text.split(",")
    if len(parts) != n:
        raise UsageError(f"--{name} expects {n} comma-separated values, got {text!r}")
    try:
        vals = tuple(float(p) for p in parts)
    except ValueError as e:
        raise UsageError(f"--{name}: {e}") from None
    if not all(math.isfinite(v) for v in vals):
        raise UsageError(f"--{name} values must be finite")
    return vals


def _parse_grid(text: str) -> tuple[float, float, int]:
    parts = text.split(",")
    if len(parts) != 3:
        raise UsageError(f"--grid expects lo,hi,n, got {text!r}")
    try:
        lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError as e:
        raise UsageError(f"--grid: {e}") from None
    if not (lo < hi) or n < 2:
        raise UsageError("--grid requires lo < hi and n >= 2")
    return lo, hi, n


def _load_geometry(args) -> GeometryParams:
    if not args.geometry:
        raise UsageError("--geometry <path> is required")
    try:
        return load_geometry(args.geometry)
    except FileNotFoundError:
        raise UsageError(f"geometry file not found: {args.geometry}") from None
    except (GeometryError, json.JSONDecodeError, OSError) as e:
        raise UsageError(f"geometry file {args.geometry}: {e}") from None


def _joints_from_flag(args) -> JointVector:
    vals = _parse_floats(args.joints, 3, "joints")
    try:
        return JointVector(*vals)
    except KinematicsError as e:
        raise UsageError(str(e)) from None


# ---------------------------------------------------------------------------
# subcommands


def cmd_check_class(args) -> int:
    g = _load_geometry(args)
    verdict = check_analytic_class(g, tol=args.tol if args.tol else 1e-9)
    _emit_json(
        args,
        {
            "is_analytic": verdict.is_analytic,
            "violations": [
                {"condition": name, "residual": res} for name, res in verdict.violations
            ],
            "warnings": verdict.warnings,
            "meta": _meta(g, args),
        },
    )
    return 0


def cmd_ik(args) -> int:
    g = _load_geometry(args)
    x, y, phi = _parse_floats(args.pose, 3, "pose")
    p = Pose(x, y, phi)
    j = inverse_kinematics(g, p)
    _emit_json(
        args,
        {
            "joints": {"rho1": j.rho1, "rho2": j.rho2, "rho3": j.rho3},
            "residual": ik_residual(g, p, j),
            "meta": _meta(g, args),
        },
    )
    return 0


def cmd_fk(args) -> int:
    g = _load_geometry(args)
    j = _joints_from_flag(args)
    sols = forward_kinematics_analytic(g, j)
    report = sols.to_dict()
    report["warnings"] = sols.warnings
    if args.reference:
        ref = forward_kinematics_reference(g, j)
        report["reference"] = {
            "count": ref.count,
            "matches_analytic": match_solution_sets(sols, ref),
        }
    report["meta"] = _meta(g, args)
    _emit_json(args, report)
    return 0


def cmd_sing_workspace(args) -> int:
    g = _load_geometry(args)
    lo, hi, n = _parse_grid(args.grid) if args.grid else (-2.0, 2.0, 81)
    phis = [float(v) for v in args.phi.split(",")]
    xs = np.linspace(lo, hi, n)
    ys = np.linspace(lo, hi, n)

    rows = []
    base = _artifact_base(args, "sing_workspace")
    for k, phi in enumerate(phis):
        det = np.empty((n, n))
        f1v = np.empty((n, n))
        f2v = np.empty((n, n))
        for i, x in enumerate(xs):
            for m, y in enumerate(ys):
                p = Pose(float(x), float(y), phi)
                f1, f2 = workspace_singularity_factors(g, p)
                d = jacobian_parallel_det(g, p)
                f1v[i, m], f2v[i, m], det[i, m] = f1, f2, d
                rows.append((x, y, phi, f1, f2, d))
        plt, fig, ax = _new_figure()
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        ax.contour(X, Y, det, levels=[0.0], colors="black", linewidths=1.2)
        ax.contour(X, Y, f1v, levels=[0.0], colors="tab:blue", linestyles="--")
        ax.contour(X, Y, f2v, levels=[0.0], colors="tab:red", linestyles=":")
        ax.set_xlabel("x")
        ax.set_ylabel("y")
        ax.set_title(f"parallel singularity locus, phi = {phi:.6g}")
        ax.set_aspect("equal")
        _save_svg(plt, fig, f"{base}_slice{k}.svg")

    meta = _meta(g, args)
    meta["phi_slices"] = phis
    _atomic_write(base + ".csv", _csv_text(meta, ["x", "y", "phi", "f1", "f2", "detM"], rows))
    _emit_json(args, {"csv": base + ".csv", "slices": len(phis), "meta": meta})
    return 0


def _section_arrays(g: GeometryParams, rho2: float, grid):
    lo, hi, n = grid
    r1 = np.linspace(lo, hi, n)
    r3 = np.linspace(lo, hi, n)
    G1, G3 = np.meshgrid(r1, r3, indexing="ij")
    delta = discriminant_grid(g, G1, np.full_like(G1, rho2), G3)
    branch = np.empty_like(delta)
    for i in range(n):
        for k in range(n):
            branch[i, k] = branch_surface(g, JointVector(r1[i], rho2, r3[k]))
    return r1, r3, delta, branch


def cmd_sing_jointspace(args) -> int:
    g = _load_geometry(args)
    grid = _parse_grid(args.grid) if args.grid else DEFAULT_SECTION_GRID
    r1, r3, delta, branch = _section_arrays(g, args.rho2, grid)

    rows = [
        (r1[i], r3[k], delta[i, k], branch[i, k])
        for i in range(len(r1))
        for k in range(len(r3))
    ]
    meta = _meta(g, args)
    meta["rho2"] = args.rho2
    base = _artifact_base(args, "sing_jointspace")
    _atomic_write(base + ".csv", _csv_text(meta, ["rho1", "rho3", "delta", "branch"], rows))

    plt, fig, ax = _new_figure()
    G1, G3 = np.meshgrid(r1, r3, indexing="ij")
    ax.contour(G1, G3, delta, levels=[0.0], colors="black", linewidths=1.2)
    ax.contour(G1, G3, branch, levels=[0.0], colors="tab:red", linestyles="--")
    ax.set_xlabel("rho1")
    ax.set_ylabel("rho3")
    ax.set_title(f"joint-space singularity surfaces, rho2 = {args.rho2:.6g}")
    ax.set_aspect("equal")
    _save_svg(plt, fig, base + ".svg")
    _emit_json(args, {"csv": base + ".csv", "svg": base + ".svg", "meta": meta})
    return 0


def cmd_cusps(args) -> int:
    g = _load_geometry(args)
    grid = _parse_grid(args.grid) if args.grid else DEFAULT_SECTION_GRID
    lo, hi, _ = grid
    result = find_cusps_in_section(g, args.rho2, box=((lo, hi), (lo, hi)))

    # CSV of the repeated-root curve in this section, with cusp markers.
    r1, r3, delta, _branch = _section_arrays(g, args.rho2, (lo, hi, min(grid[2], 200)))
    plt, fig, ax = _new_figure()
    G1, G3 = np.meshgrid(r1, r3, indexing="ij")
    cs = ax.contour(G1, G3, delta, levels=[0.0], colors="black", linewidths=1.2)
    rows = []
    segs = cs.allsegs[0] if cs.allsegs else []
    for si, seg in enumerate(segs):
        for pt in seg:
            rows.append((float(si), pt[0], pt[1]))
    for p in result.points:
        ax.plot(p.rho1, p.rho3, "o", mfc="none", mec="tab:red", ms=12, mew=1.6)
    ax.set_xlabel("rho1")
    ax.set_ylabel("rho3")
    ax.set_title(f"repeated-root curve and cusps, rho2 = {args.rho2:.6g}")
    ax.set_aspect("equal")

    meta = _meta(g, args)
    meta["rho2"] = args.rho2
    meta["cusps"] = [[p.rho1, p.rho3] for p in result.points]
    base = _artifact_base(args, "cusps")
    _atomic_write(base + ".csv", _csv_text(meta, ["segment", "rho1", "rho3"], rows))
    _save_svg(plt, fig, base + ".svg")

    _emit_json(
        args,
        {
            "cusps": [p.to_dict() for p in result.points],
            "seeds_total": result.seeds_total,
            "seeds_converged": result.seeds_converged,
            "seeds_discarded": result.seeds_discarded,
            "csv": base + ".csv",
            "meta": meta,
        },
    )
    return 0


#: Map color per FK solution count (white = empty or boundary).
COUNT_COLORS = {0: "#ffffff", 2: "#63be7b", 4: "#ffe08a", 6: "#e06666"}


def cmd_region_map(args) -> int:
    g = _load_geometry(args)
    lo, hi, n = _parse_grid(args.grid) if args.grid else DEFAULT_SECTION_GRID
    section = classify_section(
        g, args.rho2, (lo, hi), (lo, hi), resolution=(n, n), threads=max(args.threads, 1)
    )

    rows = [
        (section.rho1[i], section.rho3[k], float(section.counts[i, k]))
        for i in range(n)
        for k in range(n)
    ]
    meta = _meta(g, args)
    meta["rho2"] = args.rho2
    base = _artifact_base(args, "region_map")
    _atomic_write(base + ".csv", _csv_text(meta, ["rho1", "rho3", "count"], rows))

    from matplotlib.colors import BoundaryNorm, ListedColormap

    plt, fig, ax = _new_figure()
    shown = np.where(section.boundary_mask, 0, section.counts)
    cmap = ListedColormap([COUNT_COLORS[c] for c in (0, 2, 4, 6)])
    norm = BoundaryNorm([-1, 1, 3, 5, 7], cmap.N)
    G1, G3 = np.meshgrid(section.rho1, section.rho3, indexing="ij")
    ax.pcolormesh(G1, G3, shown, cmap=cmap, norm=norm, shading="nearest")
    ax.contour(G1, G3, section.delta, levels=[0.0], colors="black", linewidths=1.0)
    ax.contour(G1, G3, section.branch, levels=[0.0], colors="tab:blue", linestyles="--")
    cusps = find_cusps_in_section(g, args.rho2, box=((lo, hi), (lo, hi)))
    for p in cusps.points:
        ax.plot(p.rho1, p.rho3, "o", mfc="none", mec="black", ms=12, mew=1.6)
    ax.set_xlabel("rho1")
    ax.set_ylabel("rho3")
    ax.set_title(f"assembly-mode count map, rho2 = {args.rho2:.6g}")
    ax.set_aspect("equal")
    _save_svg(plt, fig, base + ".svg")

    free = section.counts[~section.boundary_mask]
    vals, freq = np.unique(free, return_counts=True)
    all_vals, all_freq = np.unique(section.counts, return_counts=True)
    _emit_json(
        args,
        {
            "histogram": {str(int(v)): int(c) for v, c in zip(vals, freq)},
            "histogram_with_boundary": {
                str(int(v)): int(c) for v, c in zip(all_vals, all_freq)
            },
            "boundary_cells": int(section.boundary_mask.sum()),
            "degenerate_cells": int(section.degenerate_mask.sum()),
            "csv": base + ".csv",
            "svg": base + ".svg",
            "meta": meta,
        },
    )
    return 0


def cmd_aspects(args) -> int:
    g = _load_geometry(args)
    xlo, xhi = _parse_floats(args.box, 2, "box")
    nx, ny, nphi = (int(v) for v in _parse_floats(args.resolution, 3, "resolution"))
    if min(nx, ny, nphi) < 2:
        raise UsageError("--resolution entries must be >= 2")
    report = count_aspects(
        g,
        box=((xlo, xhi), (xlo, xhi)),
        resolution=(nx, ny, nphi),
        threshold=args.threshold,
    )
    out = report.to_dict()
    out["meta"] = _meta(g, args)
    _emit_json(args, out)
    return 0


def cmd_transit(args) -> int:
    g = _load_geometry(args)
    c1, c3 = _parse_floats(args.center, 2, "center")
    if args.radius <= 0:
        raise UsageError("--radius must be positive")

    if args.regular:
        loop = make_circle_loop(JointVector(c1, args.rho2, c3), args.radius, args.steps)
    else:
        margin = max(2.0 * args.radius, 0.2)
        found = find_cusps_in_section(
            g,
            args.rho2,
            box=((max(c1 - margin, 1e-3), c1 + margin), (max(c3 - margin, 1e-3), c3 + margin)),
        )
        if not found.points:
            raise DegeneracyAbort(
                f"no cusp found near (rho1, rho3) = ({c1}, {c3}) at rho2 = {args.rho2}"
            )
        cusp = min(found.points, key=lambda p: (p.rho1 - c1) ** 2 + (p.rho3 - c3) ** 2)
        try:
            loop = make_cusp_loop(g, cusp, args.radius, steps=args.steps)
        except MotionError as e:
            raise DegeneracyAbort(str(e)) from None

    j0 = JointVector(*loop.waypoints[0])
    sols = forward_kinematics_analytic(g, j0)
    if sols.count == 0:
        raise DegeneracyAbort("no assembly mode at the loop start point")

    indices = [args.start_index] if args.start_index >= 0 else list(range(sols.count))
    report = None
    tried = []
    for i in indices:
        if i >= sols.count:
            raise UsageError(f"--start-index {i} out of range (count {sols.count})")
        try:
            report = track_branch(g, loop, sols.poses[i])
            tried.append({"index": i, "tracked": True})
            break
        except MotionError as e:
            tried.append({"index": i, "tracked": False, "error": str(e)})
    if report is None:
        raise DegeneracyAbort("no start branch could be tracked around the loop")

    rows = [
        (jv.rho1, jv.rho2, jv.rho3, p.x, p.y, p.phi, d) for jv, p, d in report.samples
    ]
    meta = _meta(g, args)
    meta["rho2"] = args.rho2
    meta["radius"] = args.radius
    base = _artifact_base(args, "transit")
    _atomic_write(
        base + ".csv",
        _csv_text(meta, ["rho1", "rho2", "rho3", "x", "y", "phi", "detM"], rows),
    )

    lo = max(min(c1, c3) - 3.0 * args.radius, 1e-2)
    hi = max(c1, c3) + 3.0 * args.radius
    r1, r3, delta, _branch = _section_arrays(g, args.rho2, (lo, hi, 120))
    plt, fig, ax = _new_figure()
    G1, G3 = np.meshgrid(r1, r3, indexing="ij")
    ax.contour(G1, G3, delta, levels=[0.0], colors="black", linewidths=1.0)
    ax.plot(loop.waypoints[:, 0], loop.waypoints[:, 2], color="tab:blue", lw=1.4)
    ax.plot(loop.waypoints[0, 0], loop.waypoints[0, 2], "o", color="tab:blue", ms=6)
    ax.set_xlabel("rho1")
    ax.set_ylabel("rho3")
    ax.set_title(f"transit loop, rho2 = {args.rho2:.6g}")
    ax.set_aspect("equal")
    _save_svg(plt, fig, base + ".svg")

    out = report.to_dict()
    out["branches_tried"] = tried
    out["start_count"] = sols.count
    out["csv"] = base + ".csv"
    out["svg"] = base + ".svg"
    out["meta"] = meta
    _emit_json(args, out)
    return 0


# ---------------------------------------------------------------------------
# parser


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--geometry", help="path to a JSON geometry file")
    common.add_argument("--out", help="output path (JSON report; artifacts share the stem)")
    common.add_argument("--tol", type=float, default=None, help="tolerance override")
    common.add_argument("--threads", type=int, default=1, help="worker threads for grid scans")
    common.add_argument("--seed", type=int, default=0, help="RNG seed recorded in metadata")

    parser = _Parser(prog="planar3rpr", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("check-class", parents=[common], help="validate analytic-class conditions")
    p.set_defaults(func=cmd_check_class)

    p = sub.add_parser("ik", parents=[common], help="inverse kinematics of one pose")
    p.add_argument("--pose", required=True, help="x,y,phi")
    p.set_defaults(func=cmd_ik)

    p = sub.add_parser("fk", parents=[common], help="forward kinematics of one joint vector")
    p.add_argument("--joints", required=True, help="rho1,rho2,rho3")
    p.add_argument("--reference", action="store_true", help="cross-check with the scan oracle")
    p.set_defaults(func=cmd_fk)

    p = sub.add_parser("sing-workspace", parents=[common], help="workspace singularity samples")
    p.add_argument("--grid", help="lo,hi,n for both x and y (default -2,2,81)")
    p.add_argument("--phi", default="0.0", help="comma-separated phi slice values")
    p.set_defaults(func=cmd_sing_workspace)

    p = sub.add_parser("sing-jointspace", parents=[common], help="joint-space surface section")
    p.add_argument("--rho2", type=float, required=True)
    p.add_argument("--grid", help="lo,hi,n for rho1 and rho3 (default 0.1,4,200)")
    p.set_defaults(func=cmd_sing_jointspace)

    p = sub.add_parser("cusps", parents=[common], help="cusp points of a rho2 section")
    p.add_argument("--rho2", type=float, required=True)
    p.add_argument("--grid", help="lo,hi,n search box (default 0.1,4,200)")
    p.set_defaults(func=cmd_cusps)

    p = sub.add_parser("region-map", parents=[common], help="solution-count map of a section")
    p.add_argument("--rho2", type=float, required=True)
    p.add_argument("--grid", help="lo,hi,n (default 0.1,4,200)")
    p.set_defaults(func=cmd_region_map)

    p = sub.add_parser("aspects", parents=[common], help="count singularity-free aspects")
    p.add_argument("--box", default="-3,3", help="lo,hi for both x and y")
    p.add_argument("--resolution", default="60,60,72", help="nx,ny,nphi")
    p.add_argument("--threshold", type=float, default=0.05)
    p.set_defaults(func=cmd_aspects)

    p = sub.add_parser("transit", parents=[common], help="track a branch around a loop")
    p.add_argument("--rho2", type=float, required=True)
    p.add_argument("--center", required=True, help="rho1,rho3 loop center")
    p.add_argument("--radius", type=float, default=0.3)
    p.add_argument("--steps", type=int, default=720)
    p.add_argument("--regular", action="store_true", help="plain circle, skip cusp lookup")
    p.add_argument("--start-index", type=int, default=-1, help="FK branch to start from")
    p.set_defaults(func=cmd_transit)
    return parser


def _merge_negative_values(argv: list[str]) -> list[str]:
    """Join value flags with leading-dash values (e.g. --joints -1,1,1)."""
    out = []
    i = 0
    while i < len(argv):
        tok = argv[i]
        nxt = argv[i + 1] if i + 1 < len(argv) else None
        if (
            tok.startswith("--")
            and "=" not in tok
            and nxt is not None
            and len(nxt) > 1
            and nxt[0] == "-"
            and (nxt[1].isdigit() or nxt[1] == ".")
        ):
            out.append(f"{tok}={nxt}")
            i += 2
        else:
            out.append(tok)
            i += 1
    return out


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = _build_parser()
    try:
        args = parser.parse_args(_merge_negative_values(argv))
        return args.func(args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (GeometryError, KinematicsError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (DegeneracyAbort, MotionError) as e:
        print(f"numerical abort: {e}", file=sys.stderr)
        return 2
    except SystemExit as e:  # argparse --help / --version
        return int(e.code or 0)


if __name__ == "__main__":
    sys.exit(main())
