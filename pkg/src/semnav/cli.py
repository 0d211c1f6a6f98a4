"""Command-line entry points: validate, run, sweep, diffeo-check, saddles, render.

Every subcommand writes a machine-readable report next to its human-readable
output and exits 0 only when all requested checks or runs pass. The SEMNAV_LOG
environment variable sets the log level.
"""

import argparse
import csv
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np
import yaml

from semnav.errors import SemnavError
from semnav.control import Gains, stationary_points
from semnav.diffeo import check_chain, full_map_and_jacobian
from semnav.diffeo.construct import sample_freespace
from semnav.scenario import apply_gap_width, bundled_names, resolve_scenario, save_scenario
from semnav.sim import Simulator
from semnav.world import WorldState, validate_assumptions


def _setup_logging():
    level = os.environ.get("SEMNAV_LOG", "WARNING").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
    )


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _apply_overrides(scenario, args):
    changes = {}
    if getattr(args, "dt", None) is not None:
        changes["dt"] = args.dt
    if getattr(args, "seed", None) is not None:
        changes["seed"] = args.seed
    gains = dict(k=scenario.gains.k, k_v=scenario.gains.k_v, k_omega=scenario.gains.k_omega)
    for item in getattr(args, "gain", None) or []:
        name, _, value = item.partition("=")
        if name not in gains or not value:
            raise SemnavError(f"--gain expects k=/k_v=/k_omega=<value>, got {item!r}")
        gains[name] = float(value)
    if any(gains[k] != getattr(scenario.gains, k) for k in gains):
        changes["gains"] = Gains(**gains)
    if getattr(args, "start", None) is not None:
        x, y = (float(v) for v in args.start.split(","))
        changes["robot"] = replace(scenario.robot, start=(x, y))
    return replace(scenario, **changes) if changes else scenario


def _terminal_world(scenario) -> WorldState:
    world = WorldState(
        scenario.workspace, scenario.catalog, scenario.sensor,
        scenario.robot.radius, scenario.clearance_margin,
    )
    world.make_terminal()
    return world


# -- validate -------------------------------------------------------------------


def cmd_validate(args) -> int:
    sc = _apply_overrides(resolve_scenario(args.scenario), args)
    problems = validate_assumptions(
        sc.workspace, sc.catalog, sc.robot.radius, sc.clearance_margin
    )
    report = {"scenario": sc.name, "problems": problems, "checks": {}}
    try:
        world = _terminal_world(sc)
        report["checks"]["chain"] = f"{len(world.chain.stages)} stages, {len(world.chain.roots)} roots"
        if not world.in_freespace(np.asarray(sc.robot.start)):
            problems.append("start position is not in the freespace")
        if sc.goal is not None and not world.in_freespace(np.asarray(sc.goal)):
            problems.append("goal is not in the freespace")
    except SemnavError as exc:
        problems.append(f"chain construction failed: {exc}")
    hard = [p for p in problems if not p.startswith("warning")]
    report["status"] = "fail" if hard else ("warn" if problems else "pass")
    out = _out_dir(args)
    (out / "validate.json").write_text(json.dumps(report, indent=2) + "\n")
    for p in problems:
        print(p)
    print(f"validate: {report['status']}")
    return 1 if hard else 0


# -- run ------------------------------------------------------------------------


def cmd_run(args) -> int:
    sc = _apply_overrides(resolve_scenario(args.scenario), args)
    sim = Simulator(sc)
    status = "error"
    try:
        trace, metrics = sim.run()
        status = trace.status
    finally:
        out = _out_dir(args)
        (out / "trace.csv").write_text(sim.trace.to_csv())
        if sim.trace.records:
            (out / "metrics.yaml").write_text(
                yaml.safe_dump(sim.metrics().to_dict(), sort_keys=False)
            )
        from semnav.render import render_episode

        (out / "episode.svg").write_text(render_episode(sc, sim.trace, sim.world))
    print(f"run: {sc.name} -> {status} ({len(sim.trace.records) - 1} steps)")
    return 0 if status != "error" else 1


# -- sweep ----------------------------------------------------------------------


def _sweep_case(payload):
    scenario, label = payload
    try:
        trace, metrics = Simulator(scenario).run()
        row = metrics.to_dict()
    except Exception as exc:  # individual failures recorded, sweep continues
        row = {"status": f"failed: {type(exc).__name__}"}
    row["case"] = label
    return row


def cmd_sweep(args) -> int:
    sc = _apply_overrides(resolve_scenario(args.scenario), args)
    values = [v for v in (args.values or "").split(",") if v]
    cases = []
    if args.axis == "gap-width":
        for v in values:
            cases.append((apply_gap_width(sc, float(v)), f"gap={v}"))
    elif args.axis == "gains":
        for v in values:
            k = float(v)
            cases.append(
                (replace(sc, gains=replace(sc.gains, k=k, k_v=k)), f"k={v}")
            )
    elif args.axis == "initial-conditions":
        world = _terminal_world(sc)
        rng = np.random.default_rng(sc.seed if args.seed is None else args.seed)
        count = int(values[0]) if values else 10
        starts = []
        lo = world.boundary.min(axis=0)
        hi = world.boundary.max(axis=0)
        while len(starts) < count:
            p = rng.uniform(lo, hi)
            if world.clearance(p) > 2.5 * sc.robot.radius:
                starts.append(p)
        for i, p in enumerate(starts):
            cases.append(
                (replace(sc, robot=replace(sc.robot, start=(float(p[0]), float(p[1])))),
                 f"ic{i}=({p[0]:.2f},{p[1]:.2f})")
            )
    else:
        raise SemnavError(f"unknown sweep axis {args.axis!r}")

    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_sweep_case, cases))
    else:
        rows = [_sweep_case(c) for c in cases]

    out = _out_dir(args)
    fields = ["case", "status", "path_length", "min_clearance", "time_to_goal",
              "lyapunov_violations", "mode_switches", "mean_step_compute_ms", "steps"]
    with open(out / "sweep.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields, restval="")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row.get(k, "") for k in fields})
    ok = all(str(r.get("status", "")) in ("converged", "halted") for r in rows)
    for r in rows:
        print(f"{r['case']:24s} {r.get('status')}")
    print(f"sweep: {'pass' if ok else 'fail'} ({len(rows)} runs)")
    return 0 if ok else 1


# -- diffeo-check -----------------------------------------------------------------


def cmd_diffeo_check(args) -> int:
    sc = _apply_overrides(resolve_scenario(args.scenario), args)
    world = _terminal_world(sc)
    report = check_chain(world.chain, samples=args.samples,
                         seed=sc.seed if args.seed is None else args.seed)
    out = _out_dir(args)

    # Determinant field on a grid, exported for heatmap rendering.
    lo = world.boundary.min(axis=0)
    hi = world.boundary.max(axis=0)
    n = 80
    xs = np.linspace(lo[0], hi[0], n)
    ys = np.linspace(lo[1], hi[1], n)
    grid = np.stack(np.meshgrid(xs, ys), axis=-1).reshape(-1, 2)
    _, jac = full_map_and_jacobian(grid, world.chain)
    det = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
    inside = np.ones(len(grid), dtype=bool)
    from semnav.geometry import point_polygon_distance

    inside &= point_polygon_distance(grid, world.boundary) < 0
    for poly in world.chain.obstacles:
        inside &= point_polygon_distance(grid, poly) > 0
    with open(out / "determinant.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y", "det"])
        for p, d, keep in zip(grid, det, inside):
            if keep:
                writer.writerow([f"{p[0]!r}", f"{p[1]!r}", f"{d!r}"])

    report_out = {k: v for k, v in report.items()}
    (out / "diffeo_check.json").write_text(json.dumps(report_out, indent=2, default=str) + "\n")
    print(
        f"diffeo-check: {'pass' if report['ok'] else 'FAIL'} "
        f"(det_min={report['det_min']:.3e}, boundary={report['boundary_error']:.2e}, "
        f"jac_fd={report['jacobian_fd_max_rel']:.2e}, identity={report['identity_error']:.2e})"
    )
    for failure in report["failures"]:
        print("  failure:", failure)
    return 0 if report["ok"] else 1


# -- saddles ----------------------------------------------------------------------


def cmd_saddles(args) -> int:
    sc = _apply_overrides(resolve_scenario(args.scenario), args)
    if sc.goal is None:
        raise SemnavError("saddle analysis needs a fixed goal")
    world = _terminal_world(sc)
    # Terminal-mode analysis assumes full knowledge: every unknown obstacle's
    # convex pieces enter the model view (the in-range pruning inside the
    # local-freespace construction keeps the field evaluation local anyway).
    from semnav.world import ModelSpaceView

    pieces = tuple(piece for u in world.catalog.unknown for piece in u.pieces)
    base = world.model_view()
    model = ModelSpaceView(
        boundary=base.boundary,
        disks=base.disks,
        fragments=pieces,
        boundary_planes=base.boundary_planes,
    )
    unknowns = [u.dilated for u in world.catalog.unknown if u.convex]
    points = stationary_points(
        world.chain, model, np.asarray(sc.goal, float), sc.gains,
        world.sensor.range, unknown_obstacles=unknowns,
    )
    rows = []
    ok = True
    for point, kind, norm in points:
        rows.append({"x": float(point[0]), "y": float(point[1]), "kind": kind,
                     "field_norm": norm})
        print(f"  ({point[0]:+.4f}, {point[1]:+.4f})  {kind:10s} |u|={norm:.2e}")
        if kind not in ("goal", "saddle"):
            ok = False
        if kind == "saddle" and norm > 1e-9:
            ok = False
    out = _out_dir(args)
    (out / "saddles.json").write_text(json.dumps(rows, indent=2) + "\n")
    print(f"saddles: {'pass' if ok else 'FAIL'} ({len(rows)} stationary points)")
    return 0 if ok else 1


# -- render -----------------------------------------------------------------------


def cmd_render(args) -> int:
    sc = _apply_overrides(resolve_scenario(args.scenario), args)
    trace = None
    world = None
    if not args.no_run:
        sim = Simulator(sc)
        try:
            trace, _ = sim.run()
        finally:
            world = sim.world
            trace = sim.trace
    from semnav.render import render_episode

    det_field = None
    if args.heatmap:
        world = world or _terminal_world(sc)
        lo = world.boundary.min(axis=0)
        hi = world.boundary.max(axis=0)
        n = 70
        grid = np.stack(
            np.meshgrid(np.linspace(lo[0], hi[0], n), np.linspace(lo[1], hi[1], n)),
            axis=-1,
        ).reshape(-1, 2)
        _, jac = full_map_and_jacobian(grid, world.chain)
        det = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
        from semnav.geometry import point_polygon_distance

        keep = point_polygon_distance(grid, world.boundary) < 0
        for poly in world.chain.obstacles:
            keep &= point_polygon_distance(grid, poly) > 0
        det = np.where(keep, det, np.nan)
        det_field = (grid, det)
    out = _out_dir(args)
    path = out / f"{sc.name}.svg"
    path.write_text(render_episode(sc, trace, world, det_field))
    print(f"render: wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="semnav",
        description="Reactive semantic navigation toolkit "
                    f"(bundled scenarios: {', '.join(bundled_names())})",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, samples=False, sweep=False):
        p.add_argument("--scenario", required=True,
                       help="scenario YAML path or bundled name")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--dt", type=float, default=None)
        p.add_argument("--gain", action="append", metavar="NAME=VALUE",
                       help="override a gain, e.g. --gain k=1.5")
        p.add_argument("--start", default=None, metavar="X,Y",
                       help="override the initial condition")
        if samples:
            p.add_argument("--samples", type=int, default=2000)
        if sweep:
            p.add_argument("--axis", required=True,
                           choices=["gap-width", "initial-conditions", "gains"])
            p.add_argument("--values", default="",
                           help="comma-separated axis values (or a count for ICs)")
            p.add_argument("--jobs", type=int, default=1)

    common(sub.add_parser("validate", help="check the separation assumptions"))
    common(sub.add_parser("run", help="simulate one episode"))
    common(sub.add_parser("sweep", help="batch runs over an axis"), sweep=True)
    common(sub.add_parser("diffeo-check", help="deformation validity battery"),
           samples=True)
    common(sub.add_parser("saddles", help="stationary-point analysis"))
    render_p = sub.add_parser("render", help="draw a scenario (and episode) as SVG")
    common(render_p)
    render_p.add_argument("--no-run", action="store_true")
    render_p.add_argument("--heatmap", action="store_true",
                          help="underlay the Jacobian determinant field")
    return parser


_COMMANDS = {
    "validate": cmd_validate,
    "run": cmd_run,
    "sweep": cmd_sweep,
    "diffeo-check": cmd_diffeo_check,
    "saddles": cmd_saddles,
    "render": cmd_render,
}


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except SemnavError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
