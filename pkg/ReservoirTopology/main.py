"""
Main entry point for the reservoir topology toolkit.
This script provides the command-line interface: python -m ReservoirTopology <command>.
"""
import sys
import argparse
import logging
import time
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
from pydantic import ValidationError

from . import config
from .batch_runner import betti_sweep, simulate_realizations, summarize_report
from .cubical_topology import betti_frame, betti_table
from .errors import ReservoirTopologyError
from .grid_io import GridFormat, atomic_write_text, read_conditioning, read_grid, write_grid, write_json
from .persistence import (
    Filtration, PlaneNorm, bottleneck_distance, distance_matrix, medoid, persistence_matrix, persistence_q0,
    read_diagram, write_diagram,
)
from .reservoir_grid import ScalarField, normalize_gl
from .schemas import (
    ClampPolicy, GridGeometry, KrigingMode, MarginalTransform, RunManifest, SgsConfig, ValueKind,
    VariogramKind, VariogramModel,
)

logger = logging.getLogger("reservoir-topology")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2
DEFAULT_ALPHAS = "0.1..0.9:0.1"
VARIOGRAM_NAMES = {"exp": VariogramKind.EXPONENTIAL, "gauss": VariogramKind.GAUSSIAN}
FORMAT_NAMES = {"binary": GridFormat.RAW_BINARY, "gslib": GridFormat.GSLIB_ASCII}


class UsageError(Exception):
    """Invalid combination of command-line arguments."""


def parse_alphas(text: str) -> List[float]:
    """Parse "lo..hi:step", a comma-separated list, or a single value."""
    text = text.strip()
    try:
        if ".." in text:
            bounds, _, step_text = text.partition(":")
            lo_text, _, hi_text = bounds.partition("..")
            lo, hi = float(lo_text), float(hi_text)
            step = float(step_text) if step_text else config.RESERVOIR_TOPO_STEP
            if step <= 0 or hi < lo:
                raise UsageError(f"bad threshold range {text!r}")
            count = int(round((hi - lo) / step))
            return [float(a) for a in np.round(lo + np.arange(count + 1) * step, 10)]
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise UsageError(f"cannot parse thresholds {text!r}; use 0.1..0.9:0.1 or 0.1,0.5")


def manifest_path(args, primary: Path) -> Path:
    if getattr(args, "manifest", None):
        return Path(args.manifest)
    return primary.with_name(primary.name + ".manifest.json")


def write_manifest(args, command: str, argv: Sequence[str], outputs: Sequence[Path], inputs: Sequence[str] = (),
                   seeds: Sequence[int] = (), settings: Optional[Dict] = None,
                   timings: Optional[Dict[str, float]] = None) -> Path:
    """Record what was run, on what, and what it produced, next to the primary output."""
    path = manifest_path(args, Path(outputs[0]))
    manifest = RunManifest(
        command=command,
        argv=list(argv),
        config={
            "threads": config.RESERVOIR_TOPO_THREADS,
            "step": config.RESERVOIR_TOPO_STEP,
            "matrix_budget": config.RESERVOIR_TOPO_MATRIX_BUDGET,
            "template_nodes": config.RESERVOIR_TOPO_TEMPLATE_NODES,
            "multigrid_levels": config.RESERVOIR_TOPO_MULTIGRID_LEVELS,
            **(settings or {}),
        },
        seeds=list(seeds),
        inputs=[str(p) for p in inputs],
        outputs=[str(p) for p in outputs],
        timings=timings or {},
        created_at=datetime.now(timezone.utc).isoformat(),
    )
    write_json(path, manifest.model_dump(mode="json"))
    logger.info(f"Manifest written to {path}")
    return path


def load_alpha_field(path: str, gl_min: Optional[float], gl_max: Optional[float],
                     clamp: ClampPolicy = ClampPolicy.CLAMP) -> ScalarField:
    """Read a grid and normalize it when a GL calibration range is given."""
    if (gl_min is None) != (gl_max is None):
        raise UsageError("--gl-min and --gl-max must be given together")
    field = read_grid(path)
    if gl_min is None:
        return field
    if field.value_kind != ValueKind.RAW_GL:
        field = ScalarField(field.geometry, field.values, ValueKind.RAW_GL)
    field, out_of_range = normalize_gl(field, gl_min, gl_max, clamp)
    if out_of_range.total:
        logger.warning(f"{path}: {out_of_range.below} cells below and {out_of_range.above} cells "
                       f"at or above the calibration range ({clamp.value})")
    return field


# --- Commands ---

def cmd_simulate(args, argv: Sequence[str]) -> int:
    seeds = args.seed or [0]
    if len(seeds) > 1 and "{seed}" not in args.out:
        raise UsageError("--out needs a {seed} placeholder when several --seed values are given")

    geometry = GridGeometry(
        origin=(args.x0, args.y0, args.z0),
        counts=(args.nx, args.ny, args.nz),
        spacings=(args.dx, args.dy, args.dz),
    )
    model = VariogramModel(
        kind=VARIOGRAM_NAMES[args.variogram], range_m=args.range, sill=args.sill, mean=args.mean,
        anisotropy=tuple(args.anisotropy),
    )
    if args.config:
        sgs_config = SgsConfig.model_validate_json(Path(args.config).read_text())
    else:
        sgs_config = SgsConfig(seed=seeds[0])
    overrides = {
        "max_points": args.max_points,
        "search_radius": args.search_radius,
        "marginal_transform": args.transform,
        "kriging_mode": args.kriging,
        "multigrid_levels": args.multigrid,
    }
    sgs_config = SgsConfig.model_validate({**sgs_config.model_dump(),
                                           **{k: v for k, v in overrides.items() if v is not None}})
    conditioning = read_conditioning(args.conditioning) if args.conditioning else []

    print("\n==== Sequential Gaussian Simulation ====")
    print(f"Grid: {geometry.shape} cells of {geometry.spacings} m")
    print(f"Variogram: {model.kind.value}, R={model.range_m} m, sill={model.sill}")
    print(f"Seeds: {seeds}")
    print(f"Conditioning points: {len(conditioning)}")
    print("========================================\n")

    start = time.perf_counter()
    fields = simulate_realizations(geometry, model, seeds, conditioning, sgs_config, args.jobs)
    elapsed = time.perf_counter() - start

    outputs: List[Path] = []
    for seed, field in zip(seeds, fields):
        path = Path(args.out.replace("{seed}", str(seed)))
        outputs.extend(write_grid(field, path, FORMAT_NAMES[args.format],
                                  title=f"SGS {model.kind.value} R={model.range_m} seed={seed}"))
    inputs = [args.conditioning] if args.conditioning else []
    if args.config:
        inputs.append(args.config)
    write_manifest(args, "simulate", argv, outputs, inputs=inputs, seeds=seeds,
                   settings={"geometry": geometry.model_dump(mode="json"), "variogram": model.model_dump(mode="json"),
                             "sgs": sgs_config.model_dump(mode="json")},
                   timings={"simulate_s": elapsed})

    print("\n==== Simulation Results ====")
    for path in outputs:
        print(f"Wrote: {path}")
    print(f"Elapsed: {elapsed:.1f} s")
    print("============================\n")
    return EXIT_OK


def cmd_betti(args, argv: Sequence[str]) -> int:
    alphas = parse_alphas(args.alphas)
    field = load_alpha_field(args.field, args.gl_min, args.gl_max, ClampPolicy(args.clamp))
    start = time.perf_counter()
    frame = betti_frame(betti_table(field, alphas, physical=args.physical_volume, n_jobs=args.jobs))
    elapsed = time.perf_counter() - start
    text = frame.to_csv(index=False)
    if not args.out:
        sys.stdout.write(text)
        return EXIT_OK
    out = atomic_write_text(args.out, text)
    write_manifest(args, "betti", argv, [out], inputs=[args.field],
                   settings={"alphas": alphas, "physical_volume": args.physical_volume},
                   timings={"betti_s": elapsed})
    print(f"\n==== Betti Numbers ====")
    print(f"Field: {args.field}")
    print(f"Thresholds: {len(alphas)}")
    print(f"Table: {out}")
    print("=======================\n")
    return EXIT_OK


def cmd_persist(args, argv: Sequence[str]) -> int:
    method = args.method or ("union-find" if args.q == 0 else "matrix")
    if method == "union-find" and args.q != 0:
        raise UsageError("the union-find method only computes q=0 diagrams")
    if args.step is not None and not args.step > 0:
        raise UsageError(f"--step must be positive, got {args.step}")
    field = load_alpha_field(args.field, args.gl_min, args.gl_max)
    if args.thresholds == "values":
        filtration = Filtration.from_values(field)
    else:
        filtration = Filtration.from_field(field, args.step)

    start = time.perf_counter()
    if method == "union-find":
        diagram = persistence_q0(filtration)
    else:
        diagram = persistence_matrix(filtration, args.q)
    elapsed = time.perf_counter() - start

    out = write_diagram(diagram, args.out)
    write_manifest(args, "persist", argv, [out], inputs=[args.field],
                   settings={"q": args.q, "method": method, "thresholds": args.thresholds,
                             "step": args.step if args.step is not None else config.RESERVOIR_TOPO_STEP},
                   timings={"persist_s": elapsed})
    print(f"\n==== Persistence Diagram (q={args.q}) ====")
    print(f"Field: {args.field}")
    print(f"Thresholds: {len(filtration)}")
    print(f"Finite points: {diagram.points.shape[0]}")
    print(f"Essential classes: {diagram.essential.size}")
    print(f"Diagram: {out}")
    print("=========================================\n")
    return EXIT_OK


def cmd_bottleneck(args, argv: Sequence[str]) -> int:
    norm = PlaneNorm(args.norm)
    if args.matrix is None:
        if not (args.a and args.b):
            raise UsageError("give --a and --b, or --matrix DIR")
        print(f"{bottleneck_distance(read_diagram(args.a), read_diagram(args.b), norm):.12g}")
        return EXIT_OK

    directory = Path(args.matrix)
    paths = sorted(p for p in directory.glob("*.json") if not p.name.endswith(".manifest.json"))
    if len(paths) < 2:
        raise UsageError(f"{directory} holds {len(paths)} diagram files; at least 2 are needed")
    labels = [p.stem for p in paths]
    start = time.perf_counter()
    frame = distance_matrix([read_diagram(p) for p in paths], labels, norm, args.jobs)
    elapsed = time.perf_counter() - start
    text = frame.to_csv()
    centre = medoid(frame.to_numpy(), labels)
    if args.out:
        out = atomic_write_text(args.out, text)
        write_manifest(args, "bottleneck", argv, [out], inputs=[str(p) for p in paths],
                       settings={"norm": norm.value}, timings={"matrix_s": elapsed})
        print(f"Distance matrix: {out}")
    else:
        sys.stdout.write(text)
    print(f"Medoid: {centre}")
    return EXIT_OK


def cmd_report(args, argv: Sequence[str]) -> int:
    alphas = parse_alphas(args.alphas)
    labels = args.labels or [Path(p).stem for p in args.fields]
    if len(labels) != len(args.fields):
        raise UsageError(f"{len(labels)} labels for {len(args.fields)} fields")
    if len(set(labels)) != len(labels):
        raise UsageError("field labels must be unique")
    fields = {label: load_alpha_field(path, args.gl_min, args.gl_max) for label, path in zip(labels, args.fields)}

    start = time.perf_counter()
    frame = betti_sweep(fields, alphas, physical=args.physical_volume, n_jobs=args.jobs)
    summary = summarize_report(frame)
    elapsed = time.perf_counter() - start

    out = atomic_write_text(args.out, frame.to_csv(index=False))
    summary_path = Path(args.summary) if args.summary else out.with_suffix(".summary.json")
    write_json(summary_path, summary)
    write_manifest(args, "report", argv, [out, summary_path], inputs=args.fields,
                   settings={"alphas": alphas, "physical_volume": args.physical_volume},
                   timings={"report_s": elapsed})
    print("\n==== Weighted Betti Report ====")
    print(f"Fields: {len(fields)}")
    print(f"Rows: {len(frame)}")
    print(f"Scatter table: {out}")
    print(f"Summary: {summary_path}")
    print("===============================\n")
    return EXIT_OK


def cmd_config(args, argv: Sequence[str]) -> int:
    config.debug_config()
    return EXIT_OK


# --- Parser ---

def _add_field_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--gl-min", type=float, default=None, help="GL calibration minimum (raw_gl fields)")
    parser.add_argument("--gl-max", type=float, default=None, help="GL calibration maximum (raw_gl fields)")


def _add_output_args(parser: argparse.ArgumentParser, out_required: bool) -> None:
    parser.add_argument("--out", required=out_required, help="Primary output path")
    parser.add_argument("--manifest", default=None, help="Manifest path (default: <out>.manifest.json)")
    parser.add_argument("--jobs", type=int, default=None, help="Worker count (default: RESERVOIR_TOPO_THREADS)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="python -m ReservoirTopology",
                                     description="Topology of simulated reservoir excursion sets")
    commands = parser.add_subparsers(dest="command", required=True)

    sim = commands.add_parser("simulate", help="Sequential Gaussian simulation of an alpha field")
    for axis in ("x", "y", "z"):
        sim.add_argument(f"--n{axis}", type=int, required=True, help=f"Cells along {axis}")
        sim.add_argument(f"--d{axis}", type=float, default=1.0, help=f"Cell size along {axis} (m)")
        sim.add_argument(f"--{axis}0", type=float, default=0.0, help=f"Origin {axis} (m)")
    sim.add_argument("--variogram", choices=sorted(VARIOGRAM_NAMES), required=True)
    sim.add_argument("--range", type=float, required=True, help="Variogram radius R (m)")
    sim.add_argument("--sill", type=float, default=1.0)
    sim.add_argument("--mean", type=float, default=0.0)
    sim.add_argument("--anisotropy", type=float, nargs=3, default=(1.0, 1.0, 1.0), metavar=("AX", "AY", "AZ"))
    sim.add_argument("--seed", type=int, action="append", help="Realization seed (repeatable)")
    sim.add_argument("--conditioning", default=None, help="CSV with kx,ky,kz,value (1-based)")
    sim.add_argument("--config", default=None, help="SGS settings JSON")
    sim.add_argument("--max-points", type=int, default=None)
    sim.add_argument("--search-radius", type=float, default=None)
    sim.add_argument("--transform", choices=[t.value for t in MarginalTransform], default=None)
    sim.add_argument("--kriging", choices=[m.value for m in KrigingMode], default=None)
    sim.add_argument("--multigrid", type=int, default=None,
                     help="Coarse sub-lattices simulated first (0 = plain random path)")
    sim.add_argument("--format", choices=sorted(FORMAT_NAMES), default="binary")
    _add_output_args(sim, out_required=True)
    sim.set_defaults(handler=cmd_simulate)

    betti = commands.add_parser("betti", help="Betti numbers of excursion sets")
    betti.add_argument("--field", required=True)
    betti.add_argument("--alphas", default=DEFAULT_ALPHAS, help="lo..hi:step or a comma list")
    betti.add_argument("--clamp", choices=[c.value for c in ClampPolicy], default=ClampPolicy.CLAMP.value)
    betti.add_argument("--physical-volume", action="store_true", help="Weight by cubic metres, not cell count")
    _add_field_args(betti)
    _add_output_args(betti, out_required=False)
    betti.set_defaults(handler=cmd_betti)

    persist = commands.add_parser("persist", help="Persistence diagram of the excursion filtration")
    persist.add_argument("--field", required=True)
    persist.add_argument("--q", type=int, choices=[0, 1, 2], default=0)
    persist.add_argument("--step", type=float, default=None, help="Threshold step (default: RESERVOIR_TOPO_STEP)")
    persist.add_argument("--thresholds", choices=["grid", "values"], default="grid")
    persist.add_argument("--method", choices=["union-find", "matrix"], default=None)
    _add_field_args(persist)
    _add_output_args(persist, out_required=True)
    persist.set_defaults(handler=cmd_persist)

    bottleneck = commands.add_parser("bottleneck", help="Bottleneck distance between diagrams")
    bottleneck.add_argument("--a", default=None, help="First diagram JSON")
    bottleneck.add_argument("--b", default=None, help="Second diagram JSON")
    bottleneck.add_argument("--matrix", default=None, help="Directory of diagram JSON files")
    bottleneck.add_argument("--norm", choices=[n.value for n in PlaneNorm], default=PlaneNorm.L1.value)
    _add_output_args(bottleneck, out_required=False)
    bottleneck.set_defaults(handler=cmd_bottleneck)

    report = commands.add_parser("report", help="Weighted Betti scatter table and summary")
    report.add_argument("--fields", nargs="+", required=True)
    report.add_argument("--labels", nargs="+", default=None)
    report.add_argument("--alphas", default=DEFAULT_ALPHAS)
    report.add_argument("--physical-volume", action="store_true")
    report.add_argument("--summary", default=None, help="Summary JSON (default: <out>.summary.json)")
    _add_field_args(report)
    _add_output_args(report, out_required=True)
    report.set_defaults(handler=cmd_report)

    cfg = commands.add_parser("config", help="Print the effective configuration")
    cfg.set_defaults(handler=cmd_config)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main entry point for the reservoir topology CLI."""
    logging.basicConfig(
        level=config.get_log_level(),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    try:
        return args.handler(args, argv)
    except (UsageError, ValidationError) as e:
        print(f"{parser.prog} {args.command}: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (ReservoirTopologyError, OSError) as e:
        logger.error(f"{args.command} failed: {e}")
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
