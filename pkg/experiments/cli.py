"""
Batch command-line front end.

Exit codes: 0 ok, 1 invalid config or failed check, 2 I/O, 3 numerical
failure, 4 precondition, 5 usage.
"""

import argparse
import logging
import sys
import time
from collections.abc import Callable, Sequence
from datetime import UTC, datetime
from importlib import metadata
from pathlib import Path

import numpy as np
from prometheus_client import write_to_textfile

from analysis.charflow import compute_blowup
from analysis.geometry import causal_speed_set, ellipse_boundary
from analysis.profiles import make_profile, validate_params, write_profile_csv
from common.config import ExperimentConfig, load_config, settings
from common.errors import LabError, PreconditionError
from common.metrics import (
    ERROR_COUNT,
    EXPERIMENT_DURATION,
    EXPERIMENT_RUNS,
    LAB_INFO,
    REGISTRY,
)
from common.models import (
    BlowupReport,
    DyadicReport,
    ExperimentName,
    ExperimentReport,
    ExportKind,
    FDReport,
    GeometryReport,
    GlueReport,
    LifespanReport,
    ProfileKind,
    ProfileParams,
    RunManifest,
    ScalingReport,
    SelftestReport,
)
from experiments.blowup import run_blowup
from experiments.checks import fd_checks, geometry_checks, norms_selftest
from experiments.dyadic import run_dyadic
from experiments.lifespan import lifespan_sweep
from experiments.reporting import write_csv, write_json
from experiments.scaling import build_glued_sequence, run_scaling

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_IO = 2
EXIT_NUMERICAL = 3
EXIT_PRECONDITION = 4
EXIT_USAGE = 5

PACKAGE = "wave-illposedness-lab"


class LabArgumentParser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def code_version() -> str:
    try:
        return metadata.version(PACKAGE)
    except metadata.PackageNotFoundError:
        return "0.1.0"


def build_parser() -> LabArgumentParser:
    parser = LabArgumentParser(prog="wave-lab", description="Ill-posedness verification lab")
    parser.add_argument("--config", type=Path, default=None, help="Experiment config (TOML)")
    parser.add_argument("--out", type=Path, default=None, help="Output directory")
    parser.add_argument("--threads", type=int, default=settings.THREADS)
    parser.add_argument("--seed", type=int, default=settings.SEED)
    parser.add_argument(
        "--strict",
        action="store_true",
        default=settings.STRICT,
        help="Treat informational checks as gating",
    )
    parser.add_argument("--log-level", default=settings.LOG_LEVEL)

    commands = parser.add_subparsers(dest="command", required=True)
    commands.add_parser("validate", help="Check the config and the parameter constraints")

    run = commands.add_parser("run", help="Run one experiment")
    run.add_argument("experiment", choices=[e.value for e in ExperimentName])

    export = commands.add_parser("export", help="Write profile, field or geometry artifacts")
    export.add_argument("kind", choices=[k.value for k in ExportKind])
    export.add_argument("--kind", dest="profile_kind", default=ProfileKind.CHI_EPS.value,
                        choices=[k.value for k in ProfileKind])
    export.add_argument("--points", type=int, default=10_000)
    export.add_argument("--x2", type=float, default=0.0)
    export.add_argument("--t-fraction", type=float, default=0.5)
    export.add_argument("--v", type=float, default=-0.005)
    export.add_argument("--j-min", type=int, default=None)
    export.add_argument("--j-max", type=int, default=None)
    return parser


# Validation


def _require_valid(p: ProfileParams, section: str) -> None:
    violations = validate_params(p)
    if violations:
        listing = "; ".join(f"{v.constraint} (margin {v.margin:.4g})" for v in violations)
        raise PreconditionError(f"[{section}] violates: {listing}")


def cmd_validate(cfg: ExperimentConfig) -> tuple[list[Path], bool]:
    ok = True
    for section, p in (("params", cfg.params), ("blowup.params", cfg.blowup.params)):
        for v in validate_params(p):
            ok = False
            print(f"[{section}] {v.constraint}: margin {v.margin:.6g}")
    if ok:
        print("config valid")
    return [], ok


# Experiments


def run_experiment(
    name: ExperimentName, cfg: ExperimentConfig, threads: int = 1, seed: int = 0
) -> ExperimentReport:
    params = cfg.blowup.params if name is ExperimentName.BLOWUP else cfg.params
    _require_valid(params, "blowup.params" if name is ExperimentName.BLOWUP else "params")
    match name:
        case ExperimentName.DYADIC:
            return run_dyadic(cfg.params, cfg.dyadic, threads)
        case ExperimentName.BLOWUP:
            return run_blowup(cfg.blowup, cfg.grids, threads)
        case ExperimentName.LIFESPAN:
            return lifespan_sweep(cfg.params, cfg.lifespan, threads, cfg.grids.scan_points)
        case ExperimentName.SCALING:
            return run_scaling(cfg.params, cfg.scaling)
        case ExperimentName.GLUE:
            return build_glued_sequence(cfg.params, cfg.glue)
        case ExperimentName.GEOMETRY:
            return geometry_checks(cfg, threads, seed)
        case ExperimentName.FDCHECK:
            return fd_checks(cfg)
        case ExperimentName.NORMS_SELFTEST:
            return norms_selftest(cfg, seed)
    raise PreconditionError(f"unknown experiment {name!r}")


def _curves(report: ExperimentReport) -> dict[str, tuple[list[str], list]]:
    """CSV tables for a report, keyed by file suffix."""
    match report:
        case DyadicReport():
            b = report.blocks
            return {
                "blocks": (
                    ["j", "lam", "norm_sq", "error_estimate", "flagged"],
                    [[x.j for x in b], [x.lam for x in b], [x.norm_sq for x in b],
                     [x.error_estimate for x in b], [x.flagged for x in b]],
                )
            }
        case BlowupReport():
            s = report.samples
            return {
                "samples": (
                    ["tau", "t", "i1", "i2", "i3", "remainder", "norm_sq", "ratio"],
                    [[getattr(x, k) for x in s]
                     for k in ("tau", "t", "i1", "i2", "i3", "remainder", "norm_sq", "ratio")],
                )
            }
        case LifespanReport():
            r = report.rows
            return {
                "table": (
                    ["epsilon", "t_eps", "bound", "product"],
                    [[x.epsilon for x in r], [x.t_eps for x in r], [x.bound for x in r],
                     [x.product for x in r]],
                )
            }
        case ScalingReport():
            r = report.rows
            return {
                "ratios": (
                    ["lam", "norm", "predicted", "ratio"],
                    [[x.lam for x in r], [x.norm for x in r], [x.predicted for x in r],
                     [x.ratio for x in r]],
                )
            }
        case GlueReport():
            t = report.terms
            return {
                "terms": (
                    ["n", "t_n", "t_bound", "norm_bound", "partial_sum", "width_bound"],
                    [[x.n for x in t], [x.t_n for x in t], [x.t_bound for x in t],
                     [x.norm_bound for x in t], [x.partial_sum for x in t],
                     [x.width_bound for x in t]],
                )
            }
        case GeometryReport():
            e = report.ellipse
            tables = {
                "ellipse": (
                    ["v", "max_radius", "off_tangency_max", "off_tangency_bound"],
                    [[x.v for x in e], [x.max_radius for x in e], [x.off_tangency_max for x in e],
                     [x.off_tangency_bound for x in e]],
                ),
                "clearance": (
                    ["t", "straight_line", "chain", "clearance"],
                    [[getattr(x, k) for x in report.clearance]
                     for k in ("t", "straight_line", "chain", "clearance")],
                ),
            }
            if report.width is not None:
                tables["width"] = (["y", "ratio"], [report.width.ys, report.width.ratios])
            return tables
        case FDReport():
            return {
                name: (["h", "steps", "error"],
                       [[x.h for x in levels], [x.steps for x in levels], [x.error for x in levels]])
                for name, levels in (("levels", report.levels), ("residual", report.residual_levels))
            }
        case SelftestReport():
            g = report.gaussian
            return {
                "gaussian": (
                    ["s", "computed", "expected", "rel_error"],
                    [[x.s for x in g], [x.computed for x in g], [x.expected for x in g],
                     [x.rel_error for x in g]],
                )
            }
    return {}


def _write_report(report: ExperimentReport, stem: str, out_dir: Path, with_csv: bool) -> list[Path]:
    outputs = [write_json(report, out_dir / f"{stem}.json")]
    if with_csv:
        for suffix, (header, columns) in _curves(report).items():
            outputs.append(write_csv(out_dir / f"{stem}-{suffix}.csv", header, columns))
    return outputs


def cmd_run(
    args: argparse.Namespace, cfg: ExperimentConfig, out_dir: Path
) -> tuple[list[Path], bool]:
    name = ExperimentName(args.experiment)
    start_time = time.perf_counter()
    logger.info(f"Running {name.value} with {args.threads} thread(s), seed {args.seed}")
    try:
        report = run_experiment(name, cfg, args.threads, args.seed)
    finally:
        EXPERIMENT_DURATION.labels(experiment=name.value).observe(time.perf_counter() - start_time)
    passed = report.strict_passed() if args.strict else report.passed
    EXPERIMENT_RUNS.labels(experiment=name.value, outcome="pass" if passed else "fail").inc()
    logger.info(f"{name.value} finished: {'pass' if passed else 'FAIL'}")
    return _write_report(report, name.value, out_dir, cfg.output.write_csv), passed


# Exports


def _profile_grid(kind: ProfileKind, p: ProfileParams, points: int) -> np.ndarray:
    match kind:
        case ProfileKind.MOLLIFIER_PSI_EPS:
            return np.linspace(0.0, 2 * p.epsilon, points)
        case ProfileKind.CUTOFF_PSI:
            return np.linspace(-1.0, 1.0, points)
        case ProfileKind.DYADIC_ZETA:
            return np.linspace(0.0, 4.0, points)
    # the log profiles are singular at 0
    return np.linspace(0.5 / points, 0.5, points)


def cmd_export(
    args: argparse.Namespace, cfg: ExperimentConfig, out_dir: Path
) -> tuple[list[Path], bool]:
    kind = ExportKind(args.kind)
    p = cfg.params
    match kind:
        case ExportKind.PROFILE:
            profile_kind = ProfileKind(args.profile_kind)
            profile = make_profile(profile_kind, p)
            grid = _profile_grid(profile_kind, p, args.points)
            return [write_profile_csv(profile, grid, out_dir / f"profile-{profile_kind.value}.csv", args.x2)], True
        case ExportKind.FIELD_AT_T:
            if not 0 <= args.t_fraction < 1:
                raise PreconditionError(f"t-fraction must lie in [0, 1), got {args.t_fraction}")
            flow = compute_blowup(p, cfg.grids.scan_points)
            t = args.t_fraction * flow.t_eps
            grid = np.linspace(float(flow.phi(t, 0.0)), float(flow.phi(t, 0.5)), args.points)
            return [flow.sample_field(t, grid).to_csv(out_dir / "field-at-t.csv")], True
        case ExportKind.ELLIPSE:
            params = causal_speed_set(args.v)
            theta, x, y = ellipse_boundary(args.v, cfg.geometry.boundary_points)
            return [
                write_csv(out_dir / "ellipse.csv", ["theta", "x", "y"], [theta, x, y]),
                write_json(params, out_dir / "ellipse.json"),
            ], True
        case ExportKind.DYADIC_BLOCKS:
            update = {
                k: v for k, v in (("j_min", args.j_min), ("j_max", args.j_max)) if v is not None
            }
            report = run_dyadic(p, cfg.dyadic.model_copy(update=update), args.threads, uniformity=False)
            return _write_report(report, "dyadic-blocks", out_dir, True), True
    raise PreconditionError(f"unknown export kind {kind!r}")


COMMANDS: dict[str, Callable[..., tuple[list[Path], bool]]] = {
    "run": cmd_run,
    "export": cmd_export,
}


def _target(args: argparse.Namespace) -> str | None:
    return getattr(args, "experiment", None) or getattr(args, "kind", None)


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(), format=settings.LOG_FORMAT)
    version = code_version()
    target = _target(args)
    LAB_INFO.info({"version": version, "command": args.command, "target": target or ""})

    manifest = RunManifest(
        command=args.command,
        target=target,
        config={},
        version=version,
        seed=args.seed,
        threads=args.threads,
        started_at=datetime.now(UTC),
    )
    out_dir = Path(args.out) if args.out else settings.OUTPUT_DIR
    outputs: list[Path] = []
    passed = False
    error = None
    try:
        cfg = load_config(args.config)
        manifest.config = cfg.model_dump(mode="json", by_alias=True)
        if args.out is None and cfg.output.dir is not None:
            out_dir = cfg.output.dir
        if args.command == "validate":
            outputs, passed = cmd_validate(cfg)
        else:
            outputs, passed = COMMANDS[args.command](args, cfg, out_dir)
        exit_code = EXIT_OK if passed else EXIT_FAILED
    except LabError as e:
        logger.error(f"{type(e).__name__}: {e}")
        ERROR_COUNT.labels(experiment=target or args.command, error_type=type(e).__name__).inc()
        exit_code, error = e.exit_code, str(e)
    except OSError as e:
        logger.error(f"I/O failure: {e}")
        ERROR_COUNT.labels(experiment=target or args.command, error_type="io_error").inc()
        exit_code, error = EXIT_IO, str(e)

    manifest = manifest.model_copy(
        update={
            "finished_at": datetime.now(UTC),
            "outputs": [str(p) for p in outputs],
            "passed": passed and exit_code == EXIT_OK,
            "exit_code": exit_code,
            "error": error,
        }
    )
    stem = f"{args.command}-{target}" if target else args.command
    try:
        write_json(manifest, out_dir / f"{stem}.manifest.json")
        write_to_textfile(str(out_dir / settings.METRICS_FILE), REGISTRY)
    except OSError as e:
        logger.error(f"Cannot write manifest to {out_dir}: {e}")
        return EXIT_IO
    return exit_code


if __name__ == "__main__":
    sys.exit(main())
