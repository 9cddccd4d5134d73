"""Command-line entry point: python -m src.cli {sweep,bounds,compare,study,models}.

Exit codes: 0 converged, 2 not converged, 3 input error, 4 oracle failure.
"""
import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ValidationError, model_validator

from config import Settings
from .bounds import BoundParams, all_bounds
from .domain import FrequencyBand, SampleGrid, make_uniform_grid, partition_band
from .errors import InputError, InterpolationError, MetricError, OracleError
from .oracles import RationalOracle, TabulatedOracle, get_model, load_corpus
from .parsers import load_csv_sweep, load_touchstone, write_csv_sweep
from .refinement import (
    SweepConfig, SweepReport, assess_parts, dense_reference, relative_error,
    run_adaptive_sweep, study_parts, study_thresholds
)
from .run_ledger import RunLedger

logger = logging.getLogger(__name__)

EXIT_CONVERGED = 0
EXIT_NOT_CONVERGED = 2
EXIT_INPUT_ERROR = 3
EXIT_ORACLE_FAILURE = 4


class UsageError(InputError):
    """Malformed command line."""


class SweepArgumentParser(argparse.ArgumentParser):
    """ArgumentParser that reports usage errors with the input-error exit code."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT_ERROR, f"{self.prog}: error: {message}\n")


class RunManifest(BaseModel):
    """Sweep run description; JSON file keys mirror the sweep flags."""

    band: Optional[Tuple[float, float]] = None
    dense_points: Optional[int] = None
    n_parts: Optional[int] = None
    threshold: Optional[float] = None
    seed_samples: Optional[int] = None
    max_iterations: Optional[int] = None
    model: Optional[str] = None
    csv: Optional[str] = None
    touchstone: Optional[str] = None
    port_pair: Tuple[int, int] = (1, 1)
    out: Optional[str] = None
    emit_plot_data: bool = False
    ledger: bool = False

    @model_validator(mode="after")
    def _one_oracle(self) -> "RunManifest":
        given = [k for k in ("model", "csv", "touchstone") if getattr(self, k)]
        if len(given) != 1:
            raise ValueError(f"exactly one oracle (model, csv or touchstone) is required, got {given or 'none'}")
        return self

    @property
    def oracle_label(self) -> str:
        if self.model:
            return self.model
        if self.csv:
            return f"csv={self.csv}"
        return f"ts={self.touchstone}:{self.port_pair[0]}{self.port_pair[1]}"


def parse_band(text: str) -> Tuple[float, float]:
    """Parse '<f_min>:<f_max>' in Hz."""
    try:
        lo, hi = text.split(":")
        return float(lo), float(hi)
    except ValueError:
        raise UsageError(f"band must look like <f_min>:<f_max> in Hz, got '{text}'")


def parse_oracle_spec(text: str) -> Dict:
    """Translate --oracle <name|csv=path|ts=path:ij> into manifest keys."""
    if text.startswith("csv="):
        return {"csv": text[4:]}
    if text.startswith("ts="):
        body = text[3:]
        path, sep, pair = body.rpartition(":")
        if sep and len(pair) == 2 and pair.isdigit():
            return {"touchstone": path, "port_pair": (int(pair[0]), int(pair[1]))}
        return {"touchstone": body}
    if not text:
        raise UsageError("empty oracle spec")
    return {"model": text}


def build_manifest(args: argparse.Namespace) -> RunManifest:
    """Merge a JSON manifest file with command-line flags (flags win)."""
    data: Dict = {}
    if args.config:
        path = Path(args.config)
        if not path.exists():
            raise InputError(f"manifest not found: {path}")
        try:
            with open(path, 'r') as f:
                data = json.load(f)
        except json.JSONDecodeError as e:
            raise InputError(f"manifest {path} is not valid JSON: {e}")
        if "oracle" in data:
            data.update(parse_oracle_spec(str(data.pop("oracle"))))
        if isinstance(data.get("band"), str):
            data["band"] = parse_band(data["band"])

    flags = {
        "band": parse_band(args.band) if args.band else None,
        "dense_points": args.dense,
        "n_parts": args.parts,
        "threshold": args.threshold,
        "seed_samples": args.seed_samples,
        "max_iterations": args.max_iters,
        "out": args.out
    }
    data.update({k: v for k, v in flags.items() if v is not None})
    if args.oracle:
        for key in ("model", "csv", "touchstone"):
            data.pop(key, None)
        data.update(parse_oracle_spec(args.oracle))
    if args.emit_plot_data:
        data["emit_plot_data"] = True
    if args.ledger:
        data["ledger"] = True
    return RunManifest(**data)


def build_run(manifest: RunManifest, settings: Settings):
    """Resolve the oracle and sweep configuration of a manifest.

    A synthetic model defaults to its corpus band; a tabulated sweep defaults to
    its own span and point count and answers within half the dense spacing.
    """
    if manifest.model:
        model = get_model(manifest.model, settings.corpus_file or None)
        default_band, default_dense = model.band, None
        oracle = RationalOracle(model)
        sweep = None
    else:
        if manifest.csv:
            sweep = load_csv_sweep(manifest.csv)
        else:
            sweep = load_touchstone(manifest.touchstone, manifest.port_pair)
        default_band, default_dense = sweep.band, len(sweep.grid)
        oracle = None

    if manifest.band is not None:
        band = FrequencyBand(f_min=manifest.band[0], f_max=manifest.band[1])
    elif default_band is not None:
        band = default_band
    else:
        raise InputError(f"model '{manifest.model}' has no default band; pass --band")

    n_parts = manifest.n_parts or settings.n_parts
    config = SweepConfig(
        band=band,
        dense_points=manifest.dense_points or default_dense or settings.dense_points,
        n_parts=n_parts,
        part_error_threshold=manifest.threshold or settings.part_error_threshold,
        initial_samples=manifest.seed_samples,
        max_iterations=manifest.max_iterations or settings.max_iterations
    )
    if sweep is not None:
        oracle = TabulatedOracle(sweep, tolerance=band.width / (config.dense_points - 1) / 2.0)
    return oracle, config


def format_report(report: SweepReport, oracle_label: str, status: str) -> str:
    """Stable key=value report document."""
    config = report.config
    lines = [
        f"status={status}",
        f"oracle={oracle_label}",
        f"band={config.band.f_min:.12g}:{config.band.f_max:.12g}",
        f"dense_points={config.dense_points}",
        f"n_parts={config.n_parts}",
        f"part_error_threshold={config.part_error_threshold:.12g}",
        f"initial_samples={config.initial_samples}",
        f"max_iterations={config.max_iterations}",
        f"converged={'true' if report.converged else 'false'}",
        f"saturated={'true' if report.saturated else 'false'}",
        f"solver_calls={report.solver_calls}",
        f"reduction_ratio={report.reduction_ratio:.12g}",
        f"iterations={report.iterations}",
        f"global_error={report.global_error:.12g}",
        f"edge_fallbacks={report.edge_fallbacks}"
    ]
    for k, (count, errors) in enumerate(zip(report.sample_counts, report.per_part_errors), start=1):
        lines.append(f"iteration_{k}_samples={count}")
        lines.append(f"iteration_{k}_part_errors=" + ",".join(f"{e:.12g}" for e in errors))
    return "\n".join(lines) + "\n"


def write_artifacts(report: SweepReport, manifest: RunManifest, out_dir: Path, status: str):
    """Write reconstruction.csv, samples.csv, report.txt and optionally plot_data.csv."""
    out_dir.mkdir(parents=True, exist_ok=True)
    if report.final_curve:
        write_csv_sweep(out_dir / "reconstruction.csv", report.frequencies, report.values)
    write_csv_sweep(
        out_dir / "samples.csv",
        [s.freq for s in report.samples],
        [s.value for s in report.samples]
    )
    with open(out_dir / "report.txt", "w", newline="") as f:
        f.write(format_report(report, manifest.oracle_label, status))

    if manifest.emit_plot_data and report.final_curve:
        sampled = {s.freq: s.value for s in report.samples}
        with open(out_dir / "plot_data.csv", "w", newline="") as f:
            f.write("frequency_hz,reconstructed,sampled\n")
            for freq, value in zip(report.frequencies, report.values):
                hit = sampled.get(float(freq))
                f.write(f"{freq:.17g},{value:.17g},{'' if hit is None else format(hit, '.17g')}\n")


def cmd_sweep(args: argparse.Namespace, settings: Settings) -> int:
    """Run an adaptive sweep and write its artifacts."""
    manifest = build_manifest(args)
    oracle, config = build_run(manifest, settings)
    threads = args.threads or settings.sweep_threads
    out_dir = Path(manifest.out or settings.output_dir)

    try:
        report = run_adaptive_sweep(oracle, config, threads=max(1, threads))
    except OracleError as e:
        logger.error(f"Oracle failure: {e}")
        if e.partial_report is not None:
            write_artifacts(e.partial_report, manifest, out_dir, "oracle_failure")
        return EXIT_ORACLE_FAILURE

    status = "converged" if report.converged else "not_converged"
    write_artifacts(report, manifest, out_dir, status)
    if manifest.ledger:
        run_id = RunLedger(settings.run_ledger_db).record_run(report, manifest.oracle_label, source="cli")
        logger.info(f"Recorded run {run_id}")
    print(f"{status}: {report.solver_calls}/{config.dense_points} solver calls, "
          f"global_error={report.global_error:.6g}, artifacts in {out_dir}")
    return EXIT_CONVERGED if report.converged else EXIT_NOT_CONVERGED


def cmd_bounds(args: argparse.Namespace, settings: Settings) -> int:
    """Print the truncation-error bounds for one parameter set."""
    params = BoundParams(n=args.n, h=args.h, f0=args.f0, B=args.B)
    for key, value in all_bounds(params).items():
        if isinstance(value, bool):
            print(f"{key}={'true' if value else 'false'}")
        else:
            print(f"{key}={value:.12g}")
    return 0


def _matching_grids(recon, truth) -> SampleGrid:
    a, b = recon.grid.as_array(), truth.grid.as_array()
    if a.size != b.size:
        raise InputError(f"grids differ in length: {a.size} vs {b.size} points")
    tol = truth.band.tolerance
    mismatch = np.flatnonzero(np.abs(a - b) > tol)
    if mismatch.size:
        k = int(mismatch[0])
        raise InputError(f"grids differ first at {a[k]:.12g} Hz vs {b[k]:.12g} Hz (row {k + 1})")
    return truth.grid


def cmd_compare(args: argparse.Namespace, settings: Settings) -> int:
    """Relative error of a reconstructed curve against a reference curve."""
    recon = load_csv_sweep(args.reconstructed)
    truth = load_csv_sweep(args.truth)
    grid = _matching_grids(recon, truth)
    print(f"global_error={relative_error(recon.values, truth.values):.12g}")
    partition = partition_band(grid.band, args.parts)
    errors = assess_parts(partition, recon.values, truth.values, grid)
    print("part_errors=" + ",".join(f"{e.error:.12g}" for e in errors))
    return 0


def cmd_study(args: argparse.Namespace, settings: Settings) -> int:
    """Solver calls against part count or threshold for one oracle."""
    manifest = build_manifest(args)
    oracle, config = build_run(manifest, settings)
    threads = max(1, args.threads or settings.sweep_threads)
    try:
        values = [float(v) for v in args.values.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"--values must be comma separated numbers, got '{args.values}'")
    truth = None
    if args.truth:
        truth = dense_reference(oracle, make_uniform_grid(config.band, config.dense_points), threads)

    if args.vary == "parts":
        rows = study_parts(oracle, config, [int(v) for v in values], truth, threads)
    else:
        rows = study_thresholds(oracle, config, values, truth, threads)

    print("value,solver_calls,reported_error,true_error,converged")
    for row in rows:
        true_error = "" if row.true_error is None else f"{row.true_error:.12g}"
        print(f"{row.value:.12g},{row.solver_calls},{row.reported_error:.12g},{true_error},"
              f"{'true' if row.converged else 'false'}")
    return 0


def cmd_models(args: argparse.Namespace, settings: Settings) -> int:
    """List the synthetic corpus."""
    for name, model in load_corpus(settings.corpus_file or None).items():
        band = f"{model.band.f_min:.12g}:{model.band.f_max:.12g}" if model.band else "-"
        print(f"{name}\t{band}\t{model.description}")
    return 0


def _add_sweep_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--oracle", default=None, help="Corpus model name, csv=<path> or ts=<path>:<ij>")
    parser.add_argument("--band", default=None, help="<f_min>:<f_max> in Hz")
    parser.add_argument("--dense", type=int, default=None, help="Dense grid points")
    parser.add_argument("--parts", type=int, default=None, help="Error-control parts")
    parser.add_argument("--threshold", type=float, default=None, help="Per-part relative error threshold")
    parser.add_argument("--seed-samples", type=int, default=None, help="Initial uniform samples")
    parser.add_argument("--max-iters", type=int, default=None, help="Iteration cap")
    parser.add_argument("--config", default=None, help="JSON run manifest; flags override its keys")
    parser.add_argument("--threads", type=int, default=None, help="Concurrent oracle calls (default SWEEP_THREADS)")
    parser.add_argument("--out", default=None, help="Output directory")
    parser.add_argument("--emit-plot-data", action="store_true", help="Also write plot_data.csv")
    parser.add_argument("--ledger", action="store_true", help="Record the run in the run ledger")


def build_parser() -> argparse.ArgumentParser:
    parser = SweepArgumentParser(prog="sweep", description="Adaptive Lagrange-interpolation frequency sweep")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=SweepArgumentParser)

    sweep = sub.add_parser("sweep", help="Run an adaptive sweep")
    _add_sweep_flags(sweep)

    bounds = sub.add_parser("bounds", help="Print truncation-error bounds")
    bounds.add_argument("--n", type=int, required=True, help="Polynomial degree")
    bounds.add_argument("--h", type=float, required=True, help="Sampling interval (Hz)")
    bounds.add_argument("--f0", type=float, required=True, help="Cut-off frequency (Hz)")
    bounds.add_argument("--B", type=float, required=True, help="Energy root of the response")

    compare = sub.add_parser("compare", help="Compare a reconstruction with a reference sweep")
    compare.add_argument("reconstructed", help="Reconstructed CSV")
    compare.add_argument("truth", help="Reference CSV on the same grid")
    compare.add_argument("--parts", type=int, default=1, help="Parts for the per-part errors")

    study = sub.add_parser("study", help="Solver calls versus part count or threshold")
    _add_sweep_flags(study)
    study.add_argument("--vary", choices=["parts", "threshold"], required=True)
    study.add_argument("--values", required=True, help="Comma separated part counts or thresholds")
    study.add_argument("--truth", action="store_true", help="Also compute the true error by brute force")

    sub.add_parser("models", help="List the synthetic oracle corpus")
    return parser


COMMANDS = {
    "sweep": cmd_sweep,
    "bounds": cmd_bounds,
    "compare": cmd_compare,
    "study": cmd_study,
    "models": cmd_models
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    settings = Settings()
    logging.basicConfig(
        level=getattr(logging, settings.log_level.upper(), logging.INFO),
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s"
    )
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args, settings)
    except OracleError as e:
        print(f"oracle failure: {e}", file=sys.stderr)
        return EXIT_ORACLE_FAILURE
    except KeyError as e:
        print(f"input error: {e.args[0] if e.args else e}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    except (InputError, InterpolationError, MetricError, ValidationError) as e:
        print(f"input error: {e}", file=sys.stderr)
        return EXIT_INPUT_ERROR


if __name__ == "__main__":
    sys.exit(main())
