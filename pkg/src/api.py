"""FastAPI endpoints for the adaptive frequency sweep."""
import logging
import math
from datetime import datetime
from typing import Dict, List, Optional

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel, ValidationError

from .bounds import BoundParams, all_bounds
from .domain import FrequencyBand, SampleGrid, partition_band
from .errors import InputError, InterpolationError, MetricError, OracleError
from .oracles import RationalOracle, TabulatedOracle, get_model, load_corpus
from .parsers import parse_csv_sweep
from .refinement import SweepConfig, SweepReport, assess_parts, relative_error, run_adaptive_sweep
from .run_ledger import RunLedger
from config import settings

# Configure logging
logging.basicConfig(level=getattr(logging, settings.log_level.upper(), logging.INFO))
logger = logging.getLogger(__name__)


# Initialize FastAPI app
app = FastAPI(
    title="Adaptive Frequency Sweep",
    description="Wideband response reconstruction from adaptively chosen solver evaluations",
    version="1.0.0"
)

# CORS middleware
app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

# Initialize components
run_ledger = RunLedger(settings.run_ledger_db)


# Request/Response models
class SweepRequest(BaseModel):
    model: Optional[str] = None
    csv_data: Optional[str] = None
    band: Optional[List[float]] = None
    dense_points: Optional[int] = None
    n_parts: Optional[int] = None
    threshold: Optional[float] = None
    seed_samples: Optional[int] = None
    max_iterations: Optional[int] = None
    threads: Optional[int] = None
    include_curve: bool = False


class SweepResponse(BaseModel):
    run_id: str
    oracle: str
    converged: bool
    saturated: bool
    solver_calls: int
    dense_points: int
    reduction_ratio: float
    iterations: int
    global_error: Optional[float]
    edge_fallbacks: int
    final_part_errors: List[Optional[float]]
    samples: List[List[float]]
    curve: Optional[List[List[float]]] = None


class BoundsRequest(BaseModel):
    n: int
    h: float
    f0: float
    B: float


class CompareRequest(BaseModel):
    reconstructed: List[float]
    truth: List[float]
    frequencies: Optional[List[float]] = None
    n_parts: int = 1


def _finite_or_none(value: float) -> Optional[float]:
    return value if math.isfinite(value) else None


def _build_sweep(request: SweepRequest):
    if bool(request.model) == bool(request.csv_data):
        raise InputError("exactly one of model or csv_data is required")
    if request.model:
        model = get_model(request.model, settings.corpus_file or None)
        oracle, label, default_band, default_dense = RationalOracle(model), request.model, model.band, None
    else:
        sweep = parse_csv_sweep(request.csv_data, source="upload")
        oracle, label, default_band, default_dense = None, "csv=upload", sweep.band, len(sweep.grid)

    if request.band:
        if len(request.band) != 2:
            raise InputError("band must be [f_min, f_max]")
        band = FrequencyBand(f_min=request.band[0], f_max=request.band[1])
    elif default_band is not None:
        band = default_band
    else:
        raise InputError(f"model '{request.model}' has no default band")

    config = SweepConfig(
        band=band,
        dense_points=request.dense_points or default_dense or settings.dense_points,
        n_parts=request.n_parts or settings.n_parts,
        part_error_threshold=request.threshold or settings.part_error_threshold,
        initial_samples=request.seed_samples,
        max_iterations=request.max_iterations or settings.max_iterations
    )
    if oracle is None:
        oracle = TabulatedOracle(sweep, tolerance=band.width / (config.dense_points - 1) / 2.0)
    return oracle, label, config


def _sweep_response(report: SweepReport, run_id: str, label: str, include_curve: bool) -> SweepResponse:
    return SweepResponse(
        run_id=run_id,
        oracle=label,
        converged=report.converged,
        saturated=report.saturated,
        solver_calls=report.solver_calls,
        dense_points=report.config.dense_points,
        reduction_ratio=report.reduction_ratio,
        iterations=report.iterations,
        global_error=_finite_or_none(report.global_error),
        edge_fallbacks=report.edge_fallbacks,
        final_part_errors=[_finite_or_none(e) for e in report.final_part_errors],
        samples=[[s.freq, s.value] for s in report.samples],
        curve=[[s.freq, s.value] for s in report.final_curve] if include_curve else None
    )


@app.get("/")
async def root():
    """Root endpoint."""
    return {
        "message": "Adaptive Frequency Sweep API",
        "version": "1.0.0",
        "status": "operational"
    }


@app.get("/health")
async def health_check():
    """Health check endpoint."""
    return {"status": "healthy", "timestamp": datetime.utcnow().isoformat()}


@app.get("/models")
async def list_models():
    """List the synthetic oracle corpus."""
    try:
        models = load_corpus(settings.corpus_file or None)
        return [
            {
                "name": name,
                "description": model.description,
                "band": [model.band.f_min, model.band.f_max] if model.band else None,
                "poles": len(model.poles)
            }
            for name, model in models.items()
        ]
    except InputError as e:
        raise HTTPException(status_code=500, detail=f"Corpus unavailable: {str(e)}")


@app.post("/sweep", response_model=SweepResponse)
def sweep(request: SweepRequest):
    """Run an adaptive sweep against a corpus model or an uploaded CSV sweep.

    Returns:
        Sweep summary, sampled points and optionally the dense curve
    """
    try:
        oracle, label, config = _build_sweep(request)
        threads = max(1, request.threads or settings.sweep_threads)
        report = run_adaptive_sweep(oracle, config, threads=threads)
        run_id = run_ledger.record_run(report, label, source="api")
        logger.info(f"Sweep {run_id} on {label}: {report.solver_calls} solver calls, converged={report.converged}")
        return _sweep_response(report, run_id, label, request.include_curve)
    except HTTPException:
        raise
    except KeyError as e:
        raise HTTPException(status_code=404, detail=str(e.args[0] if e.args else e))
    except OracleError as e:
        raise HTTPException(status_code=502, detail=f"Oracle failure: {str(e)}")
    except (InputError, InterpolationError, MetricError, ValidationError) as e:
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        logger.error(f"Sweep failed: {e}")
        raise HTTPException(status_code=500, detail=f"Server error: {str(e)}")


@app.post("/bounds")
async def bounds(request: BoundsRequest):
    """Truncation-error bounds for degree n, interval h, cut-off f0 and energy root B."""
    try:
        params = BoundParams(n=request.n, h=request.h, f0=request.f0, B=request.B)
        return all_bounds(params)
    except ValidationError as e:
        raise HTTPException(status_code=400, detail=str(e))


@app.post("/compare")
async def compare(request: CompareRequest):
    """Relative error of a reconstructed curve against a reference curve."""
    try:
        n = len(request.truth)
        if len(request.reconstructed) != n:
            raise InputError(f"curves differ in length: {len(request.reconstructed)} vs {n}")
        if n < 2:
            raise InputError("comparison needs at least 2 points")
        points = request.frequencies if request.frequencies is not None else [float(k) for k in range(n)]
        if len(points) != n:
            raise InputError(f"{len(points)} frequencies for {n} values")
        grid = SampleGrid(band=FrequencyBand(f_min=points[0], f_max=points[-1]), points=tuple(points))
        errors = assess_parts(partition_band(grid.band, request.n_parts), request.reconstructed, request.truth, grid)
        return {
            "global_error": relative_error(request.reconstructed, request.truth),
            "part_errors": [_finite_or_none(e.error) for e in errors]
        }
    except (InputError, MetricError, ValidationError) as e:
        raise HTTPException(status_code=400, detail=str(e))


@app.get("/runs")
async def get_runs(
    oracle: Optional[str] = None,
    converged: Optional[bool] = None,
    limit: int = 100,
    offset: int = 0
):
    """Get recorded sweep runs, newest first."""
    try:
        return run_ledger.get_runs(oracle=oracle, converged=converged, limit=limit, offset=offset)
    except Exception as e:
        raise HTTPException(status_code=500, detail=f"Failed to get runs: {str(e)}")


@app.get("/runs/stats")
async def get_run_stats() -> Dict:
    """Get run ledger statistics."""
    try:
        return run_ledger.get_stats()
    except Exception as e:
        raise HTTPException(status_code=500, detail=f"Failed to get run stats: {str(e)}")


@app.get("/runs/{run_id}")
async def get_run(run_id: str):
    """Get one recorded sweep run."""
    run = run_ledger.get_run(run_id)
    if run is None:
        raise HTTPException(status_code=404, detail="Run not found")
    return run
