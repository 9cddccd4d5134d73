"""Response oracles standing in for an expensive full-wave solver.

Two families are provided: synthetic pole-residue models, defined in the
JSON corpus under config/, and tabulated sweeps ingested from CSV or
Touchstone files. Oracles are immutable and safe for concurrent evaluation.
"""
import json
import logging
from pathlib import Path
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, ValidationError, model_validator

from .domain import FrequencyBand, SampleGrid
from .errors import InputError, OracleError

logger = logging.getLogger(__name__)

DEFAULT_CORPUS = Path(__file__).parent.parent / "config" / "oracle_corpus.json"

# Relative tolerance when matching a pole with its conjugate
CONJUGATE_RTOL = 1e-9


class PoleResidueModel(BaseModel):
    """Rational transfer function H(s) = d + sum r_k / (s - p_k), poles in rad/s."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    name: str = ""
    description: str = ""
    band: Optional[FrequencyBand] = None
    poles: Tuple[complex, ...] = ()
    residues: Tuple[complex, ...] = ()
    direct_term: float = 0.0

    @model_validator(mode="after")
    def _check_model(self) -> "PoleResidueModel":
        if len(self.poles) != len(self.residues):
            raise ValueError(f"{len(self.poles)} poles but {len(self.residues)} residues")
        for p in self.poles:
            if not p.real < 0:
                raise ValueError(f"pole {p} is not stable (real part must be negative)")
        unmatched = [p for p in self.poles if p.imag != 0]
        while unmatched:
            p = unmatched.pop()
            partner = next(
                (k for k, q in enumerate(unmatched) if abs(q - p.conjugate()) <= CONJUGATE_RTOL * abs(p)),
                None
            )
            if partner is None:
                raise ValueError(f"complex pole {p} has no conjugate partner")
            unmatched.pop(partner)
        return self


class TabulatedSweep(BaseModel):
    """Responses recorded by a solver run at fixed discrete frequencies."""

    model_config = ConfigDict(frozen=True)

    grid: SampleGrid
    values: Tuple[float, ...]
    source: str = ""

    @model_validator(mode="after")
    def _check_values(self) -> "TabulatedSweep":
        if len(self.values) != len(self.grid):
            raise ValueError(f"{len(self.values)} values for {len(self.grid)} grid points")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("tabulated values must be finite")
        return self

    @property
    def band(self) -> FrequencyBand:
        return self.grid.band


def rational_eval(model: PoleResidueModel, f: float) -> float:
    """Linear magnitude |H(j 2 pi f)| of a pole-residue model.

    Args:
        model: Stable pole-residue model
        f: Frequency in Hz (> 0)

    Returns:
        Real, non-negative response
    """
    if not f > 0:
        raise InputError(f"rational models are evaluated at positive frequencies, got {f}")
    s = 2j * np.pi * f
    h = complex(model.direct_term)
    for p, r in zip(model.poles, model.residues):
        h += r / (s - p)
    return float(abs(h))


def rational_sweep(model: PoleResidueModel, freqs: Sequence[float]) -> np.ndarray:
    """Vectorised rational_eval over many frequencies."""
    f = np.asarray(freqs, dtype=float)
    if np.any(f <= 0):
        raise InputError("rational models are evaluated at positive frequencies")
    s = 2j * np.pi * f
    h = np.full(f.shape, complex(model.direct_term))
    for p, r in zip(model.poles, model.residues):
        h = h + r / (s - p)
    return np.abs(h)


def tabulated_eval(sweep: TabulatedSweep, f: float, tolerance: Optional[float] = None) -> float:
    """Look up the tabulated response at a grid frequency.

    Args:
        sweep: Tabulated sweep
        f: Frequency in Hz
        tolerance: Absolute matching tolerance (defaults to the band tolerance)

    Returns:
        Stored response of the matching grid point

    Raises:
        OracleError: If f is outside the table span or not within tolerance of a grid point
    """
    tol = sweep.band.tolerance if tolerance is None else tolerance
    if f < sweep.band.f_min - tol or f > sweep.band.f_max + tol:
        raise OracleError(f"{f} Hz is outside the tabulated span of {sweep.source or 'sweep'}", frequency=f)
    idx = sweep.grid.index_of(f, tol)
    if idx is None:
        raise OracleError(f"{f} Hz is not tabulated in {sweep.source or 'sweep'}", frequency=f)
    return sweep.values[idx]


def energy_root(values: Sequence[float], spacing: float) -> float:
    """Discrete estimate of B = sqrt(sum |f|^2 * df) for a sampled response."""
    arr = np.asarray(values, dtype=float)
    return float(np.sqrt(np.sum(arr * arr) * spacing))


class RationalOracle:
    """Callable oracle over a synthetic pole-residue model."""

    def __init__(self, model: PoleResidueModel):
        self.model = model
        self.name = model.name or "rational"
        self.band = model.band

    def __call__(self, f: float) -> float:
        return rational_eval(self.model, f)


class TabulatedOracle:
    """Callable oracle answering only at its own grid frequencies."""

    def __init__(self, sweep: TabulatedSweep, tolerance: Optional[float] = None):
        self.sweep = sweep
        self.tolerance = tolerance
        self.name = sweep.source or "tabulated"
        self.band = sweep.band

    def __call__(self, f: float) -> float:
        return tabulated_eval(self.sweep, f, self.tolerance)


def _parse_complex(entry, field: str, name: str) -> complex:
    try:
        return complex(float(entry["re"]), float(entry.get("im", 0.0)))
    except (KeyError, TypeError, ValueError) as e:
        raise InputError(f"model '{name}': malformed {field} entry {entry!r}: {e}")


def load_corpus(path: Optional[str] = None) -> Dict[str, PoleResidueModel]:
    """Load the named pole-residue models of a corpus file.

    Args:
        path: Corpus JSON file (defaults to config/oracle_corpus.json)

    Returns:
        Dictionary mapping model name to model, in file order

    Raises:
        InputError: If the file is missing or a record is malformed
    """
    corpus_path = Path(path) if path else DEFAULT_CORPUS
    if not corpus_path.exists():
        raise InputError(f"corpus file not found: {corpus_path}")
    try:
        with open(corpus_path, 'r') as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise InputError(f"corpus file {corpus_path} is not valid JSON: {e}")

    models: Dict[str, PoleResidueModel] = {}
    for record in data.get("models", []):
        name = record.get("name")
        if not name:
            raise InputError(f"corpus record without a name in {corpus_path}")
        try:
            band = record.get("band")
            models[name] = PoleResidueModel(
                name=name,
                description=record.get("description", ""),
                band=FrequencyBand(**band) if band else None,
                poles=tuple(_parse_complex(p, "pole", name) for p in record.get("poles", [])),
                residues=tuple(_parse_complex(r, "residue", name) for r in record.get("residues", [])),
                direct_term=float(record.get("direct_term", 0.0))
            )
        except ValidationError as e:
            raise InputError(f"model '{name}' in {corpus_path} is invalid: {e}")
    logger.debug(f"Loaded {len(models)} oracle models from {corpus_path}")
    return models


def get_model(name: str, path: Optional[str] = None) -> PoleResidueModel:
    """Fetch one corpus model by name.

    Raises:
        KeyError: If the corpus holds no model of that name
    """
    models = load_corpus(path)
    if name not in models:
        raise KeyError(f"unknown oracle model '{name}' (available: {', '.join(models)})")
    return models[name]
