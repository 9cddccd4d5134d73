"""Ingestion of dense solver sweeps from CSV and Touchstone v1 text, and CSV output."""
import io
import logging
import math
from pathlib import Path
from typing import List, Sequence, TextIO, Tuple, Union

import numpy as np
from pydantic import ValidationError

from .domain import FrequencyBand, SampleGrid
from .errors import InputError
from .oracles import TabulatedSweep

logger = logging.getLogger(__name__)

UNIT_MULTIPLIERS = {"hz": 1.0, "khz": 1e3, "mhz": 1e6, "ghz": 1e9}
FORMATS = ("ma", "db", "ri")
PARAMETERS = ("s", "y", "z", "g", "h")
DEFAULT_OPTIONS = ["ghz", "s", "ma", "r", "50"]

# Column offset of each (i, j) pair in a two-port row: S11 S21 S12 S22
TWO_PORT_COLUMNS = {(1, 1): 1, (2, 1): 3, (1, 2): 5, (2, 2): 7}

Source = Union[bytes, str]


def _as_text(data: Source) -> str:
    if isinstance(data, bytes):
        try:
            return data.decode("utf-8-sig")
        except UnicodeDecodeError as e:
            raise InputError(f"sweep file is not UTF-8 text: {e}")
    return data


def _build_sweep(freqs: Sequence[float], values: Sequence[float], source: str) -> TabulatedSweep:
    if len(freqs) < 2:
        raise InputError(f"sweep {source or '(unnamed)'} needs at least 2 frequency points, got {len(freqs)}")
    try:
        band = FrequencyBand(f_min=float(freqs[0]), f_max=float(freqs[-1]))
        grid = SampleGrid(band=band, points=tuple(float(f) for f in freqs))
        return TabulatedSweep(grid=grid, values=tuple(float(v) for v in values), source=source)
    except ValidationError as e:
        raise InputError(f"invalid sweep {source}: {e}")


def _is_number(token: str) -> bool:
    try:
        float(token)
        return True
    except ValueError:
        return False


def parse_csv_sweep(data: Source, source: str = "") -> TabulatedSweep:
    """Parse two-column (frequency_hz, value) text into a tabulated sweep.

    Columns may be separated by a comma or whitespace. A single non-numeric
    header line before the first data row is skipped and '#' starts a comment.
    Rows are sorted by frequency.

    Args:
        data: File contents
        source: File identity recorded on the sweep

    Returns:
        Validated TabulatedSweep

    Raises:
        InputError: On a malformed row (with its line number) or duplicate frequencies
    """
    rows: List[Tuple[float, float]] = []
    header_allowed = True
    for lineno, raw in enumerate(_as_text(data).splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = [f.strip() for f in line.split(",")] if "," in line else line.split()
        try:
            if len(fields) != 2:
                raise ValueError(f"expected 2 columns, found {len(fields)}")
            freq, value = float(fields[0]), float(fields[1])
            if not (math.isfinite(freq) and math.isfinite(value)):
                raise ValueError("non-finite number")
        except ValueError as e:
            if header_allowed and len(fields) == 2 and not any(_is_number(f) for f in fields):
                header_allowed = False
                continue
            raise InputError(f"malformed row {raw.strip()!r}: {e}", line=lineno)
        header_allowed = False
        rows.append((freq, value))

    rows.sort(key=lambda r: r[0])
    freqs = [r[0] for r in rows]
    for a, b in zip(freqs, freqs[1:]):
        if b == a:
            raise InputError(f"duplicate frequency {a} in {source or 'CSV sweep'}")
    return _build_sweep(freqs, [r[1] for r in rows], source)


def _parse_options(line: str, lineno: int) -> Tuple[float, str]:
    # Tokens may come in any order or be left out; each is matched by its vocabulary
    unit, parameter, fmt = DEFAULT_OPTIONS[:3]
    toks = line.lower()[1:].split()
    i = 0
    while i < len(toks):
        tok = toks[i]
        if tok in UNIT_MULTIPLIERS:
            unit = tok
        elif tok in PARAMETERS:
            parameter = tok
        elif tok in FORMATS:
            fmt = tok
        elif tok == "r":
            if i + 1 >= len(toks) or not _is_number(toks[i + 1]):
                raise InputError("option 'R' needs a reference impedance", line=lineno)
            i += 1
        else:
            raise InputError(f"unrecognized option '{tok}'", line=lineno)
        i += 1
    if parameter != "s":
        raise InputError(f"only S-parameters are supported, found '{parameter.upper()}'", line=lineno)
    return UNIT_MULTIPLIERS[unit], fmt


def _magnitude(a: float, b: float, fmt: str) -> float:
    if fmt == "ma":
        return abs(a)
    if fmt == "db":
        return 10.0 ** (a / 20.0)
    return math.hypot(a, b)


def parse_touchstone(data: Source, port_pair: Tuple[int, int] = (1, 1), source: str = "") -> TabulatedSweep:
    """Extract |S_ij| in linear magnitude from a Touchstone v1 one- or two-port file.

    The option line defaults to "# GHz S MA R 50". Port count follows the
    column count of the data rows (3 for one port, 9 for two ports). A noise
    parameter section after two-port data is skipped with a warning.

    Args:
        data: File contents
        port_pair: (i, j) of the S-parameter to extract, 1-based
        source: File identity recorded on the sweep

    Returns:
        TabulatedSweep of |S_ij| on the file's frequency grid (Hz)

    Raises:
        InputError: Unsupported options, wrong column count, non-increasing frequencies
    """
    multiplier, fmt = UNIT_MULTIPLIERS["ghz"], "ma"
    options_seen = False
    n_columns = None
    freqs: List[float] = []
    values: List[float] = []

    for lineno, raw in enumerate(_as_text(data).splitlines(), start=1):
        line = raw.split("!", 1)[0].strip()
        if not line:
            continue
        if line.startswith("#"):
            if not options_seen:
                multiplier, fmt = _parse_options(line, lineno)
                options_seen = True
            continue
        try:
            numbers = [float(t) for t in line.split()]
        except ValueError:
            raise InputError(f"non-numeric data row {raw.strip()!r}", line=lineno)

        if n_columns is None:
            if len(numbers) not in (3, 9):
                raise InputError(f"expected 3 (one-port) or 9 (two-port) columns, found {len(numbers)}", line=lineno)
            n_columns = len(numbers)
            if n_columns == 3 and tuple(port_pair) != (1, 1):
                raise InputError(f"one-port file has no S{port_pair[0]}{port_pair[1]}")
            if n_columns == 9 and tuple(port_pair) not in TWO_PORT_COLUMNS:
                raise InputError(f"two-port file has no S{port_pair[0]}{port_pair[1]}")
        if len(numbers) != n_columns:
            if n_columns == 9 and len(numbers) == 5:
                logger.warning(f"Skipping noise parameter section of {source or 'touchstone data'} from line {lineno}")
                break
            raise InputError(f"expected {n_columns} columns, found {len(numbers)}", line=lineno)

        freq = numbers[0] * multiplier
        if freqs and freq <= freqs[-1]:
            raise InputError(f"frequencies must be strictly increasing, {freq} Hz follows {freqs[-1]} Hz", line=lineno)
        col = 1 if n_columns == 3 else TWO_PORT_COLUMNS[tuple(port_pair)]
        freqs.append(freq)
        values.append(_magnitude(numbers[col], numbers[col + 1], fmt))

    return _build_sweep(freqs, values, source)


def load_csv_sweep(path: Union[str, Path]) -> TabulatedSweep:
    """Read and parse a CSV sweep file."""
    path = Path(path)
    if not path.exists():
        raise InputError(f"sweep file not found: {path}")
    return parse_csv_sweep(path.read_bytes(), source=str(path))


def load_touchstone(path: Union[str, Path], port_pair: Tuple[int, int] = (1, 1)) -> TabulatedSweep:
    """Read and parse a Touchstone file."""
    path = Path(path)
    if not path.exists():
        raise InputError(f"touchstone file not found: {path}")
    return parse_touchstone(path.read_bytes(), port_pair=port_pair, source=str(path))


def write_csv_sweep(
    target: Union[str, Path, TextIO],
    freqs: Sequence[float],
    values: Sequence[float],
    header: str = "frequency_hz,value"
):
    """Write (frequency, value) rows with 17 significant digits so they re-parse exactly.

    Args:
        target: Output path or open text stream
        freqs: Frequencies in Hz
        values: One response per frequency
        header: Header line, or empty for none
    """
    if len(freqs) != len(values):
        raise InputError(f"{len(freqs)} frequencies but {len(values)} values")
    buffer = io.StringIO()
    if header:
        buffer.write(header + "\n")
    for f, v in zip(np.asarray(freqs, dtype=float), np.asarray(values, dtype=float)):
        buffer.write(f"{f:.17g},{v:.17g}\n")
    if isinstance(target, (str, Path)):
        with open(target, "w", newline="") as fh:
            fh.write(buffer.getvalue())
    else:
        target.write(buffer.getvalue())
