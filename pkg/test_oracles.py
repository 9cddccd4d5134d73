"""Tests for the synthetic and tabulated oracles."""
import json
import math
import sys
from pathlib import Path

import numpy as np
import pytest
from pydantic import ValidationError

# Add src to path
sys.path.insert(0, str(Path(__file__).parent))

from src.domain import FrequencyBand, SampleGrid
from src.errors import InputError, OracleError
from src.oracles import (
    PoleResidueModel, RationalOracle, TabulatedOracle, TabulatedSweep, energy_root, get_model,
    load_corpus, rational_eval, rational_sweep, tabulated_eval
)


def resonance_pair(f_center, half_width, residue):
    sigma = 2 * math.pi * half_width
    omega = 2 * math.pi * f_center
    return [complex(-sigma, omega), complex(-sigma, -omega)], [complex(residue), complex(residue)]


def maxima_and_minima(values):
    d = np.sign(np.diff(values))
    turns = d[1:] - d[:-1]
    return int(np.sum(turns < 0)), int(np.sum(turns > 0))


def test_constant_model():
    model = PoleResidueModel(direct_term=0.5)
    assert rational_eval(model, 1e9) == 0.5
    assert rational_eval(model, 37.0) == 0.5


def test_single_resonance_peaks_at_its_frequency():
    poles, residues = resonance_pair(1.8e9, 0.05e9, 2 * math.pi * 0.05e9)
    model = PoleResidueModel(poles=tuple(poles), residues=tuple(residues))
    freqs = np.linspace(1.5e9, 2.1e9, 2001)
    values = rational_sweep(model, freqs)
    assert abs(freqs[int(np.argmax(values))] - 1.8e9) < 10e6


def test_two_resonances_give_two_maxima_and_one_minimum():
    p1, r1 = resonance_pair(1.0e9, 0.05e9, 2 * math.pi * 0.05e9)
    p2, r2 = resonance_pair(2.0e9, 0.05e9, 2 * math.pi * 0.05e9)
    model = PoleResidueModel(poles=tuple(p1 + p2), residues=tuple(r1 + r2))
    values = rational_sweep(model, np.linspace(0.6e9, 2.4e9, 4001))
    assert maxima_and_minima(values) == (2, 1)


def test_scalar_and_vector_evaluation_agree():
    model = get_model("horn-like")
    freqs = np.linspace(27e9, 33e9, 7)
    np.testing.assert_allclose(rational_sweep(model, freqs), [rational_eval(model, f) for f in freqs], rtol=1e-14)


def test_model_validation():
    with pytest.raises(ValidationError):
        PoleResidueModel(poles=(complex(1.0, 5.0), complex(1.0, -5.0)), residues=(1j, -1j))
    with pytest.raises(ValidationError):
        PoleResidueModel(poles=(complex(-1.0, 5.0),), residues=(1j,))
    with pytest.raises(ValidationError):
        PoleResidueModel(poles=(complex(-1.0, 0.0),), residues=())
    with pytest.raises(InputError):
        rational_eval(PoleResidueModel(direct_term=1.0), 0.0)


def test_corpus_models():
    models = load_corpus()
    assert {"horn-like", "filter-like", "constant"} <= set(models)
    horn = models["horn-like"]
    assert horn.band.f_min == 27e9 and horn.band.f_max == 33e9

    flt = models["filter-like"]
    values = rational_sweep(flt, np.linspace(flt.band.f_min, flt.band.f_max, 4001))
    maxima, minima = maxima_and_minima(values)
    assert maxima >= 3 and minima >= 2


def test_unknown_model():
    with pytest.raises(KeyError):
        get_model("no-such-model")


def test_corpus_errors(tmp_path):
    with pytest.raises(InputError):
        load_corpus(str(tmp_path / "missing.json"))
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"models": [{"name": "x", "poles": [{"re": 1.0, "im": 0.0}],
                                           "residues": [{"re": 1.0}]}]}))
    with pytest.raises(InputError):
        load_corpus(str(bad))


def test_energy_root_is_finite():
    model = get_model("filter-like")
    freqs = np.linspace(model.band.f_min, model.band.f_max, 10_000)
    B = energy_root(rational_sweep(model, freqs), freqs[1] - freqs[0])
    assert math.isfinite(B) and B > 0


def table():
    band = FrequencyBand(f_min=1.0, f_max=3.0)
    grid = SampleGrid(band=band, points=(1.0, 2.0, 3.0))
    return TabulatedSweep(grid=grid, values=(0.1, 0.2, 0.3), source="table")


def test_tabulated_lookup():
    sweep = table()
    assert tabulated_eval(sweep, 2.0) == 0.2
    assert tabulated_eval(sweep, 3.0) == 0.3


def test_tabulated_rejects_off_grid():
    sweep = table()
    with pytest.raises(OracleError):
        tabulated_eval(sweep, 2.4)
    with pytest.raises(OracleError):
        tabulated_eval(sweep, 3.5)


def test_tabulated_tolerance_half_spacing():
    oracle = TabulatedOracle(table(), tolerance=0.5)
    assert oracle(2.4) == 0.2
    assert oracle(1.49) == 0.1
    with pytest.raises(OracleError):
        oracle(3.6)


def test_tabulated_sweep_validation():
    grid = SampleGrid(band=FrequencyBand(f_min=1.0, f_max=2.0), points=(1.0, 2.0))
    with pytest.raises(ValidationError):
        TabulatedSweep(grid=grid, values=(1.0,))


def test_oracles_are_pure():
    oracle = RationalOracle(get_model("filter-like"))
    assert oracle(1.5e9) == oracle(1.5e9)
    assert oracle.band.f_min == 0.6e9
