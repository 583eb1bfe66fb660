"""Tests for the box discretization and the spectral oracle"""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import linalg

from modules.detector import scale_formfactor
from modules.errors import ResolutionTooLow, TailNotDecaying, ValidationError
from modules.formfactor_builder import exponential_formfactor
from modules.oracle import assemble, candidate_wavefunction, effective_support, embedded_scan


def test_empty_box_reproduces_the_particle_in_a_box(grid):
    U = exponential_formfactor(0.0, 1.0, grid)
    L = 10.0
    box = assemble(None, U, 1.0, L, 249)
    values = linalg.eigh(box.matrix, eigvals_only=True, subset_by_index=(0, 3))
    assert_allclose(values, (np.arange(1, 5) * math.pi / L) ** 2, rtol=1e-6)


def test_rank_one_term_is_symmetric(grid):
    U = exponential_formfactor(1.0, 1.0, grid)
    box = assemble(None, U, -1.0, 40.0, 999)
    assert_allclose(box.matrix, box.matrix.T)
    assert box.step == pytest.approx(0.04)


def test_effective_support_of_an_exponential(grid):
    support = effective_support(exponential_formfactor(1.0, 1.0, grid).profile)
    assert support == pytest.approx(math.log(1e4), abs=0.05)


def test_coarse_boxes_are_refused(grid):
    U = exponential_formfactor(1.0, 1.0, grid)
    with pytest.raises(ResolutionTooLow):
        assemble(None, U, 1.0, 40.0, 100, k_target=1.0)
    with pytest.raises(ValidationError):
        assemble(None, U, 1.0, 10.0, 400)


@pytest.mark.slow
def test_oracle_confirms_the_engineered_state(engineered, numerics):
    U, _ = engineered
    scan = embedded_scan(None, U, -1.0, 1.0, numerics)
    assert scan.confirmed
    assert len(scan.levels) == len(numerics.box_ladder)
    assert all(level.tail_mass < numerics.oracle_tail_mass for level in scan.levels)
    assert scan.drift < 0.2 * scan.continuum_shift
    assert all(level.eigenvalue == pytest.approx(1.0, abs=scan.window) for level in scan.levels)


@pytest.mark.slow
def test_oracle_refutes_the_halved_amplitude(engineered, numerics):
    U, _ = engineered
    scan = embedded_scan(None, scale_formfactor(U, 0.5), -1.0, 1.0, numerics)
    assert scan.verdict == "refuted"


def test_candidate_wavefunction_of_the_engineered_state(engineered, numerics):
    U, _ = engineered
    candidate = candidate_wavefunction(U, -1.0, 1.0, numerics)
    assert candidate.tail_mass < numerics.wavefunction_tail_mass
    assert candidate.residual < numerics.wavefunction_residual
    assert candidate.self_consistency < numerics.self_consistency_tolerance
    assert candidate.consistent


def test_candidate_of_a_rescaled_form_factor_is_flagged(engineered, numerics):
    U, _ = engineered
    candidate = candidate_wavefunction(scale_formfactor(U, 1.01), -1.0, 1.0, numerics)
    # U~(k0) still vanishes, but eps <U, phi> picks up the factor 1.01^2
    assert candidate.self_consistency == pytest.approx(1.01 ** 2 - 1.0, rel=1e-2)
    assert not candidate.consistent


def test_candidate_needs_the_transform_to_vanish_at_k0(grid, numerics):
    with pytest.raises(TailNotDecaying):
        candidate_wavefunction(exponential_formfactor(1.0, 1.0, grid), -1.0, 1.0, numerics)


@pytest.mark.slow
def test_oracle_refutes_a_repulsive_coupling(engineered, numerics):
    U, _ = engineered
    scan = embedded_scan(None, U, 1.0, 1.0, numerics)
    assert scan.verdict == "refuted"
    assert not scan.confirmed
