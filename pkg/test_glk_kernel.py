"""Tests for the transformation kernel, the kernel route to phi and the f-profile"""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from modules.formfactor_builder import SourceFunction, build_from_source, exponential_source
from modules.glk_kernel import (check_requirements, convexity_identity_residual, diagonal_identity_residual,
                                f_profile_from_values, f_transform, phi_via_kernel, regularization_sensitivity,
                                solve_kernel)
from modules.grids_quadrature import SampledFunction, TailModel
from modules.local_potential import solve_regular_batch, zero_energy_pair

SMOOTH_RTOL = 1e-6
# K(r, x) ~ -log(r - x)/2 for V ~ 1/r, so the uniform triangle converges like h log h
MANUFACTURED_RTOL = 2e-2
MOMENTA = [0.0, 0.5, 1.0, 2.0, 5.0]


@pytest.fixture(scope="module")
def smooth_kernel(smooth_V, numerics):
    return solve_kernel(smooth_V, numerics=numerics)


@pytest.fixture(scope="module")
def manufactured_kernel(manufactured_V, numerics):
    return solve_kernel(manufactured_V, numerics=numerics)


def _route_gap(V, K, k, numerics):
    via_kernel = phi_via_kernel(K, k)
    direct = solve_regular_batch(V, [k], via_kernel.radii, numerics=numerics).phi[0]
    return np.max(np.abs(via_kernel.values - direct)) / np.max(np.abs(direct))


@pytest.mark.slow
@pytest.mark.parametrize("k", MOMENTA)
def test_kernel_route_matches_the_ode_for_a_smooth_potential(smooth_V, smooth_kernel, numerics, k):
    assert _route_gap(smooth_V, smooth_kernel, k, numerics) < SMOOTH_RTOL


@pytest.mark.slow
@pytest.mark.parametrize("k", MOMENTA)
def test_kernel_route_matches_the_ode_for_the_manufactured_potential(manufactured_V, manufactured_kernel,
                                                                     numerics, k):
    assert _route_gap(manufactured_V, manufactured_kernel, k, numerics) < MANUFACTURED_RTOL


def test_kernel_respects_its_bound(smooth_kernel, manufactured_kernel):
    for K in (smooth_kernel, manufactured_kernel):
        domain = K.domain()
        assert np.all(np.abs(K.H[domain]) <= K.bound()[domain] + 1e-12)
        assert K.residual < 1e-8


def test_kernel_vanishes_at_x_zero(smooth_kernel):
    half = smooth_kernel.N // 2
    assert np.all(np.diag(smooth_kernel.H)[:half + 1] == 0.0)
    x, values = smooth_kernel.along_r(2 * (half // 2) + 1)
    assert x[0] == 0.0 and values[0] == 0.0


def test_diagonal_identity(smooth_kernel):
    assert diagonal_identity_residual(smooth_kernel) < 1e-3


def test_origin_regularization_barely_moves_a_smooth_kernel(smooth_V, numerics):
    assert regularization_sensitivity(smooth_V, numerics=numerics) < 1e-6


def test_free_kernel_leaves_the_form_factor_unchanged(free_V, grid, numerics):
    K = solve_kernel(free_V, numerics=numerics)
    U = SampledFunction.from_callable(lambda r: np.exp(-r), grid, TailModel.exponential(1.0))
    f = f_transform(K, U, numerics)
    assert_allclose(f.profile.values, np.exp(-f.profile.grid.nodes), rtol=1e-12)
    assert f.tail_bound == 0.0
    assert check_requirements(f).passed


def test_f_transform_of_a_decreasing_form_factor_passes(smooth_kernel, grid, numerics):
    U = SampledFunction.from_callable(lambda r: np.exp(-r), grid, TailModel.exponential(1.0))
    f = f_transform(smooth_kernel, U, numerics)
    assert np.all(f.profile.values > 0)
    assert f.tail_bound < numerics.kernel_tail_tolerance


def test_requirements_on_explicit_profiles():
    x = np.linspace(0.05, 20.0, 400)
    verdict = check_requirements(f_profile_from_values(x, np.exp(-x)))
    assert verdict.passed
    assert all(verdict.conditions.values())

    rising = check_requirements(f_profile_from_values(x, x * np.exp(-x)))
    assert not rising.passed
    assert not rising.conditions["decreasing"]
    assert rising.conditions["positive"]


def test_levels_are_extrapolated_only_for_a_potential_finite_at_the_origin(smooth_kernel, manufactured_kernel,
                                                                           numerics):
    assert smooth_kernel.extrapolated
    assert len(smooth_kernel.levels) == numerics.kernel_levels
    assert smooth_kernel.regularization == 0.0
    assert not manufactured_kernel.extrapolated
    assert len(manufactured_kernel.levels) == 1
    assert manufactured_kernel.regularization == numerics.kernel_regularization


def test_extrapolation_improves_on_a_single_level(smooth_V, smooth_kernel, numerics):
    single = solve_kernel(smooth_V, numerics=numerics.with_overrides(kernel_levels=1))
    assert not single.extrapolated
    assert _route_gap(smooth_V, smooth_kernel, 1.0, numerics) < 0.01 * _route_gap(smooth_V, single, 1.0, numerics)


def test_convexity_identity_for_a_built_form_factor(smooth_V, smooth_kernel, numerics):
    src = SourceFunction(exponential_source(grid=smooth_V.grid))
    U = build_from_source(zero_energy_pair(smooth_V, numerics), src, numerics)
    f = f_transform(smooth_kernel, U.profile, numerics)
    assert convexity_identity_residual(smooth_kernel, f, src.smooth) < 1e-2

    wrong = SampledFunction.from_callable(lambda t: 2.0 * np.exp(-t), smooth_V.grid, TailModel.exponential(1.0))
    assert convexity_identity_residual(smooth_kernel, f, wrong) > 0.1
