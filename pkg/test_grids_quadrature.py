"""Tests for grids, quadrature, principal values and divided differences"""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from modules.errors import DomainError, PoleAtEndpoint
from modules.grids_quadrature import (RadialGrid, SampledFunction, TailModel, insert_nodes, l1_flags,
                                      make_radial_grid, principal_value, principal_value_oscillatory,
                                      second_difference, shape_flags, uniform_run_mask, wynn_epsilon,
                                      integrate_semi_infinite, integrate_oscillatory_batch)

QUAD_RTOL = 1e-9
PV_RTOL = 1e-6


def exp_profile(grid, rate=1.0):
    return SampledFunction.from_callable(lambda r: np.exp(-rate * r), grid, TailModel.exponential(rate))


def test_hybrid_grid_puts_a_fifth_of_the_nodes_below_the_knee():
    grid = make_radial_grid(40.0, 2000)
    assert len(grid) == 2000
    assert np.sum(grid.nodes < 0.5) == 400
    assert grid.r_max == pytest.approx(40.0)
    assert uniform_run_mask(grid.nodes)[1000]


def test_breakpoints_become_nodes():
    grid = make_radial_grid(breakpoints=[1.2345, 3.0])
    assert np.any(grid.nodes == 1.2345)
    assert np.any(grid.nodes == 3.0)
    assert np.all(np.diff(grid.nodes) > 0)


def test_insert_nodes_snaps_to_close_nodes():
    nodes = np.array([1.0, 2.0, 3.0])
    assert_allclose(insert_nodes(nodes, [2.0 + 1e-12]), [1.0, 2.0 + 1e-12, 3.0])
    assert insert_nodes(nodes, [2.5]).size == 4


def test_jitter_is_reproducible_with_a_seed():
    a = make_radial_grid(jitter=0.5, seed=7)
    b = make_radial_grid(jitter=0.5, seed=7)
    c = make_radial_grid(jitter=0.5, seed=8)
    assert np.array_equal(a.nodes, b.nodes)
    assert not np.array_equal(a.nodes, c.nodes)


@pytest.mark.parametrize("nodes", [[0.0, 1.0], [1.0, 1.0, 2.0], [1.0]])
def test_invalid_grids_are_rejected(nodes):
    with pytest.raises(DomainError):
        RadialGrid(np.array(nodes))


@pytest.mark.parametrize("rate", [0.5, 1.0, 2.0])
def test_semi_infinite_moments_of_exponentials(grid, rate):
    f = exp_profile(grid, rate)
    assert_allclose(integrate_semi_infinite(f), 1.0 / rate, rtol=QUAD_RTOL)
    assert_allclose(integrate_semi_infinite(f, power=1), 1.0 / rate ** 2, rtol=QUAD_RTOL)


def test_oscillatory_batch_matches_closed_forms(grid):
    f = exp_profile(grid)
    p = np.array([0.5, 1.0, 3.0, 10.0])
    assert_allclose(integrate_oscillatory_batch(f, p, "sin"), p / (1 + p ** 2), rtol=1e-8)
    assert_allclose(integrate_oscillatory_batch(f, p, "cos"), 1 / (1 + p ** 2), rtol=1e-8)


def test_algebraic_tail_is_integrated_beyond_the_grid(grid):
    f = SampledFunction.from_callable(lambda r: (1.0 + r) ** -3, grid, TailModel.algebraic(3.0))
    assert_allclose(integrate_semi_infinite(f), 0.5, rtol=1e-6)


@pytest.mark.parametrize("k", [0.5, 1.0, 3.0])
def test_principal_value_of_a_lorentzian(k):
    momenta = RadialGrid(np.linspace(0.005, 60.0, 6000))
    h = SampledFunction.from_callable(lambda p: 1.0 / (1.0 + p * p), momenta, TailModel.algebraic(2.0))
    # P int_0^inf dp / ((p^2 - k^2)(1 + p^2)) = -pi / (2 (1 + k^2))
    assert_allclose(principal_value(h, k), -math.pi / (2 * (1 + k * k)), rtol=PV_RTOL)


def test_pole_next_to_the_origin_is_refused():
    momenta = RadialGrid(np.linspace(0.005, 20.0, 400))
    h = SampledFunction.from_callable(lambda p: 1.0 / (1.0 + p * p), momenta)
    with pytest.raises(PoleAtEndpoint):
        principal_value(h, 0.02, delta=0.05)


def _pv_profile(fn):
    momenta = RadialGrid(np.linspace(0.005, 60.0, 6000))
    return SampledFunction.from_callable(fn, momenta, TailModel.algebraic(2.0))


@pytest.mark.parametrize("k", [0.5, 1.0, 3.0])
def test_principal_value_does_not_depend_on_the_window(k):
    h = _pv_profile(lambda p: 1.0 / (1.0 + p * p))
    assert principal_value(h, k, delta=0.025) == pytest.approx(principal_value(h, k, delta=0.05), abs=1e-9)


def test_principal_value_is_linear():
    first = _pv_profile(lambda p: 1.0 / (1.0 + p * p))
    second = _pv_profile(lambda p: p * np.exp(-p))
    both = _pv_profile(lambda p: 2.0 / (1.0 + p * p) - 3.0 * p * np.exp(-p))
    for k in (0.5, 1.0, 3.0):
        expected = 2.0 * principal_value(first, k) - 3.0 * principal_value(second, k)
        assert principal_value(both, k) == pytest.approx(expected, abs=1e-8)


@pytest.mark.parametrize("frequency,pole", [(1.0, 0.3), (2.5, 1.0), (0.7, -2.0)])
def test_oscillatory_principal_value_identity(frequency, pole):
    value = principal_value_oscillatory(lambda y: np.ones_like(y), pole, frequency)
    assert_allclose(value, math.pi * math.cos(frequency * pole), atol=1e-6)


def test_wynn_epsilon_accelerates_an_alternating_series():
    terms = [(-1) ** (n + 1) / n for n in range(1, 14)]
    sums = np.cumsum(terms)
    assert abs(wynn_epsilon(sums) - math.log(2.0)) < 1e-8


def test_second_difference_on_a_uniform_run():
    x = np.linspace(0.1, 5.0, 500)
    d2 = second_difference(x, np.sin(x))
    assert_allclose(d2[5:-5], -np.sin(x[5:-5]), atol=1e-8)


def test_shape_and_integrability_flags(grid):
    r = grid.nodes
    decaying = shape_flags(r, np.exp(-r))
    assert decaying.positive and decaying.strictly_decreasing and decaying.convex
    signed = shape_flags(r, np.exp(-r) * (1 - 2 * r))
    assert not signed.positive and not signed.nonincreasing

    mild = SampledFunction.from_callable(lambda x: x ** -0.5 * np.exp(-x), grid, TailModel.exponential(1.0))
    harsh = SampledFunction.from_callable(lambda x: x ** -1.5 * np.exp(-x), grid, TailModel.exponential(1.0))
    assert l1_flags(mild)["L1_near_0"]
    assert not l1_flags(harsh)["L1_near_0"]

    slow = SampledFunction(grid, (1 + r) ** -1.5)
    flags = l1_flags(slow)
    assert flags["L1_at_inf"] and not flags["rU_L1_at_inf"]
