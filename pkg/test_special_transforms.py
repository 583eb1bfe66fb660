"""Tests for sine, cosine and Hankel transforms and the tail function"""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from modules.errors import IntegrabilityViolation, UnsupportedOrder
from modules.grids_quadrature import SampledFunction, TailModel, make_radial_grid
from modules.special_transforms import (bessel_suite, cosine_transform, hankel_profile, hankel_reference,
                                        hankel_transform, parseval_check, riemann_lebesgue_residual,
                                        omega_convolution, signed_split, sine_transform, tail_function)

SINE_RTOL = 1e-7
HANKEL_RTOL = 1e-5


def exp_profile(grid, rate=1.0, amplitude=1.0):
    return SampledFunction.from_callable(lambda r: amplitude * np.exp(-rate * r), grid,
                                         TailModel.exponential(rate))


@pytest.mark.parametrize("rate", [0.5, 1.0, 2.0])
def test_sine_transform_of_exponentials(grid, rate):
    p = np.linspace(0.0, 20.0, 41)
    table = sine_transform(exp_profile(grid, rate), p)
    assert table.kind == "sine"
    assert_allclose(table.values, 1.0 / (rate ** 2 + p ** 2), rtol=SINE_RTOL)


def test_sine_transform_needs_a_first_moment(grid):
    slow = SampledFunction(grid, (1 + grid.nodes) ** -1.5)
    with pytest.raises(IntegrabilityViolation):
        sine_transform(slow, [1.0])


def test_cosine_transform_of_an_exponential(grid):
    k = np.array([0.0, 0.5, 1.0, 4.0])
    table = cosine_transform(exp_profile(grid), k)
    assert_allclose(table.values, 1.0 / (1.0 + k ** 2), rtol=SINE_RTOL)
    assert table.flags["convex_route"]


@pytest.mark.parametrize("pair,a", [("exponential", 1.0), ("lorentzian", 1.0), ("gaussian", 0.5)])
@pytest.mark.parametrize("nu", [0.5, 1.5])
def test_decaying_hankel_pairs(pair, a, nu):
    grid = make_radial_grid()
    k = np.linspace(0.1, 10.0, 12)
    table = hankel_transform(hankel_profile(pair, a, grid), nu, k)
    assert_allclose(table.values, hankel_reference(pair, a, nu, k), rtol=HANKEL_RTOL)


def test_hankel_order_below_one_half_is_unsupported(grid):
    with pytest.raises(UnsupportedOrder):
        hankel_transform(exp_profile(grid), 0.0, [1.0])


def test_half_integer_bessel_closed_form():
    x = np.linspace(0.1, 30.0, 50)
    assert_allclose(bessel_suite("J", 0.5, x), np.sqrt(2 / (np.pi * x)) * np.sin(x), rtol=1e-12)


def test_tail_function_of_an_exponential(grid):
    W = tail_function(exp_profile(grid, 2.0))
    assert_allclose(W.values, 0.5 * np.exp(-2.0 * grid.nodes), rtol=1e-8, atol=1e-14)


def test_tail_function_requires_r_W_to_vanish_at_the_origin(grid):
    # W ~ 1/r near 0
    U = SampledFunction.from_callable(lambda r: np.exp(-r) / r ** 2, grid, TailModel.exponential(1.0))
    with pytest.raises(IntegrabilityViolation, match="origin"):
        tail_function(U)


def test_omega_must_decay_on_the_grid_without_a_tail_model(grid):
    # W passes, but omega ~ r^-1.3 has not decayed by r_max
    U = SampledFunction.from_callable(lambda r: (1.0 + r) ** -2.3, grid)
    tail_function(U)
    with pytest.raises(IntegrabilityViolation, match="omega"):
        omega_convolution(signed_split(U))


def test_signed_split_inserts_the_sign_change(grid):
    U = SampledFunction.from_callable(lambda r: np.exp(-r) * (1 - 2 * r), grid, TailModel.exponential(1.0))
    split = signed_split(U)
    assert split.roots == pytest.approx((0.5,))
    r = split.plus.grid.nodes
    assert_allclose(split.plus.values - split.minus.values, np.exp(-r) * (1 - 2 * r), atol=1e-12)
    assert np.all(split.plus.values >= 0) and np.all(split.minus.values >= 0)


def test_parseval_and_riemann_lebesgue(grid):
    U = exp_profile(grid)
    p = np.linspace(0.0, 200.0, 2001)
    table = sine_transform(U, p)
    lhs, rhs = parseval_check(U, table)
    assert_allclose(lhs, 0.5, rtol=1e-9)
    assert_allclose(rhs, lhs, rtol=1e-3)
    assert riemann_lebesgue_residual(table) < 1e-2


def test_sine_transform_is_positive_for_decreasing_profiles(rng):
    """Random mixtures of exponentials and tents"""
    k = np.linspace(0.5, 20.0, 20)
    for _ in range(50):
        rates = rng.uniform(0.5, 3.0, size=rng.integers(1, 4))
        weights = rng.uniform(0.1, 2.0, size=rates.size)
        cutoffs = rng.uniform(0.5, 5.0, size=rng.integers(0, 3))
        heights = rng.uniform(0.1, 2.0, size=cutoffs.size)
        grid = make_radial_grid(breakpoints=list(cutoffs))

        def fn(r, rates=rates, weights=weights, cutoffs=cutoffs, heights=heights):
            r = np.asarray(r, dtype=float)
            out = sum(w * np.exp(-a * r) for w, a in zip(weights, rates))
            return out + sum(h * np.maximum(c - r, 0.0) for h, c in zip(heights, cutoffs))

        U = SampledFunction.from_callable(fn, grid, TailModel.exponential(float(rates.min())))
        assert np.all(sine_transform(U, k).values > 0)


def test_cosine_transform_is_positive_and_integrable_for_convex_profiles(rng):
    k = np.linspace(0.25, 20.0, 20)
    for _ in range(50):
        rates = rng.uniform(0.5, 3.0, size=rng.integers(1, 4))
        weights = rng.uniform(0.1, 2.0, size=rates.size)
        grid = make_radial_grid()

        def fn(r, rates=rates, weights=weights):
            return sum(w * np.exp(-a * np.asarray(r, dtype=float)) for w, a in zip(weights, rates))

        f = SampledFunction.from_callable(fn, grid, TailModel.exponential(float(rates.min())))
        values = cosine_transform(f, k).values
        assert np.all(values > 0)
        exact = sum(w * a / (a * a + k * k) for w, a in zip(weights, rates))
        assert_allclose(values, exact, rtol=1e-7)
