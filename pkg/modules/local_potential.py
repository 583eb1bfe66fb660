"""Local Potential Module - Regular and zero-energy solutions
Integrates phi'' + k^2 phi = V phi from the origin, extracts the Jost
modulus, the zero-energy pair (phi0, chi0) with its asymptotic constants,
and the phi-weighted transform of a form factor

Copyright (C) 2025 Embedded State Detector Contributors
This file is licensed under the GNU General Public License v3.0
See LICENSE or https://www.gnu.org/licenses/gpl-3.0.txt for details.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import integrate
from scipy.interpolate import CubicSpline

from .config import DEFAULT_NUMERICS, Numerics
from .errors import (AsymptoticFitFailure, MatchingRadiusDisagreement, StiffnessFailure,
                     ValidationError)
from .grids_quadrature import (RadialGrid, SampledFunction, TailModel, cumulative_from_infinity,
                               integrate_semi_infinite, make_radial_grid, trig_tail_integrals)
from .logging_config import get_logger
from .special_transforms import TransformTable, sine_transform

logger = get_logger(__name__)

MATCHING_FRACTIONS = (0.8, 0.9, 1.0)
FIT_WINDOW = 0.75
BATCH_CHUNK = 48


@dataclass(frozen=True, eq=False)
class LocalPotential:
    """V(r) >= 0 with its first moment"""
    profile: SampledFunction
    rV_L1: float
    name: str = "tabulated"

    @property
    def grid(self) -> RadialGrid:
        return self.profile.grid

    @property
    def is_free(self) -> bool:
        return not np.any(self.profile.values)

    def __call__(self, r):
        return self.profile(r)


@dataclass(frozen=True, eq=False)
class RegularSolution:
    k: float
    radii: np.ndarray
    values: np.ndarray
    derivative: np.ndarray

    def energy_invariant(self) -> np.ndarray:
        """k^2 phi^2 + phi'^2, constant where V vanishes"""
        return self.k ** 2 * self.values ** 2 + self.derivative ** 2


@dataclass(frozen=True, eq=False)
class RegularBatch:
    """phi, phi' and the running integral of U phi for many momenta at shared radii"""
    momenta: np.ndarray
    radii: np.ndarray
    phi: np.ndarray
    dphi: np.ndarray
    accumulated: Optional[np.ndarray] = None


@dataclass(frozen=True, eq=False)
class ZeroEnergyPair:
    phi0: SampledFunction
    chi0: SampledFunction
    dphi0: np.ndarray
    dchi0: np.ndarray
    A: float
    B: float

    def wronskian(self) -> np.ndarray:
        return self.dphi0 * self.chi0.values - self.phi0.values * self.dchi0


@dataclass(frozen=True, eq=False)
class JostModulus:
    momenta: np.ndarray
    values: np.ndarray

    def as_function(self) -> SampledFunction:
        keep = self.momenta > 0
        return SampledFunction(RadialGrid(self.momenta[keep]), self.values[keep])


# ---------- Potential families ----------

def make_local_potential(profile: SampledFunction, name: str = "tabulated") -> LocalPotential:
    """Validates V >= 0 and r V integrable"""
    if np.any(profile.values < 0.0):
        worst = float(np.min(profile.values))
        raise ValidationError(f"local potential must be non-negative (minimum sample {worst:.3e})")
    rv = integrate_semi_infinite(profile, power=1)
    if not np.isfinite(rv):
        raise ValidationError("integral of r V(r) is not finite")
    logger.debug("local potential %s: integral of r V = %.6e", name, rv)
    return LocalPotential(profile, float(rv), name)


def free_potential(grid: Optional[RadialGrid] = None) -> LocalPotential:
    grid = grid or make_radial_grid()
    zero = SampledFunction.from_callable(np.zeros_like, grid, TailModel.compact(grid.r_max))
    return LocalPotential(zero, 0.0, "free")


def exponential_potential(strength: float = 1.0, rate: float = 1.0,
                          grid: Optional[RadialGrid] = None) -> LocalPotential:
    grid = grid or make_radial_grid()
    fn = lambda r: strength * np.exp(-rate * r)
    return make_local_potential(SampledFunction.from_callable(fn, grid, TailModel.exponential(rate)),
                                "exponential")


def gaussian_potential(strength: float = 1.0, width: float = 1.0,
                       grid: Optional[RadialGrid] = None) -> LocalPotential:
    grid = grid or make_radial_grid()
    fn = lambda r: strength * np.exp(-(r / width) ** 2)
    return make_local_potential(SampledFunction.from_callable(fn, grid, TailModel.compact(grid.r_max)),
                                "gaussian")


def manufactured_phi0(r):
    """2r - 1 + e^{-r}, the exact zero-energy solution for manufactured_potential"""
    r = np.asarray(r, dtype=float)
    return 2.0 * r + np.expm1(-r)


def manufactured_potential(grid: Optional[RadialGrid] = None) -> LocalPotential:
    """V = e^{-r}/(2r - 1 + e^{-r}), behaving like 1/r at the origin"""
    grid = grid or make_radial_grid()
    fn = lambda r: np.exp(-r) / manufactured_phi0(r)
    return make_local_potential(SampledFunction.from_callable(fn, grid, TailModel.exponential(1.0)),
                                "manufactured")


def tabulated_potential(radii: Sequence[float], values: Sequence[float],
                        grid: Optional[RadialGrid] = None) -> LocalPotential:
    """Monotone-preserving interpolation of samples; zero beyond the last sample"""
    radii = np.asarray(radii, dtype=float)
    values = np.asarray(values, dtype=float)
    if radii.shape != values.shape or radii.size < 4:
        raise ValidationError("tabulated potential needs at least 4 aligned (r, V) samples")
    if np.any(values < 0.0):
        raise ValidationError("local potential must be non-negative")
    source = SampledFunction(RadialGrid(radii), values, TailModel(), monotone=True)
    grid = grid or make_radial_grid()
    last = radii[-1]
    fn = lambda r: np.where(r <= last, np.maximum(source(np.minimum(r, last)), 0.0), 0.0)
    return make_local_potential(SampledFunction.from_callable(fn, grid), "tabulated")


# ---------- ODE integration ----------

def _scalar(f, t: float) -> float:
    return float(f(np.array([t]))[0])


def _born_start(V: LocalPotential, r1: float, k: np.ndarray):
    """phi(r1), phi'(r1) from the first Born term of the Volterra equation"""
    sin_term = np.where(k > 0, np.sin(k * r1) / np.where(k > 0, k, 1.0), r1)
    cos_term = np.cos(k * r1)
    if V.is_free:
        return sin_term, cos_term
    second, _ = integrate.quad(lambda t: (r1 - t) * t * _scalar(V, t), 0.0, r1)
    first, _ = integrate.quad(lambda t: t * _scalar(V, t), 0.0, r1)
    return sin_term + second, cos_term + first


def _solve_chunk(V: LocalPotential, k: np.ndarray, radii: np.ndarray, weight: Optional[SampledFunction],
                 numerics: Numerics):
    m = k.size
    r1 = V.grid.r_min
    phi1, dphi1 = _born_start(V, r1, k)
    k2 = k * k
    y0 = [phi1, dphi1]
    if weight is not None:
        head, _ = integrate.quad(lambda t: t * _scalar(weight, t), 0.0, r1)
        y0.append(np.full(m, head))
    y0 = np.concatenate(y0)

    def rhs(r, y):
        phi = y[:m]
        out = [y[m:2 * m], (_scalar(V, r) - k2) * phi]
        if weight is not None:
            out.append(_scalar(weight, r) * phi)
        return np.concatenate(out)

    stop = float(radii[-1])
    sol = integrate.solve_ivp(rhs, (r1, stop), y0, method=numerics.ode_method, t_eval=radii,
                              rtol=numerics.ode_rtol, atol=numerics.ode_atol)
    if not sol.success:
        raise StiffnessFailure(f"radial integration failed for k in [{k.min():g}, {k.max():g}]: {sol.message}")
    logger.debug("radial ODE: %d momenta, %d RHS evaluations", m, sol.nfev)
    y = sol.y
    acc = y[2 * m:] if weight is not None else None
    return y[:m], y[m:2 * m], acc


def solve_regular_batch(V: LocalPotential, momenta: Sequence[float], radii: Optional[Sequence[float]] = None,
                        weight: Optional[SampledFunction] = None,
                        numerics: Numerics = DEFAULT_NUMERICS) -> RegularBatch:
    """Regular solutions for many momenta, sampled at the given radii

    With a weight U the running integral of U phi from 0 to each radius is
    carried as an extra ODE component.
    """
    momenta = np.asarray(momenta, dtype=float)
    if np.any(momenta < 0):
        raise ValidationError("momenta must be non-negative")
    radii = V.grid.nodes if radii is None else np.asarray(radii, dtype=float)
    if V.is_free and weight is None:
        kk = momenta[:, None]
        rr = radii[None, :]
        safe = np.where(kk > 0, kk, 1.0)
        phi = np.where(kk > 0, np.sin(kk * rr) / safe, rr)
        dphi = np.cos(kk * rr) * np.ones_like(rr)
        return RegularBatch(momenta, radii, phi, dphi)
    order = np.argsort(momenta)
    phi = np.empty((momenta.size, radii.size))
    dphi = np.empty_like(phi)
    acc = np.empty_like(phi) if weight is not None else None
    for start in range(0, momenta.size, BATCH_CHUNK):
        idx = order[start:start + BATCH_CHUNK]
        p, dp, a = _solve_chunk(V, momenta[idx], radii, weight, numerics)
        phi[idx], dphi[idx] = p, dp
        if acc is not None:
            acc[idx] = a
    return RegularBatch(momenta, radii, phi, dphi, acc)


def solve_regular(V: LocalPotential, k: float, numerics: Numerics = DEFAULT_NUMERICS) -> RegularSolution:
    """phi(k, r) on the potential's grid, phi(k,0) = 0, phi'(k,0) = 1"""
    if k < 0:
        raise ValidationError("momentum must be non-negative")
    batch = solve_regular_batch(V, [k], numerics=numerics)
    return RegularSolution(float(k), batch.radii, batch.phi[0], batch.dphi[0])


# ---------- Derived quantities ----------

def zero_energy_pair(V: LocalPotential, numerics: Numerics = DEFAULT_NUMERICS) -> ZeroEnergyPair:
    """phi0, the decreasing second solution chi0 with unit Wronskian, and phi0 ~ A r + B"""
    grid = V.grid
    r = grid.nodes
    R = grid.r_max
    if V.is_free:
        phi0 = SampledFunction.from_callable(lambda x: np.asarray(x, dtype=float) * 1.0, grid)
        chi0 = SampledFunction.from_callable(np.ones_like, grid)
        return ZeroEnergyPair(phi0, chi0, np.ones_like(r), np.zeros_like(r), 1.0, 0.0)

    solution = solve_regular(V, 0.0, numerics)
    values, deriv = solution.values, solution.derivative
    window = r >= FIT_WINDOW * R
    design = np.vstack([r[window], np.ones(window.sum())]).T
    (A, B), *_ = np.linalg.lstsq(design, values[window], rcond=None)
    misfit = float(np.max(np.abs(design @ np.array([A, B]) - values[window])))
    if misfit > 1e3 * numerics.matching_tolerance * max(1.0, abs(A) * R):
        raise AsymptoticFitFailure(f"phi0 is not affine on the last quarter of the grid (misfit {misfit:.2e})")
    logger.debug("zero-energy fit: A=%.10f B=%.10f misfit=%.2e", A, B, misfit)

    spline = CubicSpline(r, values)

    def phi0_fn(x):
        x = np.asarray(x, dtype=float)
        return np.where(x <= R, spline(np.minimum(x, R)), A * x + B)

    inverse_square = lambda x: 1.0 / phi0_fn(x) ** 2
    J = cumulative_from_infinity(inverse_square, grid, 1.0 / (A * (A * R + B)))
    chi_values = values * J
    chi_deriv = deriv * J - 1.0 / values
    chi_spline = CubicSpline(r, chi_values)

    def chi0_fn(x):
        x = np.asarray(x, dtype=float)
        return np.where(x <= R, chi_spline(np.minimum(x, R)), 1.0 / A)

    phi0 = SampledFunction(grid, values, TailModel(), phi0_fn)
    chi0 = SampledFunction(grid, chi_values, TailModel(), chi0_fn)
    return ZeroEnergyPair(phi0, chi0, deriv, chi_deriv, float(A), float(B))


def jost_modulus(V: LocalPotential, momenta: Sequence[float],
                 numerics: Numerics = DEFAULT_NUMERICS) -> JostModulus:
    """|F(k)|^2 = k^2 phi^2 + phi'^2 beyond the support of V, checked at three radii"""
    momenta = np.asarray(momenta, dtype=float)
    if np.any(momenta <= 0):
        raise ValidationError("Jost modulus needs positive momenta")
    if V.is_free:
        return JostModulus(momenta, np.ones_like(momenta))
    radii = np.array([f * V.grid.r_max for f in MATCHING_FRACTIONS])
    batch = solve_regular_batch(V, momenta, radii, numerics=numerics)
    modulus = (momenta[:, None] ** 2) * batch.phi ** 2 + batch.dphi ** 2
    spread = np.max(modulus, axis=1) - np.min(modulus, axis=1)
    worst = float(np.max(spread / modulus[:, -1]))
    if worst > numerics.matching_tolerance:
        raise MatchingRadiusDisagreement(f"Jost modulus differs by {worst:.2e} between matching radii")
    return JostModulus(momenta, modulus[:, -1])


def weighted_transform(U: SampledFunction, V: LocalPotential, momenta: Sequence[float],
                       numerics: Numerics = DEFAULT_NUMERICS) -> TransformTable:
    """U~(k) = integral of U(r) phi(k, r) dr; the sine transform when V vanishes"""
    momenta = np.asarray(momenta, dtype=float)
    if V.is_free:
        table = sine_transform(U, momenta, numerics.quad_tolerance)
        return TransformTable(table.momenta, table.values, "weighted")
    R = V.grid.r_max
    if abs(U.grid.r_max - R) > 1e-9 * R:
        raise ValidationError("form factor and potential must share r_max")
    batch = solve_regular_batch(V, momenta, [R], weight=U, numerics=numerics)
    values = batch.accumulated[:, -1].copy()
    for i, k in enumerate(momenta):
        phi_R, dphi_R = batch.phi[i, -1], batch.dphi[i, -1]
        if k > 0:
            # free continuation phi = alpha cos(kr) + beta sin(kr) beyond R
            alpha = phi_R * np.cos(k * R) - dphi_R / k * np.sin(k * R)
            beta = phi_R * np.sin(k * R) + dphi_R / k * np.cos(k * R)
            c, s = trig_tail_integrals(U, k)
            values[i] += alpha * c + beta * s
        else:
            values[i] += phi_R * integrate_semi_infinite(_tail_only(U)) \
                + dphi_R * (integrate_semi_infinite(_tail_only(U), power=1)
                            - R * integrate_semi_infinite(_tail_only(U)))
    return TransformTable(momenta, values, "weighted")


def _tail_only(U: SampledFunction) -> SampledFunction:
    """U restricted to r > r_max: zero on the grid, the tail model beyond"""
    return SampledFunction(U.grid, np.zeros_like(U.values), U.tail)


def phase_envelope(solution: RegularSolution, start_fraction: float = 0.8):
    """Amplitude and phase of phi ~ amp sin(kr + delta) on the outer window"""
    r = solution.radii
    window = r >= start_fraction * r[-1]
    k = solution.k
    design = np.vstack([np.sin(k * r[window]), np.cos(k * r[window])]).T
    (a, b), *_ = np.linalg.lstsq(design, solution.values[window], rcond=None)
    residual = float(np.max(np.abs(design @ np.array([a, b]) - solution.values[window])))
    return float(np.hypot(a, b)), float(np.arctan2(b, a)), residual
