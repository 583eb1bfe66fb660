"""GLK Kernel Module - Transformation kernel of the local potential
Solves the Volterra equation for K(r, x) on the triangle 0 <= x <= r <= R,
rebuilds phi(k, r) from it, forms the f-transform of a form factor and
checks the positivity requirements on f

Copyright (C) 2025 Embedded State Detector Contributors
This file is licensed under the GNU General Public License v3.0
See LICENSE or https://www.gnu.org/licenses/gpl-3.0.txt for details.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np
from scipy.integrate import cumulative_trapezoid, trapezoid

from .config import DEFAULT_NUMERICS, Numerics
from .errors import IterationDivergence, TailBoundTooLarge, ValidationError
from .grids_quadrature import (RadialGrid, SampledFunction, TailModel, integrate_interval,
                               integrate_semi_infinite, l1_flags, second_difference,
                               segment_integrals, shape_flags)
from .local_potential import LocalPotential, RegularSolution
from .logging_config import get_logger

logger = get_logger(__name__)


@dataclass(frozen=True, eq=False)
class KernelTable:
    """K on the triangle, stored as H[i, j] = K((i+j)h, (i-j)h)

    i indexes s = (r+x)/2 and j indexes u = (r-x)/2; the domain is
    j <= i and i + j <= N. levels holds the (table, step) solutions H was
    built from, finest last.
    """
    H: np.ndarray
    step: float
    N: int
    iterations: int
    residual: float
    regularization: float
    first_moment: float
    v_nodes: np.ndarray
    v_integral: np.ndarray
    v_beyond: float = 0.0
    levels: Tuple[Tuple[np.ndarray, float], ...] = ()
    extrapolated: bool = False

    @property
    def R(self) -> float:
        return self.step * self.N

    def domain(self) -> np.ndarray:
        i, j = np.indices(self.H.shape)
        return (j <= i) & (i + j <= self.N)

    def along_r(self, n: int) -> Tuple[np.ndarray, np.ndarray]:
        """x nodes and K(nh, x) at fixed r = nh, including x = 0"""
        j = np.arange(0, n // 2 + 1)
        i = n - j
        x = (i - j) * self.step
        k = self.H[i, j]
        if n % 2 == 1:
            x = np.append(x, 0.0)
            k = np.append(k, 0.0)
        return x[::-1], k[::-1]

    def along_x(self, m: int) -> Tuple[np.ndarray, np.ndarray]:
        """r nodes and K(r, mh) at fixed x = mh, r from x up to R"""
        j = np.arange(0, (self.N - m) // 2 + 1)
        i = m + j
        return (i + j) * self.step, self.H[i, j]

    def bound(self) -> np.ndarray:
        """Upper bound (1/2) exp(int uV) int_u^s V on the (s, u) grid"""
        vi = self.v_integral
        i, j = np.indices(self.H.shape)
        span = vi[np.minimum(i, self.N)] - vi[np.minimum(j, self.N)]
        return 0.5 * math.exp(self.first_moment) * span * self.domain()


@dataclass(frozen=True, eq=False)
class FProfile:
    profile: SampledFunction
    flags: Dict[str, bool] = field(default_factory=dict)
    tail_bound: float = 0.0


@dataclass(frozen=True)
class Verdict:
    passed: bool
    conditions: Dict[str, bool]
    details: Dict[str, str] = field(default_factory=dict)


def _origin_is_singular(V: LocalPotential) -> bool:
    with np.errstate(all="ignore"):
        return not bool(np.isfinite(V(np.array([0.0]))[0]))


def _regularized(V: LocalPotential, r_eps: float):
    if r_eps <= 0.0:
        return V
    frozen = float(V(np.array([r_eps]))[0])

    def fn(r):
        r = np.asarray(r, dtype=float)
        out = np.full_like(r, frozen)
        above = r > r_eps
        if np.any(above):
            out[above] = V(r[above])
        return out
    return fn


def _v_integral(v_reg, step: float, N: int, r_eps: float) -> np.ndarray:
    """int_0^{ih} V_reg for i = 0..N"""
    nodes = step * np.arange(N + 1)
    extra = [np.geomspace(r_eps, step, 24), [r_eps]] if r_eps > 0.0 else []
    fine = np.unique(np.concatenate([nodes, *extra]))
    parts = segment_integrals(v_reg, fine, 16)
    cumulative = np.concatenate([[0.0], np.cumsum(parts)])
    return cumulative[np.searchsorted(fine, nodes)]


def _romberg(columns):
    """Cancel the h^2, h^4, ... error terms of samples taken at h, h/2, h/4, ..."""
    table = list(columns)
    for order in range(1, len(table)):
        factor = 4.0 ** order
        table = [(factor * fine - coarse) / (factor - 1.0) for coarse, fine in zip(table[:-1], table[1:])]
    return table[0]


def _solve_level(v_reg, r_eps: float, h: float, N: int, numerics: Numerics):
    v_nodes = v_reg(h * np.arange(2 * N + 1))
    v_int = _v_integral(v_reg, h, N, r_eps)
    shape = (N + 1, N + 1)
    i, j = np.indices(shape)
    mask = (j <= i) & (i + j <= N)
    base = 0.5 * (v_int[i] - v_int[np.minimum(j, N)]) * mask
    vmat = v_nodes[i + j]
    H = np.zeros(shape)
    change = np.inf
    for iteration in range(1, numerics.kernel_max_iterations + 1):
        new = _apply(base, vmat, H, h, mask)
        change = float(np.max(np.abs(new - H)))
        H = new
        if change < numerics.kernel_tolerance:
            break
    else:
        raise IterationDivergence(f"kernel iteration did not settle at N={N}: last change {change:.2e}")
    residual = float(np.max(np.abs(_apply(base, vmat, H, h, mask) - H)))
    logger.debug("kernel level N=%d: %d iterations, residual %.2e", N, iteration, residual)
    return H, iteration, residual, v_nodes, v_int


def solve_kernel(V: LocalPotential, R: Optional[float] = None,
                 numerics: Numerics = DEFAULT_NUMERICS,
                 regularization: Optional[float] = None) -> KernelTable:
    """Fixed-point iteration of the Volterra equation in (s, u) coordinates

    The equation is solved with kernel_nodes * 2^l intervals for each
    l < kernel_levels. When V is finite at the origin the levels are
    combined by Romberg extrapolation onto the coarsest grid. A V singular
    at the origin is frozen below the regularization radius, and only the
    finest level is kept, sampled onto the coarse grid.
    """
    R = numerics.kernel_R if R is None else float(R)
    if R > V.grid.r_max * (1 + 1e-12):
        raise ValidationError(f"kernel range R={R:g} exceeds the potential grid r_max={V.grid.r_max:g}")
    N = int(numerics.kernel_nodes)
    h = R / N
    singular = _origin_is_singular(V)
    if regularization is None:
        r_eps = numerics.kernel_regularization if singular else 0.0
    else:
        r_eps = float(regularization)
    if singular and r_eps <= 0.0:
        raise ValidationError("V is singular at the origin; the kernel regularization must be positive")
    v_reg = _regularized(V, r_eps)
    if V.is_free:
        shape = (N + 1, N + 1)
        return KernelTable(np.zeros(shape), h, N, 0, 0.0, r_eps, 0.0,
                           np.zeros(2 * N + 1), np.zeros(N + 1))
    v_beyond = integrate_interval(V.profile, R, V.grid.r_max, V.grid.nodes) if R < V.grid.r_max else 0.0

    n_levels = int(numerics.kernel_levels)
    extrapolate = n_levels > 1 and not singular
    scales = [2 ** level for level in range(n_levels)] if extrapolate else [2 ** (n_levels - 1)]
    levels = []
    iterations = 0
    residual = 0.0
    for scale in scales:
        H_level, iterations, level_residual, v_fine, v_int_fine = _solve_level(
            v_reg, r_eps, h / scale, N * scale, numerics)
        residual = max(residual, level_residual)
        levels.append((H_level, h / scale))
    coarse = [H_level[::scale, ::scale] for (H_level, _), scale in zip(levels, scales)]
    H = _romberg(coarse) if extrapolate else coarse[0]
    v_nodes = v_fine[::scales[-1]]
    v_int = v_int_fine[::scales[-1]]
    logger.debug("kernel: %d level(s), extrapolated %s, residual %.2e", len(levels), extrapolate, residual)
    return KernelTable(H, h, N, iterations, residual, r_eps, V.rV_L1, v_nodes, v_int, v_beyond,
                       tuple(levels), extrapolate)


def _apply(base, vmat, H, h, mask):
    inner = cumulative_trapezoid(vmat * H, dx=h, axis=1, initial=0.0)
    outer = cumulative_trapezoid(inner, dx=h, axis=0, initial=0.0)
    return (base + outer - np.diag(outer)[None, :]) * mask


def _kernel_integral(H: np.ndarray, step: float, n: int, free) -> float:
    """int_0^{n step} K(n step, x) free(x) dx from one level table, n even"""
    j = np.arange(n // 2, -1, -1)
    x = (n - 2 * j) * step
    return float(trapezoid(H[n - j, j] * free(x), x))


def phi_via_kernel(K: KernelTable, k: float) -> RegularSolution:
    """phi(k, r) = sin(kr)/k + int_0^r K(r, x) sin(kx)/k dx at r = 2mh

    Even multiples of h put x = 0 on every level's quadrature nodes, so the
    levels extrapolate the same way the kernel does.
    """
    m_values = np.arange(1, K.N // 2 + 1)
    radii = 2 * m_values * K.step

    def free(x):
        return np.sin(k * x) / k if k > 0 else np.asarray(x, dtype=float)

    columns = []
    for H_level, step in (K.levels or ((K.H, K.step),)):
        scale = int(round(K.step / step))
        columns.append(np.array([_kernel_integral(H_level, step, 2 * m * scale, free) for m in m_values]))
    correction = _romberg(columns) if K.extrapolated else columns[-1]
    values = free(radii) + correction
    derivative = np.gradient(values, radii, edge_order=2)
    return RegularSolution(float(k), radii, values, derivative)


def _tail_abs_integral(U: SampledFunction, R: float) -> float:
    mag = SampledFunction(U.grid, np.abs(U.values), U.tail.with_amplitude(abs(U.tail.amplitude)),
                          None if U.fn is None else (lambda r: np.abs(U.fn(r))))
    body = integrate_interval(mag, R, U.grid.r_max, U.grid.nodes)
    beyond = integrate_semi_infinite(SampledFunction(U.grid, np.zeros_like(U.values), mag.tail))
    return body + beyond


def f_transform(K: KernelTable, U: SampledFunction, numerics: Numerics = DEFAULT_NUMERICS) -> FProfile:
    """f(x) = U(x) + int_x^R K(r, x) U(r) dr on x = mh, with the tail beyond R bounded"""
    if not l1_flags(U)["vanishing_at_infinity"]:
        raise ValidationError("f-transform needs U(r) -> 0 at infinity")
    m_values = np.arange(1, K.N + 1)
    x = m_values * K.step
    values = np.empty(x.size)
    for idx, m in enumerate(m_values):
        r, kern = K.along_x(m)
        correction = trapezoid(kern * U(r), r) if r.size > 1 else 0.0
        values[idx] = float(U(np.array([x[idx]]))[0]) + correction

    # K(r, x) <= (1/2) e^{int uV} int_{(r-x)/2}^inf V for r > R, worst at x = R
    tail_mass = _tail_abs_integral(U, K.R)
    v_total = K.v_integral[-1] + K.v_beyond
    bound = 0.5 * math.exp(K.first_moment) * v_total * tail_mass
    if bound > numerics.kernel_tail_tolerance:
        raise TailBoundTooLarge(f"kernel tail bound {bound:.2e} exceeds tolerance; increase R")

    grid = RadialGrid(x)
    shapes = shape_flags(x, values, numerics.kernel_flag_tolerance)
    u_flags = l1_flags(U)
    profile = SampledFunction(grid, values, TailModel())
    flags = {
        "positive": bool(np.all(values > 0.0)),
        "L1_near_0": u_flags["L1_near_0"],
        "decreasing": shapes.nonincreasing,
        "vanishing_at_infinity": bool(abs(values[-1]) <= 1e-3 * np.max(np.abs(values)))
        and u_flags["vanishing_at_infinity"],
        "convex": shapes.convex,
    }
    return FProfile(profile, flags, bound)


def check_requirements(f: FProfile) -> Verdict:
    """Positive, integrable near 0, steadily decreasing and vanishing at infinity"""
    names = ("positive", "L1_near_0", "decreasing", "vanishing_at_infinity")
    conditions = {name: bool(f.flags.get(name, False)) for name in names}
    details = {name: ("holds" if ok else "fails on the sampled profile") for name, ok in conditions.items()}
    return Verdict(all(conditions.values()), conditions, details)


def f_profile_from_values(x, values, tolerance: float = 1e-6) -> FProfile:
    """FProfile of an explicitly sampled f, for checking requirements directly"""
    x = np.asarray(x, dtype=float)
    values = np.asarray(values, dtype=float)
    shapes = shape_flags(x, values, tolerance)
    profile = SampledFunction(RadialGrid(x), values, TailModel())
    flags = l1_flags(profile)
    return FProfile(profile, {
        "positive": bool(np.all(values > 0.0)),
        "L1_near_0": flags["L1_near_0"],
        "decreasing": shapes.nonincreasing and bool(np.all(values > 0.0)),
        "vanishing_at_infinity": bool(abs(values[-1]) <= 1e-3 * np.max(np.abs(values))),
        "convex": shapes.convex,
    })


# ---------- Diagnostics ----------

def regularization_sensitivity(V: LocalPotential, R: Optional[float] = None,
                               numerics: Numerics = DEFAULT_NUMERICS) -> float:
    """max |K_eps - K_eps/2| for the origin freeze radius eps"""
    eps = numerics.kernel_regularization
    full = solve_kernel(V, R, numerics, regularization=eps)
    half = solve_kernel(V, R, numerics, regularization=0.5 * eps)
    return float(np.max(np.abs(full.H - half.H)))


def diagonal_identity_residual(K: KernelTable) -> float:
    """max |(d/dr + d/dx) K at x = r - V(r)/2| over the interior"""
    s = K.step * np.arange(K.N + 1)
    derivative = np.gradient(K.H[:, 0], s, edge_order=2)
    target = 0.5 * K.v_nodes[:K.N + 1]
    # the origin freeze makes the stencil meaningless below r = 1
    interior = (s >= 1.0) & (s <= K.R - 2 * K.step)
    return float(np.max(np.abs(derivative[interior] - target[interior])))


def convexity_identity_residual(K: KernelTable, f: FProfile, g: SampledFunction) -> float:
    """max |f'' - g - int_x^R K(r,x) g(r) dr| over interior nodes

    Relative to the largest value of the right-hand side.
    """
    x = f.profile.grid.nodes
    fpp = second_difference(x, f.profile.values)
    rhs = np.empty_like(x)
    for idx, m in enumerate(range(1, K.N + 1)):
        r, kern = K.along_x(m)
        rhs[idx] = float(g(np.array([x[idx]]))[0]) + (trapezoid(kern * g(r), r) if r.size > 1 else 0.0)
    interior = slice(4, int(0.8 * x.size))
    scale = float(np.max(np.abs(rhs[interior]))) or 1.0
    return float(np.max(np.abs(fpp[interior] - rhs[interior]))) / scale
