"""Special Transforms Module - Fourier, Hankel and convolution transforms
Sine/cosine transforms, the tail function W, the signed split of a form
factor, the omega convolution and Hankel transforms with Bessel kernels

Copyright (C) 2025 Embedded State Detector Contributors
This file is licensed under the GNU General Public License v3.0
See LICENSE or https://www.gnu.org/licenses/gpl-3.0.txt for details.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from scipy import special
from scipy.optimize import brentq

from .errors import DomainError, IntegrabilityViolation, PositivityViolation, UnsupportedOrder
from .grids_quadrature import (DECAY_MARGIN, QUAD_TOLERANCE, RadialGrid, SampledFunction, TailModel,
                               adaptive_segments, cumulative_from_infinity, decay_exponents,
                               insert_nodes, integrate_oscillatory_batch, integrate_semi_infinite,
                               l1_flags, make_radial_grid, oscillatory_tail, segment_points,
                               shape_flags, origin_piece)
from .logging_config import get_logger

logger = get_logger(__name__)

TRANSFORM_KINDS = ("sine", "cosine", "weighted", "hankel")
OMEGA_NODES = 1000
EDGE_FRACTION = 1e-3


@dataclass(frozen=True, eq=False)
class TransformTable:
    momenta: np.ndarray
    values: np.ndarray
    kind: str
    flags: Dict[str, bool] = field(default_factory=dict)

    def __post_init__(self):
        momenta = np.asarray(self.momenta, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if self.kind not in TRANSFORM_KINDS:
            raise DomainError(f"unknown transform kind {self.kind!r}")
        if momenta.shape != values.shape:
            raise DomainError("momenta and values must align")
        if not np.all(np.isfinite(values)):
            raise IntegrabilityViolation(f"{self.kind} transform produced non-finite values")
        object.__setattr__(self, "momenta", momenta)
        object.__setattr__(self, "values", values)

    def as_function(self, tail: Optional[TailModel] = None) -> SampledFunction:
        """Spline view of the table on its positive momenta"""
        keep = self.momenta > 0
        grid = RadialGrid(self.momenta[keep])
        tail = tail or TailModel()
        if tail.kind in ("exponential", "algebraic"):
            tail = tail.with_amplitude(float(self.values[keep][-1]))
        return SampledFunction(grid, self.values[keep], tail)


@dataclass(frozen=True)
class SignedSplit:
    plus: SampledFunction
    minus: SampledFunction
    roots: Tuple[float, ...] = ()


# ---------- Fourier transforms ----------

def _require_moment(f: SampledFunction, power: int, what: str):
    flags = l1_flags(f)
    exps = decay_exponents(f.grid.nodes, f.values)
    if exps.origin + power <= -1.0:
        raise IntegrabilityViolation(f"{what}: r^{power} f is not integrable at the origin")
    key = {0: "L1_at_inf", 1: "rU_L1_at_inf", 2: "r2U_L1_at_inf"}[power]
    if not flags[key]:
        raise IntegrabilityViolation(f"{what}: r^{power} f is not integrable at infinity")


def sine_transform(U: SampledFunction, momenta: Sequence[float],
                   tolerance: float = QUAD_TOLERANCE) -> TransformTable:
    """U~(p) = integral of U(r) sin(pr)/p dr, with U~(0) = integral of r U(r) dr"""
    _require_moment(U, 1, "sine transform")
    momenta = np.asarray(momenta, dtype=float)
    values = np.empty_like(momenta)
    positive = momenta > 0
    if np.any(positive):
        values[positive] = integrate_oscillatory_batch(U, momenta[positive], "sin",
                                                       tolerance=tolerance) / momenta[positive]
    if np.any(~positive):
        values[~positive] = integrate_semi_infinite(U, power=1, tolerance=tolerance)
    return TransformTable(momenta, values, "sine")


def cosine_transform(f: SampledFunction, momenta: Sequence[float], tolerance: float = QUAD_TOLERANCE,
                     flag_tolerance: float = 1e-9, check_positivity: bool = True) -> TransformTable:
    """F_c(k) = integral of f(r) cos(kr) dr

    When f is bounded, non-increasing, vanishing at infinity and convex the
    transform must come out positive; a non-positive value then raises.
    """
    shapes = shape_flags(f.grid.nodes, f.values, flag_tolerance)
    integrability = l1_flags(f)
    convex_route = (shapes.bounded and shapes.nonincreasing and shapes.convex
                    and integrability["vanishing_at_infinity"] and shapes.positive)
    if not convex_route:
        _require_moment(f, 0, "cosine transform")
    momenta = np.asarray(momenta, dtype=float)
    values = np.empty_like(momenta)
    positive = momenta > 0
    if np.any(positive):
        values[positive] = integrate_oscillatory_batch(f, momenta[positive], "cos", tolerance=tolerance)
    if np.any(~positive):
        values[~positive] = integrate_semi_infinite(f, tolerance=tolerance)
    flags = {**shapes.as_dict(), "convex_route": convex_route}
    if check_positivity and convex_route and np.any(values[positive] <= 0.0):
        worst = float(np.min(values[positive]))
        raise PositivityViolation(f"cosine transform of a convex decreasing profile reached {worst:.3e}")
    return TransformTable(momenta, values, "cosine", flags)


def tail_function(U: SampledFunction) -> SampledFunction:
    """W(r) = integral of U from r to infinity"""
    if not U.tail.moment_integrable(1) or not l1_flags(U)["rU_L1_at_inf"]:
        raise IntegrabilityViolation("tail function needs r U(r) integrable at infinity")
    tail = U.tail
    r_max = U.grid.r_max
    if tail.kind == "exponential":
        beyond = tail.amplitude / tail.parameter
        w_tail = TailModel.exponential(tail.parameter)
    elif tail.kind == "algebraic":
        beyond = tail.amplitude * r_max / (tail.parameter - 1.0)
        w_tail = TailModel.algebraic(tail.parameter - 1.0)
    elif tail.kind == "compact":
        beyond = 0.0
        w_tail = TailModel.compact(tail.parameter)
    else:
        beyond = 0.0
        w_tail = TailModel()
    values = cumulative_from_infinity(U, U.grid, beyond)
    if w_tail.kind == "compact":
        values = np.where(U.grid.nodes >= tail.parameter, 0.0, values)
    if w_tail.kind in ("exponential", "algebraic"):
        w_tail = w_tail.with_amplitude(float(values[-1]))
    W = SampledFunction(U.grid, values, w_tail)
    exps = decay_exponents(U.grid.nodes, values)
    logger.debug("tail function: W ~ r^%.3g at the first node, r^-%.3g at r_max", exps.origin, exps.infinity)
    if exps.origin + 1.0 <= DECAY_MARGIN:
        raise IntegrabilityViolation(f"r W(r) does not vanish at the origin (W ~ r^{exps.origin:.3g})")
    if w_tail.kind == "none" and exps.infinity - 1.0 <= DECAY_MARGIN:
        raise IntegrabilityViolation(f"r W(r) does not vanish at r_max (W ~ r^-{exps.infinity:.3g})")
    return W


def signed_split(U: SampledFunction) -> SignedSplit:
    """U = U+ - U-, with sign changes of U inserted as grid nodes"""
    nodes = U.grid.nodes
    vals = U.values
    roots = []
    changes = np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]
    for i in changes:
        a, b = nodes[i], nodes[i + 1]
        if U.fn is not None:
            roots.append(brentq(lambda r: float(U(np.array([r]))[0]), a, b, xtol=1e-14))
        else:
            roots.append(a - vals[i] * (b - a) / (vals[i + 1] - vals[i]))
    grid = RadialGrid(insert_nodes(nodes, roots), U.grid.refine_origin) if roots else U.grid
    base = U.fn if U.fn is not None else U

    def plus_fn(r):
        return np.maximum(base(r), 0.0)

    def minus_fn(r):
        return np.maximum(-base(r), 0.0)

    values = np.asarray(base(grid.nodes), dtype=float)
    if roots:
        values[np.isin(grid.nodes, roots)] = 0.0
    amp = U.tail.amplitude
    tail_plus = U.tail.with_amplitude(max(amp, 0.0))
    tail_minus = U.tail.with_amplitude(max(-amp, 0.0))
    return SignedSplit(
        plus=SampledFunction(grid, np.maximum(values, 0.0), tail_plus, plus_fn),
        minus=SampledFunction(grid, np.maximum(-values, 0.0), tail_minus, minus_fn),
        roots=tuple(float(x) for x in roots),
    )


def _even_convolution(outer: SampledFunction, inner: SampledFunction, radii: np.ndarray,
                      odd: bool = False, kinks: Sequence[float] = (), order: int = 16) -> np.ndarray:
    """integral of outer(t) [s inner(|r-t|) + inner(r+t)] dt at each r, s = sgn(r-t) if odd else 1"""
    if not np.any(outer.values) or not np.any(inner.values):
        return np.zeros_like(radii)
    out = np.empty_like(radii)
    base = outer.grid.nodes
    kinks = np.asarray(kinks, dtype=float)
    for i, r in enumerate(radii):
        extra = [r]
        if kinks.size:
            extra.extend(np.concatenate([r - kinks, r + kinks, kinks - r]))
        edges = np.concatenate([[0.0], insert_nodes(base, extra)])
        pts, wts = segment_points(edges, order)
        t = pts.ravel()
        sign = np.sign(r - t) if odd else 1.0
        integrand = outer(t) * (sign * inner(np.abs(r - t)) + inner(r + t))
        out[i] = float(np.sum(integrand * wts.ravel()))
    return out


def _convolution_tail(source: TailModel, values: np.ndarray, radii: np.ndarray, r_max: float):
    """Tail of an even convolution whose slower factor has the given tail"""
    if source.kind == "algebraic":
        return values, TailModel.algebraic(source.parameter, float(values[-1]))
    if source.kind == "exponential":
        return values, TailModel.exponential(source.parameter, float(values[-1]))
    if source.kind == "compact" and 2.0 * source.parameter <= r_max:
        values = np.where(radii >= 2.0 * source.parameter, 0.0, values)
        return values, TailModel.compact(2.0 * source.parameter)
    return values, TailModel()


def omega_convolution(split: SignedSplit, grid: Optional[RadialGrid] = None) -> SampledFunction:
    """omega(r) with G(k) = integral of omega(r) cos(kr) dr

    omega[X, Y](r) = (pi/4) integral of W_Y(t) [sgn(r-t) X(|r-t|) + X(r+t)] dt.
    The sign factor is the sign of the P-integral of sin(xy)/(y - y0) for
    negative x. omega[X, Y] is symmetric in X and Y, so
    omega = omega[+,+] + omega[-,-] - 2 omega[-,+].
    """
    plus, minus = split.plus, split.minus
    W_plus, W_minus = tail_function(plus), tail_function(minus)
    if grid is None:
        grid = make_radial_grid(plus.grid.r_max, OMEGA_NODES, refine_origin=False)
    radii = grid.nodes
    kinks = split.roots
    values = 0.25 * np.pi * (_even_convolution(W_plus, plus, radii, True, kinks)
                             + _even_convolution(W_minus, minus, radii, True, kinks)
                             - 2.0 * _even_convolution(W_plus, minus, radii, True, kinks))
    tail = plus.tail if plus.tail.amplitude or plus.tail.kind == "compact" else minus.tail
    values, omega_tail = _convolution_tail(tail, values, radii, grid.r_max)
    omega = SampledFunction(grid, values, omega_tail)
    if omega_tail.kind == "algebraic" and not omega_tail.moment_integrable(0):
        raise IntegrabilityViolation("omega is not integrable at infinity")
    l1 = integrate_semi_infinite(SampledFunction(grid, np.abs(values), TailModel()))
    logger.debug("omega convolution: integral of |omega| over the grid = %.6e", l1)
    if not np.isfinite(l1):
        raise IntegrabilityViolation("omega has an infinite integral of |omega|")
    remainder = grid.r_max * abs(float(values[-1]))
    if omega_tail.kind == "none" and remainder > EDGE_FRACTION * l1:
        raise IntegrabilityViolation(f"omega has not decayed at r_max: r |omega(r)| = {remainder:.2e}")
    return omega


def autocorrelation(W: SampledFunction, grid: Optional[RadialGrid] = None,
                    kinks: Sequence[float] = ()) -> SampledFunction:
    """Omega(r) = (1/2) integral of W(t) [W(|r-t|) + W(r+t)] dt, whose cosine transform is W_c^2"""
    if grid is None:
        grid = make_radial_grid(W.grid.r_max, OMEGA_NODES, refine_origin=False)
    radii = grid.nodes
    values = 0.5 * _even_convolution(W, W, radii, False, kinks)
    values, tail = _convolution_tail(W.tail, values, radii, grid.r_max)
    return SampledFunction(grid, values, tail)


# ---------- Hankel transforms and Bessel functions ----------

def bessel_suite(kind: str, nu: float, x):
    """J_nu, I_nu or K_nu with closed forms at half-integer order"""
    x = np.asarray(x, dtype=float)
    if nu < 0:
        raise DomainError(f"Bessel order must be non-negative, got {nu}")
    if kind == "K" and np.any(x <= 0):
        raise DomainError("K_nu needs x > 0")
    if kind in ("J", "I") and np.any(x < 0) and not float(nu).is_integer():
        raise DomainError(f"{kind}_nu with non-integer order needs x >= 0")
    half_integer = (2.0 * nu).is_integer() and not float(nu).is_integer()
    if kind == "J":
        if half_integer:
            n = int(nu - 0.5)
            with np.errstate(divide="ignore", invalid="ignore"):
                out = np.sqrt(2.0 * x / np.pi) * special.spherical_jn(n, x)
            return np.where(x == 0, 0.0, out)
        return special.jv(nu, x)
    if kind == "I":
        return special.iv(nu, x)
    if kind == "K":
        if nu == 0.5:
            return np.sqrt(np.pi / (2.0 * x)) * np.exp(-x)
        return special.kv(nu, x)
    raise DomainError(f"unknown Bessel kind {kind!r}")


def _hankel_kernel(nu: float):
    def kernel(x):
        return np.sqrt(x) * bessel_suite("J", nu, x)
    return kernel


def hankel_transform(f: SampledFunction, nu: float, momenta: Sequence[float],
                     tolerance: float = QUAD_TOLERANCE) -> TransformTable:
    """F~_nu(k) = integral of f(r) sqrt(kr) J_nu(kr) dr"""
    if nu < 0.5:
        raise UnsupportedOrder(f"Hankel order must be at least 1/2, got {nu}")
    tail = f.tail
    if tail.kind == "algebraic" and tail.amplitude and tail.parameter <= 0.5:
        raise IntegrabilityViolation("Hankel integrand does not decay at infinity")
    kernel = _hankel_kernel(nu)
    offset = (0.5 * nu + 0.75) * np.pi
    momenta = np.asarray(momenta, dtype=float)
    values = np.zeros_like(momenta)
    for i, k in enumerate(momenta):
        if k <= 0:
            continue

        def integrand(r, k=k):
            return f(r) * kernel(k * r)

        parts, _, _ = adaptive_segments(integrand, f.grid.nodes, tolerance)
        head = origin_piece(integrand, f.grid.r_min)
        beyond = 0.0
        if tail.kind in ("algebraic", "exponential") and tail.amplitude:
            beyond = oscillatory_tail(f, f.grid.r_max, k,
                                      weight=kernel, offset=offset)
        values[i] = head + float(np.sum(parts)) + beyond
    return TransformTable(momenta, values, "hankel")


def hankel_reference(pair: str, a: float, nu: float, k):
    """Closed forms of the decaying Hankel pairs

    exponential: f = r^-1/2 e^{-a r}
    lorentzian:  f = r^-1/2 (r^2 + a^2)^-1/2
    gaussian:    f = r^-1/2 e^{-a r^2}
    """
    k = np.asarray(k, dtype=float)
    if pair == "exponential":
        root = np.sqrt(a * a + k * k)
        return k ** (0.5 - nu) * (root - a) ** nu / root
    if pair == "lorentzian":
        x = 0.5 * a * k
        # I*K through the scaled forms ive*kve, whose exponentials cancel
        return np.sqrt(k) * special.ive(0.5 * nu, x) * special.kve(0.5 * nu, x)
    if pair == "gaussian":
        x = k * k / (8.0 * a)
        return 0.5 * math.sqrt(math.pi) * np.sqrt(k / a) * special.ive(0.5 * nu, x)
    raise DomainError(f"unknown Hankel pair {pair!r}")


def hankel_profile(pair: str, a: float, grid: Optional[RadialGrid] = None) -> SampledFunction:
    """The input profile of a decaying Hankel pair"""
    grid = grid or make_radial_grid()
    if pair == "exponential":
        return SampledFunction.from_callable(lambda r: np.exp(-a * r) / np.sqrt(r), grid,
                                             TailModel.exponential(a))
    if pair == "lorentzian":
        fn = lambda r: 1.0 / np.sqrt(r * (r * r + a * a))
        return SampledFunction.from_callable(fn, grid, TailModel.algebraic(1.5))
    if pair == "gaussian":
        return SampledFunction.from_callable(lambda r: np.exp(-a * r * r) / np.sqrt(r), grid,
                                             TailModel.compact(grid.r_max))
    raise DomainError(f"unknown Hankel pair {pair!r}")


# ---------- Spot checks ----------

def parseval_check(U: SampledFunction, table: TransformTable):
    """(integral of U^2, (2/pi) integral of (p U~)^2) for a sine table"""
    if table.kind != "sine":
        raise DomainError("Parseval check needs a sine transform table")
    lhs = integrate_semi_infinite(SampledFunction(U.grid, U.values ** 2, U.tail.with_amplitude(0.0),
                                                  None if U.fn is None else (lambda r: U.fn(r) ** 2)))
    h = SampledFunction(RadialGrid(table.momenta[table.momenta > 0]),
                        (table.momenta * table.values)[table.momenta > 0] ** 2)
    p_max = h.grid.r_max
    body = integrate_semi_infinite(h)
    u0 = float(U(np.array([U.grid.r_min]))[0])
    rhs = 2.0 / np.pi * (body + u0 ** 2 / p_max)
    return lhs, rhs


def riemann_lebesgue_residual(table: TransformTable) -> float:
    """|p U~(p)| at the largest momentum of a sine table"""
    return float(abs(table.momenta[-1] * table.values[-1]))
