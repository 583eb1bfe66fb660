"""Grids & Quadrature Module - Numerical substrate
Radial grids, sampled profiles with analytic tails, semi-infinite and
principal-value quadrature, divided differences

Copyright (C) 2025 Embedded State Detector Contributors
This file is licensed under the GNU General Public License v3.0
See LICENSE or https://www.gnu.org/licenses/gpl-3.0.txt for details.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Dict, Optional, Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import integrate
from scipy.interpolate import CubicSpline, PchipInterpolator

from .errors import (DomainError, NonIntegrableTail, NonSmoothAtPole,
                     PoleAtEndpoint, ToleranceNotMet)
from .logging_config import get_logger

logger = get_logger(__name__)

Evaluator = Callable[[np.ndarray], np.ndarray]

QUAD_TOLERANCE = 1e-10
PV_TOLERANCE = 1e-8
GL_ORDERS = (8, 16, 32, 64)
DECAY_MARGIN = 0.05
KINK_RATIO = 0.75


# ---------- Grids ----------

@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Strictly increasing positive nodes; also used for momentum grids"""
    nodes: np.ndarray
    refine_origin: bool = False

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size < 2:
            raise DomainError("a grid needs at least 2 nodes")
        if not np.all(np.isfinite(nodes)) or nodes[0] <= 0.0:
            raise DomainError("grid nodes must be finite and positive")
        if np.any(np.diff(nodes) <= 0.0):
            raise DomainError("grid nodes must be strictly increasing")
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @property
    def r_max(self) -> float:
        return float(self.nodes[-1])

    @property
    def r_min(self) -> float:
        return float(self.nodes[0])

    def __len__(self):
        return self.nodes.size


def make_radial_grid(r_max: float = 40.0, nodes: int = 2000, r_min: float = 1e-6,
                     refine_origin: bool = True, jitter: float = 0.0,
                     seed: Optional[int] = None,
                     breakpoints: Optional[Sequence[float]] = None) -> RadialGrid:
    """Hybrid grid: log-spaced below the knee, uniform above it

    breakpoints (kinks of the profiles to be sampled) become nodes.
    """
    if r_max <= 0 or nodes < 4:
        raise DomainError(f"invalid grid request r_max={r_max}, nodes={nodes}")
    if not refine_origin:
        pts = np.linspace(r_max / nodes, r_max, nodes)
    else:
        knee = min(0.5, r_max / 4.0)
        n_log = max(2, nodes // 5)
        n_uni = nodes - n_log
        log_part = np.geomspace(r_min, knee, n_log, endpoint=False)
        uni_part = np.linspace(knee, r_max, n_uni)
        pts = np.concatenate([log_part, uni_part])
    if jitter > 0.0:
        rng = np.random.default_rng(seed)
        h = np.diff(pts)
        shift = jitter * rng.uniform(-0.25, 0.25, size=pts.size - 2) * np.minimum(h[:-1], h[1:])
        pts = pts.copy()
        pts[1:-1] += shift
    if breakpoints:
        pts = insert_nodes(pts, breakpoints)
    return RadialGrid(pts, refine_origin=refine_origin)


def insert_nodes(nodes: np.ndarray, extra: Sequence[float], rtol: float = 1e-9) -> np.ndarray:
    """Merge extra points into sorted nodes; an existing node within rtol is snapped instead"""
    nodes = np.array(nodes, dtype=float)
    for x in sorted(float(v) for v in extra):
        if not nodes[0] < x < nodes[-1]:
            continue
        i = int(np.searchsorted(nodes, x))
        near = [j for j in (i - 1, i) if 0 <= j < nodes.size and abs(nodes[j] - x) <= rtol * x]
        if near:
            nodes[near[0]] = x
        else:
            nodes = np.insert(nodes, i, x)
    return nodes


def uniform_run_mask(nodes: np.ndarray, rtol: float = 1e-6) -> np.ndarray:
    """True at i when the spacings around node i (two each side) are equal"""
    h = np.diff(nodes)
    mask = np.zeros(nodes.size, dtype=bool)
    if nodes.size < 5:
        return mask
    same = np.abs(np.diff(h)) <= rtol * h[1:]
    # node i needs h[i-2], h[i-1], h[i], h[i+1] equal
    ok = same[:-2] & same[1:-1] & same[2:]
    mask[2:-2] = ok
    return mask


# ---------- Tails ----------

@dataclass(frozen=True)
class TailModel:
    """Analytic continuation of a profile beyond the last grid node"""
    kind: str = "none"
    parameter: float = 0.0
    amplitude: float = 0.0

    KINDS = ("exponential", "algebraic", "compact", "none")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise DomainError(f"unknown tail kind {self.kind!r}")
        if self.kind == "exponential" and not self.parameter > 0:
            raise DomainError("exponential tail rate must be positive")
        if self.kind == "algebraic" and not self.parameter > 0:
            raise DomainError("algebraic tail power must be positive")

    @classmethod
    def exponential(cls, rate: float, amplitude: float = 0.0) -> "TailModel":
        return cls("exponential", float(rate), float(amplitude))

    @classmethod
    def algebraic(cls, power: float, amplitude: float = 0.0) -> "TailModel":
        return cls("algebraic", float(power), float(amplitude))

    @classmethod
    def compact(cls, cutoff: float) -> "TailModel":
        return cls("compact", float(cutoff), 0.0)

    def with_amplitude(self, amplitude: float) -> "TailModel":
        return TailModel(self.kind, self.parameter, float(amplitude))

    def value(self, r: np.ndarray, r_max: float) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        if self.kind == "exponential":
            return self.amplitude * np.exp(-self.parameter * (r - r_max))
        if self.kind == "algebraic":
            return self.amplitude * (r / r_max) ** (-self.parameter)
        return np.zeros_like(r)

    def moment_integrable(self, power: int) -> bool:
        """Whether r**power times the tail is absolutely integrable at infinity"""
        if self.kind == "algebraic":
            return self.amplitude == 0.0 or self.parameter - power > 1.0
        return True


# ---------- Sampled profiles ----------

@dataclass(frozen=True, eq=False)
class SampledFunction:
    """One-variable profile: grid values, tail model and an optional exact evaluator"""
    grid: RadialGrid
    values: np.ndarray
    tail: TailModel = field(default_factory=TailModel)
    fn: Optional[Evaluator] = None
    monotone: bool = False

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != self.grid.nodes.shape:
            raise DomainError("values must align with grid nodes")
        if not np.all(np.isfinite(values)):
            raise DomainError("sampled values must be finite at every node")
        if self.tail.kind == "compact":
            beyond = self.grid.nodes > self.tail.parameter * (1.0 + 1e-12)
            if np.any(values[beyond] != 0.0):
                raise DomainError("values beyond a compact cutoff must be exactly zero")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_callable(cls, fn: Evaluator, grid: RadialGrid, tail: Optional[TailModel] = None,
                      monotone: bool = False) -> "SampledFunction":
        values = np.asarray(fn(grid.nodes), dtype=float)
        tail = tail or TailModel()
        if tail.kind in ("exponential", "algebraic"):
            tail = tail.with_amplitude(float(values[-1]))
        return cls(grid, values, tail, fn, monotone)

    @property
    def nodes(self) -> np.ndarray:
        return self.grid.nodes

    @cached_property
    def _interpolant(self):
        if self.monotone:
            return PchipInterpolator(self.grid.nodes, self.values, extrapolate=True)
        return CubicSpline(self.grid.nodes, self.values, bc_type="not-a-knot", extrapolate=True)

    def __call__(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        shape = r.shape
        r = r.ravel()
        r_max = self.grid.r_max
        out = np.empty_like(r)
        inside = r <= r_max
        if np.any(inside):
            if self.fn is not None:
                out[inside] = self.fn(r[inside])
            else:
                out[inside] = self._interpolant(r[inside])
        outside = ~inside
        if np.any(outside):
            if self.fn is not None and self.tail.kind != "compact":
                out[outside] = self.fn(r[outside])
            else:
                out[outside] = self.tail.value(r[outside], r_max)
        return out.reshape(shape)

    def derivative(self, r) -> np.ndarray:
        return self._interpolant.derivative()(np.asarray(r, dtype=float))

    def scaled(self, c: float) -> "SampledFunction":
        fn = None if self.fn is None else (lambda r, f=self.fn: c * f(r))
        return SampledFunction(self.grid, c * self.values, self.tail.with_amplitude(c * self.tail.amplitude),
                               fn, self.monotone)

    def linear_combination(self, a: float, other: "SampledFunction", b: float) -> "SampledFunction":
        """a*self + b*other on a shared grid with matching tail shapes"""
        if other.grid is not self.grid and not np.array_equal(other.grid.nodes, self.grid.nodes):
            raise DomainError("linear combination needs a shared grid")
        if (self.tail.kind, self.tail.parameter) != (other.tail.kind, other.tail.parameter):
            raise DomainError("linear combination needs matching tail models")
        fn = None
        if self.fn is not None and other.fn is not None:
            fn = lambda r, f=self.fn, g=other.fn: a * f(r) + b * g(r)
        tail = self.tail.with_amplitude(a * self.tail.amplitude + b * other.tail.amplitude)
        return SampledFunction(self.grid, a * self.values + b * other.values, tail, fn)


# ---------- Gauss-Legendre segment quadrature ----------

_GL_CACHE: Dict[int, tuple] = {}


def _gauss_legendre(order: int):
    if order not in _GL_CACHE:
        _GL_CACHE[order] = leggauss(order)
    return _GL_CACHE[order]


def segment_points(edges: np.ndarray, order: int):
    """Quadrature points and weights on every interval between consecutive edges"""
    x, w = _gauss_legendre(order)
    a = edges[:-1, None]
    b = edges[1:, None]
    half = 0.5 * (b - a)
    pts = 0.5 * (a + b) + half * x[None, :]
    wts = half * w[None, :]
    return pts, wts


def segment_integrals(func: Evaluator, edges: np.ndarray, order: int = 16) -> np.ndarray:
    """Integral of func over each interval [edges[i], edges[i+1]]"""
    pts, wts = segment_points(np.asarray(edges, dtype=float), order)
    vals = np.asarray(func(pts.ravel()), dtype=float).reshape(pts.shape)
    return np.sum(vals * wts, axis=1)


def adaptive_segments(func: Evaluator, edges: np.ndarray, tolerance: float = QUAD_TOLERANCE):
    """Segment integrals raised in order until orders n and 2n agree

    Returns (per-interval integrals, error estimate, order used).
    """
    edges = np.asarray(edges, dtype=float)
    previous = segment_integrals(func, edges, GL_ORDERS[0])
    for order in GL_ORDERS[1:]:
        current = segment_integrals(func, edges, order)
        error = float(np.sum(np.abs(current - previous)))
        if error <= tolerance:
            logger.debug("segment quadrature converged at order %d, error %.2e", order, error)
            return current, error, order
        previous = current
    raise ToleranceNotMet(f"segment quadrature stalled at order {GL_ORDERS[-1]} (error {error:.2e})")


def integrate_interval(func: Evaluator, a: float, b: float, breaks: Optional[np.ndarray] = None,
                       tolerance: float = QUAD_TOLERANCE) -> float:
    """Integral over [a, b] using the breakpoints inside as segment edges"""
    if b <= a:
        return 0.0
    edges = [a]
    if breaks is not None:
        inner = np.asarray(breaks, dtype=float)
        edges.extend(inner[(inner > a) & (inner < b)].tolist())
    edges.append(b)
    parts, _, _ = adaptive_segments(func, np.asarray(edges), tolerance)
    return float(np.sum(parts))


def cumulative_from_infinity(func: Evaluator, grid: RadialGrid, tail_integral: float = 0.0,
                             order: int = 16) -> np.ndarray:
    """C[i] = integral of func from nodes[i] to infinity; the part beyond r_max is tail_integral"""
    parts = segment_integrals(func, grid.nodes, order)
    rev = np.concatenate([np.cumsum(parts[::-1])[::-1], [0.0]])
    return rev + tail_integral


def cumulative_from_origin(func: Evaluator, grid: RadialGrid, head: Optional[float] = None,
                           order: int = 16) -> np.ndarray:
    """C[i] = integral of func from 0 to nodes[i]"""
    if head is None:
        head = origin_piece(func, grid.r_min)
    parts = segment_integrals(func, grid.nodes, order)
    return head + np.concatenate([[0.0], np.cumsum(parts)])


def origin_piece(func: Evaluator, r1: float) -> float:
    value, _ = integrate.quad(lambda t: float(func(np.array([t]))[0]), 0.0, r1, limit=100)
    return value


# ---------- Semi-infinite integrals ----------

def _exponential_tail(tail: TailModel, r_max: float, weight: Optional[str], p, power: int):
    """Closed-form integral of r**power * A e^{-a(r-R)} * weight(p r) over [R, inf)"""
    p = np.asarray(p, dtype=float)
    z = tail.parameter - 1j * p if weight else np.full_like(p, tail.parameter, dtype=complex)
    phase = np.exp(1j * p * r_max) if weight else 1.0
    total = np.zeros_like(z)
    for j in range(power + 1):
        total = total + math.factorial(power) / math.factorial(power - j) * r_max ** (power - j) / z ** (j + 1)
    total = tail.amplitude * phase * total
    if weight == "sin":
        return total.imag
    return total.real


def oscillatory_tail(func: Evaluator, start: float, frequency: float, weight="sin",
                     half_periods: int = 48, offset: Optional[float] = None) -> float:
    """Integral of func(r)*weight(frequency r) over [start, inf)

    Sums the integrals between consecutive zeros of the weight and
    accelerates the alternating partial sums with the Wynn epsilon table.
    weight is "sin", "cos" or a callable of frequency*r whose zeros sit
    (asymptotically) at offset + n*pi.
    """
    if frequency <= 0:
        raise DomainError("oscillatory_tail needs a positive frequency")
    if callable(weight):
        trig = weight
        offset = offset or 0.0
    else:
        trig = np.sin if weight == "sin" else np.cos
        offset = 0.0 if weight == "sin" else 0.5 * np.pi
    step = np.pi / frequency
    n0 = math.ceil((frequency * start - offset) / np.pi)
    first_zero = (n0 * np.pi + offset) / frequency
    if first_zero <= start:
        first_zero += step
    edges = np.concatenate([[start], first_zero + step * np.arange(half_periods + 1)])
    parts = segment_integrals(lambda r: func(r) * trig(frequency * r), edges, 32)
    return wynn_epsilon(np.cumsum(parts))


def wynn_epsilon(partial_sums: Sequence[float]) -> float:
    """Limit estimate of a slowly converging sequence by the epsilon algorithm"""
    s = np.asarray(partial_sums, dtype=float)
    n = s.size
    if n < 3:
        return float(s[-1])
    prev = np.zeros(n + 1)
    curr = s.copy()
    best = float(s[-1])
    for k in range(1, n):
        diff = curr[1:] - curr[:-1]
        with np.errstate(divide="ignore", invalid="ignore"):
            nxt = prev[1:len(curr)] + 1.0 / diff
        if not np.all(np.isfinite(nxt)):
            break
        prev, curr = curr, nxt
        if k % 2 == 0 and curr.size:
            best = float(curr[-1])
        if curr.size < 2:
            break
    return best


def _check_tail(tail: TailModel, weight: Optional[str], power: int):
    if tail.kind == "algebraic" and tail.amplitude != 0.0:
        effective = tail.parameter - power
        if weight is None and effective <= 1.0:
            raise NonIntegrableTail(f"algebraic tail r^-{tail.parameter:g} times r^{power} is not integrable")
        if weight is not None and effective <= 0.0:
            raise NonIntegrableTail(f"algebraic tail r^-{tail.parameter:g} times r^{power} does not decay")


def _tail_integral(f: SampledFunction, weight: Optional[str], p: float, power: int) -> float:
    tail, r_max = f.tail, f.grid.r_max
    if tail.kind in ("compact", "none") or tail.amplitude == 0.0:
        return 0.0
    if weight == "sin" and p == 0.0:
        return 0.0
    if tail.kind == "exponential":
        return float(_exponential_tail(tail, r_max, weight if p > 0 else None, np.array(p), power))
    s = tail.parameter - power
    if weight is None or p == 0.0:
        if s <= 1.0:
            raise NonIntegrableTail(f"algebraic tail r^-{tail.parameter:g} times r^{power} is not integrable")
        return tail.amplitude * r_max ** (power + 1) / (s - 1.0)
    return oscillatory_tail(lambda r: (r ** power) * tail.value(r, r_max), r_max, p, weight)


def trig_tail_integrals(f: SampledFunction, p: float):
    """(integral of f cos(pr), integral of f sin(pr)) over [r_max, inf)"""
    return _tail_integral(f, "cos", p, 0), _tail_integral(f, "sin", p, 0)


def integrate_semi_infinite(f: SampledFunction, weight: Optional[str] = None, p: float = 0.0,
                            power: int = 0, tolerance: float = QUAD_TOLERANCE) -> float:
    """Integral over [0, inf) of r**power * f(r) * weight(p r)

    weight is None, "sin" or "cos". The finite part uses Gauss-Legendre on
    the grid intervals, the part below the first node uses adaptive
    quadrature and the part beyond r_max comes from the tail model.
    """
    if weight not in (None, "sin", "cos"):
        raise DomainError(f"unknown weight {weight!r}")
    _check_tail(f.tail, weight, power)
    trig = {None: None, "sin": np.sin, "cos": np.cos}[weight]

    def integrand(r):
        out = f(r) * r ** power
        if trig is not None:
            out = out * trig(p * r)
        return out

    head = origin_piece(integrand, f.grid.r_min)
    parts, error, _ = adaptive_segments(integrand, f.grid.nodes, tolerance)
    tail = _tail_integral(f, weight, p, power)
    logger.debug("semi-infinite integral: body error %.2e, tail %.3e", error, tail)
    return float(head + np.sum(parts) + tail)


def integrate_oscillatory_batch(f: SampledFunction, momenta: np.ndarray, weight: str = "sin",
                                power: int = 0, tolerance: float = QUAD_TOLERANCE,
                                chunk: int = 16) -> np.ndarray:
    """integrate_semi_infinite for many frequencies on shared quadrature points

    The Gauss-Legendre order is fixed by the largest frequency, where it is
    hardest to resolve.
    """
    momenta = np.asarray(momenta, dtype=float)
    _check_tail(f.tail, weight, power)
    trig = np.sin if weight == "sin" else np.cos
    p_top = float(np.max(momenta)) if momenta.size else 0.0
    _, _, order = adaptive_segments(lambda r: f(r) * r ** power * trig(p_top * r), f.grid.nodes,
                                    tolerance)
    pts, wts = segment_points(f.grid.nodes, order)
    pts, wts = pts.ravel(), wts.ravel()
    weighted = f(pts) * pts ** power * wts
    out = np.empty_like(momenta)
    for start in range(0, momenta.size, chunk):
        block = momenta[start:start + chunk]
        out[start:start + chunk] = trig(np.outer(block, pts)) @ weighted
    for i, p in enumerate(momenta):
        head_fn = lambda r, p=p: f(r) * r ** power * trig(p * r)
        out[i] += origin_piece(head_fn, f.grid.r_min) + _tail_integral(f, weight, p, power)
    return out


# ---------- Principal value ----------

def _pv_window_log(k: float, delta: float) -> float:
    """PV of 1/(p^2-k^2) over [k-delta, k+delta]"""
    return -math.log((2.0 * k + delta) / (2.0 * k - delta)) / (2.0 * k)


def _kink_test(h: SampledFunction, k: float, delta: float):
    hk = float(h(np.array([k]))[0])

    def mismatch(eta):
        left, right = h(np.array([k - eta, k + eta]))
        return abs((right - hk) / eta - (hk - left) / eta)

    eta = delta / 8.0
    m_full, m_half = mismatch(eta), mismatch(eta / 2.0)
    floor = 1e-7 * (1.0 + abs(hk) / eta)
    if m_full > floor and m_half > KINK_RATIO * m_full:
        raise NonSmoothAtPole(f"one-sided slopes of h differ by {m_full:.3e} at p={k:g}")


def _algebraic_pv_tail(tail: TailModel, p_max: float, k: float) -> float:
    if tail.kind == "algebraic" and abs(tail.parameter - 2.0) < 1e-12:
        coeff = tail.amplitude * p_max ** 2
        return coeff / k ** 2 * (math.log((p_max + k) / (p_max - k)) / (2.0 * k) - 1.0 / p_max)
    value, _ = integrate.quad(lambda p: float(tail.value(np.array([p]), p_max)[0]) / (p * p - k * k),
                              p_max, np.inf, limit=200)
    return value


def principal_value(h: SampledFunction, k: float, delta: float = 0.05,
                    tolerance: float = PV_TOLERANCE, check_smoothness: bool = True) -> float:
    """P-integral over [0, inf) of h(p)/(p^2 - k^2)

    h(k) is subtracted on the symmetric window [k-delta, k+delta], whose
    subtracted piece has the closed-form principal value
    -(1/2k) ln((2k+delta)/(2k-delta)).
    """
    p_max = h.grid.r_max
    if k <= delta:
        raise PoleAtEndpoint(f"pole k={k:g} is within delta={delta:g} of p=0")
    if k + delta >= p_max:
        raise PoleAtEndpoint(f"pole k={k:g} is within delta of the momentum ceiling {p_max:g}")
    if check_smoothness:
        _kink_test(h, k, delta)
    hk = float(h(np.array([k]))[0])
    breaks = h.grid.nodes
    kk = k * k

    def regular(p):
        return h(p) / (p * p - kk)

    def subtracted(p):
        return (h(p) - hk) / (p * p - kk)

    head = origin_piece(regular, h.grid.r_min)
    lower = integrate_interval(regular, h.grid.r_min, k - delta, breaks, tolerance)
    window = (integrate_interval(subtracted, k - delta, k, None, tolerance)
              + integrate_interval(subtracted, k, k + delta, None, tolerance))
    upper = integrate_interval(regular, k + delta, p_max, breaks, tolerance)
    tail = _algebraic_pv_tail(h.tail, p_max, k) if h.tail.kind != "none" and h.tail.amplitude else 0.0
    return head + lower + window + hk * _pv_window_log(k, delta) + upper + tail


def principal_value_oscillatory(amplitude: Evaluator, pole: float, frequency: float,
                                periods: int = 10) -> float:
    """P-integral over the whole line of a(y) sin(w y)/(y - y0) for slowly varying a

    Folding about the pole gives the regular integral over t > 0 of
    [a(y0+t) sin(w(y0+t)) - a(y0-t) sin(w(y0-t))]/t.
    """
    s0, c0 = math.sin(frequency * pole), math.cos(frequency * pole)

    def plus(t):
        return amplitude(np.atleast_1d(pole + t)) + amplitude(np.atleast_1d(pole - t))

    def minus(t):
        return amplitude(np.atleast_1d(pole + t)) - amplitude(np.atleast_1d(pole - t))

    def folded(t):
        return float(c0 * plus(t)[0] * frequency * np.sinc(frequency * t / np.pi)
                     + s0 * minus(t)[0] * np.cos(frequency * t) / t)

    cut = 2.0 * np.pi * periods / frequency
    body, _ = integrate.quad(folded, 0.0, cut, limit=500, epsabs=1e-12)
    tail_sin, _ = integrate.quad(lambda t: c0 * float(plus(t)[0]) / t, cut, np.inf,
                                 weight="sin", wvar=frequency)
    tail_cos, _ = integrate.quad(lambda t: s0 * float(minus(t)[0]) / t, cut, np.inf,
                                 weight="cos", wvar=frequency)
    return body + tail_sin + tail_cos


# ---------- Divided differences ----------

def second_difference(nodes: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Second derivative estimate: five-point on uniform runs, three-point elsewhere"""
    nodes = np.asarray(nodes, dtype=float)
    f = np.asarray(values, dtype=float)
    out = np.empty_like(f)
    hm = nodes[1:-1] - nodes[:-2]
    hp = nodes[2:] - nodes[1:-1]
    out[1:-1] = 2.0 * (f[2:] * hm - f[1:-1] * (hm + hp) + f[:-2] * hp) / (hm * hp * (hm + hp))
    mask = uniform_run_mask(nodes)
    idx = np.nonzero(mask)[0]
    if idx.size:
        h = nodes[idx + 1] - nodes[idx]
        out[idx] = (-f[idx - 2] + 16 * f[idx - 1] - 30 * f[idx] + 16 * f[idx + 1] - f[idx + 2]) / (12 * h * h)
    out[0], out[-1] = out[1], out[-2]
    return out


@dataclass(frozen=True)
class DecayExponents:
    """|f| ~ r**origin near 0 and |f| ~ r**(-infinity) near r_max"""
    origin: float
    infinity: float
    vanishes: bool


def decay_exponents(nodes: np.ndarray, values: np.ndarray) -> DecayExponents:
    nodes = np.asarray(nodes, dtype=float)
    mag = np.abs(np.asarray(values, dtype=float))
    scale = float(np.max(mag)) if mag.size else 0.0
    if scale == 0.0:
        return DecayExponents(np.inf, np.inf, True)
    floor = 1e-300

    def slope(i, j):
        a, b = max(mag[i], floor), max(mag[j], floor)
        if mag[i] == 0.0 and mag[j] == 0.0:
            return np.inf
        return math.log(b / a) / math.log(nodes[j] / nodes[i])

    i0 = min(3, nodes.size - 1)
    origin = slope(0, i0) if mag[0] > 0 or mag[i0] > 0 else np.inf
    j0 = int(np.searchsorted(nodes, 0.8 * nodes[-1]))
    j0 = min(j0, nodes.size - 2)
    if mag[-1] <= 1e-14 * scale:
        infinity = np.inf
    else:
        infinity = -slope(j0, nodes.size - 1)
    vanishes = bool(mag[-1] <= 1e-3 * scale or infinity > DECAY_MARGIN)
    return DecayExponents(float(origin), float(infinity), vanishes)


def l1_flags(f: SampledFunction) -> Dict[str, bool]:
    """Measured integrability classes of a profile

    The tail model decides behaviour at infinity when it carries one,
    otherwise log-log slopes over the last fifth of the grid do.
    """
    exps = decay_exponents(f.grid.nodes, f.values)
    tail = f.tail

    def at_inf(power):
        if tail.kind in ("exponential", "compact"):
            return True
        if tail.kind == "algebraic":
            return tail.moment_integrable(power)
        return exps.infinity - power > 1.0 + DECAY_MARGIN

    return {
        "L1_near_0": exps.origin > -1.0 + DECAY_MARGIN,
        "vanishing_at_infinity": tail.kind in ("exponential", "compact") or exps.vanishes,
        "L1_at_inf": at_inf(0),
        "rU_L1_at_inf": at_inf(1),
        "r2U_L1_at_inf": at_inf(2),
    }


@dataclass(frozen=True)
class ShapeFlags:
    positive: bool
    nonincreasing: bool
    strictly_decreasing: bool
    convex: bool
    bounded: bool

    def as_dict(self) -> Dict[str, bool]:
        return dict(self.__dict__)


def shape_flags(nodes: np.ndarray, values: np.ndarray, tolerance: float = 1e-9,
                skip: Optional[np.ndarray] = None) -> ShapeFlags:
    """Sign, monotonicity and convexity by divided differences

    Slack is tolerance times max|f|, plus the roundoff floor of the second
    difference on very fine spacings. skip masks nodes (kinks) excluded
    from the convexity test.
    """
    nodes = np.asarray(nodes, dtype=float)
    f = np.asarray(values, dtype=float)
    scale = float(np.max(np.abs(f))) if f.size else 0.0
    if scale == 0.0:
        return ShapeFlags(False, True, False, True, True)
    slack = tolerance * scale
    d = np.diff(f)
    support = f[:-1] > slack
    nonincreasing = bool(np.all(d <= slack))
    strictly = nonincreasing and bool(np.all(d[support] < 0.0))
    sd = second_difference(nodes, f)
    hm = np.diff(nodes, prepend=nodes[0] - (nodes[1] - nodes[0]))
    hp = np.diff(nodes, append=nodes[-1] + (nodes[-1] - nodes[-2]))
    roundoff = 16.0 * np.finfo(float).eps * np.abs(f) / (hm * hp)
    ok = sd >= -(slack + roundoff)
    ok[0] = ok[-1] = True
    if skip is not None:
        ok = ok | skip
    return ShapeFlags(
        positive=bool(np.all(f > -slack)),
        nonincreasing=nonincreasing,
        strictly_decreasing=strictly,
        convex=bool(np.all(ok)),
        bounded=bool(decay_exponents(nodes, f).origin > -DECAY_MARGIN),
    )


def trapezoid_weights(nodes: np.ndarray) -> np.ndarray:
    """Trapezoid quadrature weights on possibly nonuniform nodes"""
    h = np.diff(nodes)
    w = np.zeros_like(nodes)
    w[:-1] += 0.5 * h
    w[1:] += 0.5 * h
    return w
