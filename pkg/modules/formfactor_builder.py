"""Form Factor Builder Module - Form factors from positive sources
Builds U with U'' - V U = g from a positive smooth source g and positive
delta sources, checks the defining identity and predicts the
integrability of U from that of g

Copyright (C) 2025 Embedded State Detector Contributors
This file is licensed under the GNU General Public License v3.0
See LICENSE or https://www.gnu.org/licenses/gpl-3.0.txt for details.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate
from scipy.integrate import cumulative_simpson

from .config import DEFAULT_NUMERICS, Numerics
from .errors import (NonPositiveResult, ResidualTooLarge, SourceIntegrabilityViolation,
                     ValidationError)
from .grids_quadrature import (DECAY_MARGIN, RadialGrid, SampledFunction, TailModel,
                               cumulative_from_infinity, decay_exponents, l1_flags,
                               make_radial_grid, second_difference, shape_flags, uniform_run_mask)
from .local_potential import LocalPotential, ZeroEnergyPair
from .logging_config import get_logger

logger = get_logger(__name__)

KINK_EXCLUSION = 2


@dataclass(frozen=True, eq=False)
class SourceFunction:
    """Positive source: optional smooth g plus weighted delta functions"""
    smooth: Optional[SampledFunction] = None
    deltas: Tuple[Tuple[float, float], ...] = ()

    def __post_init__(self):
        deltas = tuple((float(lam), float(r0)) for lam, r0 in self.deltas)
        for lam, r0 in deltas:
            if not lam > 0 or not r0 > 0:
                raise ValidationError(f"delta source needs weight > 0 and site > 0, got ({lam}, {r0})")
        if self.smooth is not None and np.any(self.smooth.values < 0.0):
            worst = float(np.min(self.smooth.values))
            raise ValidationError(f"source g must be non-negative (minimum sample {worst:.3e})")
        object.__setattr__(self, "deltas", deltas)

    @property
    def sites(self) -> List[float]:
        return [r0 for _, r0 in self.deltas]

    def g(self, r) -> np.ndarray:
        if self.smooth is None:
            return np.zeros_like(np.asarray(r, dtype=float))
        return self.smooth(r)


@dataclass(frozen=True, eq=False)
class FormFactor:
    profile: SampledFunction
    provenance: str = "user"
    source: Optional[SourceFunction] = None
    regularity: Dict[str, bool] = field(default_factory=dict)
    name: str = "tabulated"

    @property
    def grid(self) -> RadialGrid:
        return self.profile.grid

    def __call__(self, r):
        return self.profile(r)


@dataclass(frozen=True)
class ResidualReport:
    max_residual: float
    location: float
    tolerance: float
    nodes_checked: int


# ---------- Regularity ----------

def kink_mask(grid: RadialGrid, sites: Sequence[float], width: int = KINK_EXCLUSION) -> np.ndarray:
    """True within `width` nodes of any kink site"""
    mask = np.zeros(grid.nodes.size, dtype=bool)
    for r0 in sites:
        i = int(np.argmin(np.abs(grid.nodes - r0)))
        mask[max(0, i - width):i + width + 1] = True
    return mask


def measure_regularity(profile: SampledFunction, sites: Sequence[float] = (),
                       tolerance: float = 1e-9) -> Dict[str, bool]:
    """Shape and integrability flags, recomputed from the samples"""
    skip = kink_mask(profile.grid, sites) if sites else None
    shapes = shape_flags(profile.grid.nodes, profile.values, tolerance, skip)
    flags = l1_flags(profile)
    return {
        "positive": shapes.positive,
        "decreasing": shapes.nonincreasing,
        "strictly_decreasing": shapes.strictly_decreasing,
        "convex": shapes.convex,
        "L1_near_0": flags["L1_near_0"],
        "vanishing_at_infinity": flags["vanishing_at_infinity"],
        "rU_L1_at_inf": flags["rU_L1_at_inf"],
        "r2U_L1_at_inf": flags["r2U_L1_at_inf"],
    }


def make_formfactor(profile: SampledFunction, name: str = "tabulated", sites: Sequence[float] = (),
                    tolerance: float = 1e-9) -> FormFactor:
    return FormFactor(profile, "user", None, measure_regularity(profile, sites, tolerance), name)


# ---------- User form factor families ----------

def exponential_formfactor(amplitude: float = 1.0, rate: float = 1.0,
                           grid: Optional[RadialGrid] = None) -> FormFactor:
    grid = grid or make_radial_grid()
    fn = lambda r: amplitude * np.exp(-rate * r)
    return make_formfactor(SampledFunction.from_callable(fn, grid, TailModel.exponential(rate),
                                                         monotone=amplitude >= 0), "exponential")


def tent_formfactor(strength: float = 1.0, cutoff: float = 1.0,
                    grid: Optional[RadialGrid] = None) -> FormFactor:
    """strength * (cutoff - r)+, kinked at the cutoff"""
    grid = grid or make_radial_grid(breakpoints=[cutoff])
    fn = lambda r: strength * np.maximum(cutoff - np.asarray(r, dtype=float), 0.0)
    profile = SampledFunction.from_callable(fn, grid, TailModel.compact(cutoff), monotone=True)
    return make_formfactor(profile, "tent", sites=[cutoff])


def exp_times_poly_formfactor(amplitude: float, rate: float, slope: float,
                              grid: Optional[RadialGrid] = None) -> FormFactor:
    """amplitude * e^{-rate r} (1 - slope r); sine transform vanishes at sqrt(2 rate slope - rate^2)"""
    grid = grid or make_radial_grid()
    fn = lambda r: amplitude * np.exp(-rate * r) * (1.0 - slope * r)
    return make_formfactor(SampledFunction.from_callable(fn, grid, TailModel.exponential(rate)),
                           "exp_times_poly")


def tabulated_formfactor(radii: Sequence[float], values: Sequence[float],
                         grid: Optional[RadialGrid] = None) -> FormFactor:
    radii = np.asarray(radii, dtype=float)
    values = np.asarray(values, dtype=float)
    if radii.shape != values.shape or radii.size < 4:
        raise ValidationError("tabulated form factor needs at least 4 aligned (r, U) samples")
    source = SampledFunction(RadialGrid(radii), values, TailModel())
    last = float(radii[-1])
    grid = grid or make_radial_grid()
    fn = lambda r: np.where(np.asarray(r) <= last, source(np.minimum(r, last)), 0.0)
    profile = SampledFunction.from_callable(fn, grid, TailModel.compact(min(last, grid.r_max)))
    return make_formfactor(profile, "tabulated")


# ---------- Source families ----------

def exponential_source(amplitude: float = 1.0, rate: float = 1.0,
                       grid: Optional[RadialGrid] = None) -> SampledFunction:
    grid = grid or make_radial_grid()
    return SampledFunction.from_callable(lambda t: amplitude * np.exp(-rate * t), grid,
                                         TailModel.exponential(rate))


def power_law_source(amplitude: float = 1.0, shift: float = 1.0, power: float = 4.0,
                     grid: Optional[RadialGrid] = None) -> SampledFunction:
    """amplitude * (t + shift)^-power"""
    grid = grid or make_radial_grid()
    return SampledFunction.from_callable(lambda t: amplitude * (t + shift) ** (-power), grid,
                                         TailModel.algebraic(power))


def singular_exponential_source(amplitude: float = 1.0, power: float = 2.5,
                                grid: Optional[RadialGrid] = None) -> SampledFunction:
    """amplitude * t^-power e^{-t}, singular at the origin"""
    grid = grid or make_radial_grid()
    return SampledFunction.from_callable(lambda t: amplitude * t ** (-power) * np.exp(-t), grid,
                                         TailModel.exponential(1.0))


def tabulated_source(radii: Sequence[float], values: Sequence[float],
                     grid: Optional[RadialGrid] = None) -> SampledFunction:
    radii = np.asarray(radii, dtype=float)
    values = np.asarray(values, dtype=float)
    if np.any(values < 0):
        raise ValidationError("source g must be non-negative")
    source = SampledFunction(RadialGrid(radii), values, TailModel(), monotone=True)
    last = float(radii[-1])
    grid = grid or make_radial_grid()
    fn = lambda t: np.where(np.asarray(t) <= last, np.maximum(source(np.minimum(t, last)), 0.0), 0.0)
    return SampledFunction.from_callable(fn, grid, TailModel.compact(min(last, grid.r_max)))


# ---------- Source integrability ----------

def _source_exponents(g: SampledFunction) -> Tuple[float, float]:
    """(exponent at the origin, decay power at infinity) of g"""
    exps = decay_exponents(g.grid.nodes, g.values)
    if g.tail.kind in ("exponential", "compact"):
        at_inf = np.inf
    elif g.tail.kind == "algebraic":
        at_inf = g.tail.parameter
    else:
        at_inf = exps.infinity
    return exps.origin, at_inf


def source_moment_flags(src: SourceFunction) -> Dict[str, bool]:
    """t^m g integrable near 0 and at infinity, for the moments used by the ledger"""
    if src.smooth is None or not np.any(src.smooth.values):
        return {f"t{m}g_L1_near_0": True for m in (1, 2)} | {f"t{m}g_L1_at_inf": True for m in range(4)}
    origin, at_inf = _source_exponents(src.smooth)
    flags = {}
    for m in (1, 2):
        flags[f"t{m}g_L1_near_0"] = bool(origin + m > -1.0 + DECAY_MARGIN)
    for m in range(4):
        flags[f"t{m}g_L1_at_inf"] = bool(at_inf - m > 1.0 + DECAY_MARGIN)
    return flags


def check_source(src: SourceFunction) -> Dict[str, bool]:
    """r^2 g integrable on (0,1) and r g integrable on (1, inf)"""
    flags = source_moment_flags(src)
    conditions = {"r2g_L1_near_0": flags["t2g_L1_near_0"], "rg_L1_at_inf": flags["t1g_L1_at_inf"]}
    return conditions


def integrability_ledger(src: SourceFunction) -> Dict[str, Dict[str, bool]]:
    """Predicted integrability of the built U from the moments of g

    beyond the support of V the bracket reduces to t - r, so
    U(r) ~ int_r^inf (t - r) g(t) dt, which gives the "implemented"
    mapping; "printed" is the mapping one power of t lower at infinity.
    """
    m = source_moment_flags(src)
    implemented = {
        "vanishing_at_infinity": m["t1g_L1_at_inf"],
        "L1_at_inf": m["t2g_L1_at_inf"],
        "rU_L1_at_inf": m["t3g_L1_at_inf"],
        "L1_near_0": m["t2g_L1_near_0"],
    }
    printed = {
        "vanishing_at_infinity": m["t0g_L1_at_inf"],
        "L1_at_inf": m["t1g_L1_at_inf"],
        "rU_L1_at_inf": m["t2g_L1_at_inf"],
        "L1_near_0": m["t2g_L1_near_0"],
    }
    return {"implemented": implemented, "printed": printed}


def measured_integrability(U: FormFactor) -> Dict[str, bool]:
    """Integrability of U measured from its samples alone (the tail model is ignored)"""
    bare = SampledFunction(U.grid, U.profile.values, TailModel())
    flags = l1_flags(bare)
    return {
        "vanishing_at_infinity": flags["vanishing_at_infinity"],
        "L1_at_inf": flags["L1_at_inf"],
        "rU_L1_at_inf": flags["rU_L1_at_inf"],
        "L1_near_0": flags["L1_near_0"],
    }


# ---------- Construction ----------

def _tail_moments(pair: ZeroEnergyPair, g: SampledFunction, R: float) -> Tuple[float, float]:
    """(int_R^inf phi0 g, int_R^inf chi0 g) using phi0 = A t + B, chi0 = 1/A beyond R"""
    if g.tail.kind == "compact" or (g.tail.kind == "none") or not np.any(g.values):
        return 0.0, 0.0
    gt = lambda t: float(g(np.array([t]))[0])
    first, _ = integrate.quad(lambda t: (pair.A * t + pair.B) * gt(t), R, np.inf, limit=200)
    zeroth, _ = integrate.quad(gt, R, np.inf, limit=200)
    return first, zeroth / pair.A


def _built_tail(src: SourceFunction, grid: RadialGrid) -> TailModel:
    g = src.smooth
    if g is None or not np.any(g.values) or g.tail.kind == "compact":
        reach = max(src.sites + ([g.tail.parameter] if g is not None and g.tail.kind == "compact" else [0.0]))
        if reach < grid.r_max:
            return TailModel.compact(reach)
        return TailModel()
    if g.tail.kind == "exponential":
        return TailModel.exponential(g.tail.parameter)
    if g.tail.kind == "algebraic" and g.tail.parameter > 2.0:
        return TailModel.algebraic(g.tail.parameter - 2.0)
    return TailModel()


def _delta_terms(pair: ZeroEnergyPair, src: SourceFunction, r: np.ndarray) -> np.ndarray:
    phi0, chi0 = pair.phi0(r), pair.chi0(r)
    total = np.zeros_like(r)
    for lam, r0 in src.deltas:
        p0 = float(pair.phi0(np.array([r0]))[0])
        c0 = float(pair.chi0(np.array([r0]))[0])
        total += lam * np.where(r < r0, chi0 * p0 - phi0 * c0, 0.0)
    return total


def build_from_source(pair: ZeroEnergyPair, src: SourceFunction,
                      numerics: Numerics = DEFAULT_NUMERICS) -> FormFactor:
    """U(r) = int_r^inf [chi0(r) phi0(t) - phi0(r) chi0(t)] g(t) dt plus the delta terms"""
    conditions = check_source(src)
    if not all(conditions.values()):
        failed = ", ".join(k for k, ok in conditions.items() if not ok)
        raise SourceIntegrabilityViolation(f"source fails integrability conditions: {failed}")
    grid = pair.phi0.grid
    r = grid.nodes
    phi0, chi0 = pair.phi0.values, pair.chi0.values
    values = np.zeros_like(r)
    if src.smooth is not None and np.any(src.smooth.values):
        g = src.smooth
        p_tail, q_tail = _tail_moments(pair, g, grid.r_max)
        P = cumulative_from_infinity(lambda t: pair.phi0(t) * g(t), grid, p_tail)
        Q = cumulative_from_infinity(lambda t: pair.chi0(t) * g(t), grid, q_tail)
        values += chi0 * P - phi0 * Q
    values += _delta_terms(pair, src, r)
    for site in src.sites:
        if not np.any(np.isclose(r, site, rtol=1e-9, atol=0.0)):
            logger.warning("delta site r=%g is not a grid node; the kink in U is smoothed", site)

    scale = float(np.max(np.abs(values))) if values.size else 0.0
    if scale == 0.0:
        logger.warning("source is identically zero; built form factor vanishes")
    elif np.min(values) < -numerics.flag_tolerance * scale:
        raise NonPositiveResult(f"built form factor reached {np.min(values):.3e}")
    values = np.maximum(values, 0.0)
    tail = _built_tail(src, grid)
    if tail.kind == "compact":
        values = np.where(r > tail.parameter, 0.0, values)
    elif tail.kind in ("exponential", "algebraic"):
        tail = tail.with_amplitude(float(values[-1]))
    profile = SampledFunction(grid, values, tail, monotone=True)
    regularity = measure_regularity(profile, src.sites, numerics.flag_tolerance)
    for flag in ("decreasing", "convex", "vanishing_at_infinity"):
        if scale and not regularity[flag]:
            logger.warning("built form factor is not %s on the grid", flag)
    return FormFactor(profile, "built", src, regularity, "built_from_source")


def _reverse_cumulative(y: np.ndarray, x: np.ndarray) -> np.ndarray:
    return -cumulative_simpson(y[::-1], x=x[::-1], initial=0.0)[::-1]


def build_from_source_nested(pair: ZeroEnergyPair, src: SourceFunction) -> np.ndarray:
    """Nested form phi0(r) int_r^inf phi0(t) g(t) int_r^t du/phi0(u)^2 dt on the grid

    Uses Simpson cumulative sums on the nodes, independent of the
    Gauss-Legendre route of build_from_source.
    """
    grid = pair.phi0.grid
    r = grid.nodes
    R = grid.r_max
    phi0 = pair.phi0.values
    A, B = pair.A, pair.B
    J = _reverse_cumulative(1.0 / phi0 ** 2, r) + 1.0 / (A * (A * R + B))
    values = np.zeros_like(r)
    if src.smooth is not None and np.any(src.smooth.values):
        g = src.smooth.values
        p_tail, q_tail = _tail_moments(pair, src.smooth, R)
        P = _reverse_cumulative(phi0 * g, r) + p_tail
        M = _reverse_cumulative(phi0 * g * J, r) + q_tail
        values += phi0 * (J * P - M)
    for lam, r0 in src.deltas:
        i0 = int(np.argmin(np.abs(r - r0)))
        values += lam * np.where(r < r0, phi0 * phi0[i0] * (J - J[i0]), 0.0)
    return values


def origin_value(pair: ZeroEnergyPair, src: SourceFunction) -> float:
    """U(0) = int phi0 g dt plus lambda phi0(r_i) for each delta"""
    total = sum(lam * float(pair.phi0(np.array([r0]))[0]) for lam, r0 in src.deltas)
    if src.smooth is not None and np.any(src.smooth.values):
        p_tail, _ = _tail_moments(pair, src.smooth, pair.phi0.grid.r_max)
        head = cumulative_from_infinity(lambda t: pair.phi0(t) * src.smooth(t), pair.phi0.grid, p_tail)[0]
        total += float(head)
    return total


def asymptotic_estimate(src: SourceFunction, r: float) -> float:
    """int_r^inf (t - r) g(t) dt, the large-r form of the built U"""
    if src.smooth is None:
        return 0.0
    g = src.smooth
    value, _ = integrate.quad(lambda t: (t - r) * float(g(np.array([t]))[0]), r, np.inf, limit=200)
    return value


def verify_ode_identity(U: FormFactor, V: LocalPotential, src: SourceFunction,
                        tolerance: Optional[float] = None,
                        numerics: Numerics = DEFAULT_NUMERICS) -> ResidualReport:
    """max |U'' - V U - g| on the uniform part of the grid, away from delta sites"""
    tolerance = numerics.residual_tolerance if tolerance is None else tolerance
    grid = U.grid
    r = grid.nodes
    u = U.profile.values
    upp = second_difference(r, u)
    residual = upp - V(r) * u - src.g(r)
    region = uniform_run_mask(r)
    if src.sites:
        region &= ~kink_mask(grid, src.sites)
    if not np.any(region):
        raise ResidualTooLarge("no uniform region to check the identity on")
    masked = np.where(region, np.abs(residual), 0.0)
    i = int(np.argmax(masked))
    report = ResidualReport(float(masked[i]), float(r[i]), tolerance, int(region.sum()))
    logger.debug("ODE identity residual %.2e at r=%.4g over %d nodes", report.max_residual,
                 report.location, report.nodes_checked)
    if report.max_residual > tolerance:
        raise ResidualTooLarge(f"U'' - V U - g reaches {report.max_residual:.2e} at r={report.location:.4g}")
    return report
