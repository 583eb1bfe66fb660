"""Detector Module - Embedded bound state detection and certificates
Dispersion function D(k), zeros of the form factor transform, simultaneous
roots, the cosine representation of the principal-value integral and the
certificates of absence for decreasing and source-built form factors

Copyright (C) 2025 Embedded State Detector Contributors
This file is licensed under the GNU General Public License v3.0
See LICENSE or https://www.gnu.org/licenses/gpl-3.0.txt for details.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq, minimize_scalar

from .config import DEFAULT_NUMERICS, Numerics
from .errors import IdentityMismatch, RecoveryFailed, ToleranceNotMet, ValidationError
from .formfactor_builder import (FormFactor, SourceFunction, check_source,
                                 exp_times_poly_formfactor, measure_regularity)
from .grids_quadrature import (DECAY_MARGIN, RadialGrid, SampledFunction, TailModel,
                               decay_exponents, integrate_oscillatory_batch, integrate_semi_infinite,
                               l1_flags, principal_value, second_difference, shape_flags,
                               uniform_run_mask)
from .local_potential import JostModulus, LocalPotential, jost_modulus, weighted_transform
from .logging_config import get_logger
from .special_transforms import (TransformTable, autocorrelation, cosine_transform,
                                 omega_convolution, signed_split, sine_transform, tail_function)

logger = get_logger(__name__)

SCAN_POINTS = 400
DENSE_LIMIT = 10.0
WEIGHTED_STEP_FACTOR = 5
RECOVERY_FLOOR = 1e-3


# ---------- Report types ----------

@dataclass(frozen=True, eq=False)
class DispersionCurve:
    epsilon: float
    momenta: np.ndarray
    values: np.ndarray
    weight: JostModulus

    def ceiling_gap(self, start_fraction: float = 0.75) -> float:
        """max |D - epsilon| over the top of the scan"""
        top = self.momenta >= start_fraction * self.momenta[-1]
        return float(np.max(np.abs(self.values[top] - self.epsilon)))


@dataclass(frozen=True)
class FormFactorZero:
    k: float
    bracket: Tuple[float, float]
    transform_value: float
    double: bool = False


@dataclass(frozen=True)
class EmbeddedState:
    k: float
    energy: float
    dispersion_value: float
    transform_value: float


@dataclass(frozen=True)
class Certificate:
    theorem: str
    passed: bool
    conditions: Dict[str, bool] = field(default_factory=dict)
    reasons: Tuple[str, ...] = ()
    details: Dict[str, Any] = field(default_factory=dict)
    degenerate: bool = False

    def as_dict(self) -> Dict[str, Any]:
        return {
            "theorem": self.theorem,
            "passed": self.passed,
            "degenerate": self.degenerate,
            "conditions": dict(self.conditions),
            "reasons": list(self.reasons),
            "details": dict(self.details),
        }


@dataclass(frozen=True, eq=False)
class DetectionReport:
    epsilon: float
    zeros: List[FormFactorZero]
    dispersion_at_zeros: List[float]
    embedded: List[EmbeddedState]
    certificates: List[Certificate]
    curve: DispersionCurve
    transform: TransformTable
    ceiling: float
    consistent: bool = True

    @property
    def has_embedded_state(self) -> bool:
        return bool(self.embedded)

    def as_dict(self) -> Dict[str, Any]:
        return {
            "epsilon": self.epsilon,
            "scan_ceiling": self.ceiling,
            "ceiling_gap": self.curve.ceiling_gap(),
            "zeros": [
                {"k": z.k, "bracket": list(z.bracket), "U_tilde": z.transform_value,
                 "double": z.double, "D": d}
                for z, d in zip(self.zeros, self.dispersion_at_zeros)
            ],
            "embedded_states": [
                {"k": s.k, "energy": s.energy, "D": s.dispersion_value, "U_tilde": s.transform_value}
                for s in self.embedded
            ],
            "certificates": [c.as_dict() for c in self.certificates],
            "consistent": self.consistent,
        }


@dataclass(frozen=True, eq=False)
class CosineRepresentation:
    omega: SampledFunction
    momenta: np.ndarray
    direct: np.ndarray
    parseval: np.ndarray
    omega_route: np.ndarray
    printed_product: np.ndarray
    omega_l1: float

    @property
    def normalization(self) -> float:
        """Least-squares constant c with direct = c * omega_route"""
        denom = float(np.dot(self.omega_route, self.omega_route))
        return float(np.dot(self.direct, self.omega_route) / denom) if denom else 1.0

    def as_dict(self) -> Dict[str, Any]:
        return {
            "momenta": self.momenta.tolist(),
            "direct": self.direct.tolist(),
            "parseval": self.parseval.tolist(),
            "omega_route": self.omega_route.tolist(),
            "printed_product": self.printed_product.tolist(),
            "normalization": self.normalization,
            "omega_l1": self.omega_l1,
        }


# ---------- Momentum grids and transforms ----------

def momentum_grid(k_max: float, numerics: Numerics = DEFAULT_NUMERICS, weighted: bool = False) -> np.ndarray:
    """Positive momenta: fine up to 10, coarser up to k_max, geometric to the p ceiling"""
    step = numerics.momentum_step * (WEIGHTED_STEP_FACTOR if weighted else 1)
    p_max = numerics.p_ceiling_factor * k_max
    fine = np.arange(step, min(DENSE_LIMIT, k_max) + 0.5 * step, step)
    pieces = [fine]
    if k_max > fine[-1]:
        coarse = 5.0 * step
        pieces.append(np.arange(fine[-1] + coarse, k_max + 0.5 * coarse, coarse))
    pieces.append(np.geomspace(k_max, p_max, 60)[1:])
    return np.unique(np.concatenate(pieces))


def _is_free(V: Optional[LocalPotential]) -> bool:
    return V is None or V.is_free


def transform_table(U: FormFactor, V: Optional[LocalPotential], momenta: Sequence[float],
                    numerics: Numerics = DEFAULT_NUMERICS) -> TransformTable:
    """Sine transform without a local potential, the phi-weighted transform with one"""
    if _is_free(V):
        return sine_transform(U.profile, momenta, numerics.quad_tolerance)
    return weighted_transform(U.profile, V, momenta, numerics)


def transform_evaluator(U: FormFactor, V: Optional[LocalPotential],
                        numerics: Numerics = DEFAULT_NUMERICS) -> Callable[[float], float]:
    """U~ at a single momentum, computed afresh rather than interpolated"""
    if _is_free(V):
        return lambda k: integrate_semi_infinite(U.profile, "sin", k, tolerance=numerics.quad_tolerance) / k
    return lambda k: float(weighted_transform(U.profile, V, [k], numerics).values[0])


def unit_weight(momenta: Sequence[float]) -> JostModulus:
    momenta = np.asarray(momenta, dtype=float)
    return JostModulus(momenta, np.ones_like(momenta))


def dispersion_integrand(table: TransformTable, weight: JostModulus) -> SampledFunction:
    """h(p) = p^2 U~(p)^2 / |F(p)|^2 with an inverse-square tail"""
    keep = table.momenta > 0
    p = table.momenta[keep]
    if not np.array_equal(weight.momenta[weight.momenta > 0], p):
        raise ValidationError("transform and Jost modulus must share momenta")
    values = p ** 2 * table.values[keep] ** 2 / weight.values[weight.momenta > 0]
    return SampledFunction(RadialGrid(p), values, TailModel.algebraic(2.0, float(values[-1])))


def dispersion_value(h: SampledFunction, epsilon: float, k: float,
                     numerics: Numerics = DEFAULT_NUMERICS) -> float:
    """D(k) = epsilon + (2/pi) P-integral of h(p)/(p^2 - k^2)"""
    p_max = h.grid.r_max
    delta = min(numerics.pv_delta, 0.5 * k, 0.5 * (p_max - k))
    if not np.any(h.values):
        return float(epsilon)
    return float(epsilon + 2.0 / np.pi * principal_value(h, k, delta, numerics.pv_tolerance))


def dispersion(table: TransformTable, weight: JostModulus, epsilon: float, momenta: Sequence[float],
               numerics: Numerics = DEFAULT_NUMERICS) -> DispersionCurve:
    momenta = np.asarray(momenta, dtype=float)
    h = dispersion_integrand(table, weight)
    values = np.array([dispersion_value(h, epsilon, k, numerics) for k in momenta])
    return DispersionCurve(float(epsilon), momenta, values, weight)


# ---------- Zeros ----------

def find_zeros(table: TransformTable, k_range: Optional[Tuple[float, float]] = None,
               evaluator: Optional[Callable[[float], float]] = None,
               root_tolerance: float = 1e-8) -> List[FormFactorZero]:
    """Simple zeros from sign changes and exact zeros on nodes, double zeros from touching minima of |U~|"""
    keep = table.momenta > 0
    if k_range is not None:
        keep &= (table.momenta >= k_range[0]) & (table.momenta <= k_range[1])
    p = table.momenta[keep]
    v = table.values[keep]
    scale = float(np.max(np.abs(table.values))) if table.values.size else 0.0
    if scale == 0.0 or p.size < 3:
        return []
    if evaluator is None:
        spline = CubicSpline(p, v)
        evaluator = lambda k: float(spline(k))
    floor = root_tolerance * scale
    zeros: List[FormFactorZero] = []
    for i in np.nonzero(v[:-1] * v[1:] < 0.0)[0]:
        a, b = float(p[i]), float(p[i + 1])
        k = brentq(evaluator, a, b, xtol=1e-13, rtol=4 * np.finfo(float).eps)
        zeros.append(FormFactorZero(k, (a, b), evaluator(k)))
    last = v.size - 1
    for i in np.nonzero(v == 0.0)[0]:
        left = v[i - 1] if i > 0 else 0.0
        right = v[i + 1] if i < last else 0.0
        if left * right > 0.0:
            continue  # touching, handled below
        zeros.append(FormFactorZero(float(p[i]), (float(p[max(i - 1, 0)]), float(p[min(i + 1, last)])), 0.0))
    mag = np.abs(v)
    touching = np.nonzero((mag[1:-1] <= mag[:-2]) & (mag[1:-1] <= mag[2:])
                          & (v[:-2] * v[2:] > 0.0) & (mag[1:-1] < 1e-3 * scale))[0] + 1
    for i in touching:
        a, b = float(p[i - 1]), float(p[i + 1])
        best = minimize_scalar(lambda k: abs(evaluator(k)), bounds=(a, b), method="bounded",
                               options={"xatol": 1e-12})
        if abs(best.fun) < floor and not any(a <= z.k <= b for z in zeros):
            zeros.append(FormFactorZero(float(best.x), (a, b), evaluator(float(best.x)), True))
    zeros.sort(key=lambda z: z.k)
    logger.debug("found %d zeros of the transform in [%.3g, %.3g]", len(zeros), p[0], p[-1])
    return zeros


# ---------- Certificates ----------

def _degenerate(theorem: str) -> Certificate:
    logger.warning("form factor vanishes identically; certificate %s passes vacuously", theorem)
    return Certificate(theorem, True, {}, ("form factor vanishes identically",), {}, degenerate=True)


def certify_theorem_A(U: FormFactor, tolerance: float = 1e-9) -> Certificate:
    """Strictly decreasing positive U with U in L1(0,1) and r U in L1(1, inf)"""
    values = U.profile.values
    if not np.any(values):
        return _degenerate("A")
    shapes = shape_flags(U.grid.nodes, values, tolerance)
    flags = l1_flags(U.profile)
    conditions = {
        "positive": shapes.positive,
        "strictly_decreasing": shapes.strictly_decreasing,
        "L1_near_0": flags["L1_near_0"],
        "rU_L1_at_inf": flags["rU_L1_at_inf"],
    }
    reasons = tuple(f"{name} fails" for name, ok in conditions.items() if not ok)
    return Certificate("A", all(conditions.values()), conditions, reasons)


def recover_source(U: FormFactor, V: LocalPotential, floor: float = RECOVERY_FLOOR) -> SampledFunction:
    """g = U'' - V U on the nodes r >= floor

    The spline second derivative is compared with divided differences on
    the uniform part of the grid; disagreement means U'' is not stable.
    """
    r = U.grid.nodes
    u = U.profile.values
    spline = CubicSpline(r, u)(r, 2)
    direct = second_difference(r, u)
    uniform = uniform_run_mask(r)
    scale = float(np.max(np.abs(spline[uniform]))) if np.any(uniform) else 0.0
    if not np.all(np.isfinite(spline)):
        raise RecoveryFailed("second derivative of U is not finite")
    if np.any(uniform) and np.max(np.abs(spline[uniform] - direct[uniform])) > 1e-3 * scale + 1e-8:
        raise RecoveryFailed("spline and divided-difference second derivatives of U disagree")
    keep = r >= floor
    grid = RadialGrid(r[keep])
    g = spline[keep] - V(r[keep]) * u[keep]
    return SampledFunction(grid, g, TailModel())


def certify_theorem_B(U: FormFactor, V: LocalPotential, source: Optional[SourceFunction] = None,
                      numerics: Numerics = DEFAULT_NUMERICS) -> Certificate:
    """U generated by a positive source g through U'' - V U = g"""
    if not np.any(U.profile.values):
        return _degenerate("B")
    src = source if source is not None else (U.source if U.provenance == "built" else None)
    if src is not None:
        conditions = {"source_nonnegative": True, **check_source(src)}
        reasons = tuple(f"{name} fails" for name, ok in conditions.items() if not ok)
        return Certificate("B", all(conditions.values()), conditions, reasons, {"route": "source"})

    g = recover_source(U, V)
    scale = float(np.max(np.abs(g.values)))
    worst = float(np.min(g.values))
    exps = decay_exponents(g.grid.nodes, g.values)
    conditions = {
        "source_nonnegative": worst >= -numerics.residual_tolerance * max(scale, 1.0),
        "r2g_L1_near_0": bool(exps.origin + 2.0 > -1.0 + DECAY_MARGIN),
        "rg_L1_at_inf": bool(exps.infinity - 1.0 > 1.0 + DECAY_MARGIN),
    }
    reasons = []
    if not conditions["source_nonnegative"]:
        at = float(g.grid.nodes[int(np.argmin(g.values))])
        reasons.append(f"recovered g reaches {worst:.3e} at r={at:.4g}")
    reasons.extend(f"{name} fails" for name in ("r2g_L1_near_0", "rg_L1_at_inf") if not conditions[name])
    details = {"route": "recovered", "min_g": worst, "recovery_floor": RECOVERY_FLOOR}
    return Certificate("B", all(conditions.values()), conditions, tuple(reasons), details)


# ---------- Detection ----------

def _check_epsilon(epsilon: float) -> float:
    if epsilon not in (1, -1):
        raise ValidationError(f"epsilon must be +1 or -1, got {epsilon!r}")
    return float(epsilon)


def _scan(U: FormFactor, V: Optional[LocalPotential], epsilon: float, numerics: Numerics):
    """Transform, weight and dispersion curve with the ceiling doubled until D settles to epsilon"""
    k_max = numerics.k_max
    weighted = not _is_free(V)
    while True:
        momenta = momentum_grid(k_max, numerics, weighted)
        table = transform_table(U, V, momenta, numerics)
        weight = jost_modulus(V, momenta, numerics) if weighted else unit_weight(momenta)
        scan = np.linspace(2.0 * numerics.pv_delta, k_max, SCAN_POINTS)
        curve = dispersion(table, weight, epsilon, scan, numerics)
        gap = curve.ceiling_gap()
        logger.info("scan to k=%g: max |D - epsilon| near the ceiling = %.3e", k_max, gap)
        if gap <= numerics.ceiling_tolerance:
            return k_max, table, weight, curve
        if 2.0 * k_max > numerics.k_limit:
            raise ToleranceNotMet(f"|D - epsilon| = {gap:.3e} still above "
                                  f"{numerics.ceiling_tolerance} at k={k_max:g}")
        k_max *= 2.0


def detect(U: FormFactor, V: Optional[LocalPotential] = None, epsilon: float = 1.0,
           numerics: Numerics = DEFAULT_NUMERICS) -> DetectionReport:
    """Simultaneous roots of U~(k) = 0 and D(k) = 0"""
    epsilon = _check_epsilon(epsilon)
    k_max, table, weight, curve = _scan(U, V, epsilon, numerics)
    evaluator = transform_evaluator(U, V, numerics)
    zeros = find_zeros(table, (table.momenta[0], k_max), evaluator, numerics.root_tolerance)
    h = dispersion_integrand(table, weight)
    d_values = [dispersion_value(h, epsilon, z.k, numerics) for z in zeros]
    match = numerics.match_tolerance * (1.0 + abs(epsilon))
    embedded = [EmbeddedState(z.k, z.k ** 2, d, z.transform_value)
                for z, d in zip(zeros, d_values) if abs(d) < match]

    if _is_free(V):
        certificates = [certify_theorem_A(U, numerics.flag_tolerance)]
    else:
        certificates = [certify_theorem_B(U, V, numerics=numerics)]
    consistent = not (embedded and any(c.passed for c in certificates))
    if not consistent:
        logger.error("certificate passed but %d embedded states were found", len(embedded))
    for state in embedded:
        logger.info("embedded state at k=%.10f (D=%.2e)", state.k, state.dispersion_value)
    return DetectionReport(epsilon, zeros, d_values, embedded, certificates, curve, table, k_max, consistent)


def scale_formfactor(U: FormFactor, c: float) -> FormFactor:
    """c U, which scales U~ by c and D - epsilon by c^2"""
    profile = U.profile.scaled(c)
    sites = U.source.sites if U.source is not None else ()
    return FormFactor(profile, U.provenance if c > 0 else "user", U.source if c > 0 else None,
                      measure_regularity(profile, sites), U.name)


def engineer_embedded_state(k0: float = 1.0, rate: float = 2.0, epsilon: float = -1.0,
                            numerics: Numerics = DEFAULT_NUMERICS,
                            grid: Optional[RadialGrid] = None) -> Tuple[FormFactor, float]:
    """U = A e^{-ar}(1 - br) with U~(k0) = 0 and D(k0) = 0

    b = (k0^2 + a^2)/(2a) places the zero; D - epsilon is quadratic in A,
    so A follows from one dispersion evaluation at A = 1.
    """
    epsilon = _check_epsilon(epsilon)
    slope = (k0 ** 2 + rate ** 2) / (2.0 * rate)
    unit = exp_times_poly_formfactor(1.0, rate, slope, grid or numerics.radial_grid())
    momenta = momentum_grid(numerics.k_max, numerics)
    h = dispersion_integrand(transform_table(unit, None, momenta, numerics), unit_weight(momenta))
    integral = dispersion_value(h, epsilon, k0, numerics) - epsilon
    if integral == 0.0 or -epsilon / integral <= 0.0:
        raise ValidationError(f"no real amplitude puts D({k0:g}) at zero (integral {integral:.3e})")
    amplitude = float(np.sqrt(-epsilon / integral))
    logger.info("engineered form factor: rate=%g slope=%g amplitude=%.12g", rate, slope, amplitude)
    return exp_times_poly_formfactor(amplitude, rate, slope, unit.grid), amplitude


# ---------- Cosine representation ----------

def _square(f: SampledFunction) -> SampledFunction:
    tail = f.tail
    if tail.kind == "exponential":
        tail = TailModel.exponential(2.0 * tail.parameter, tail.amplitude ** 2)
    elif tail.kind == "algebraic":
        tail = TailModel.algebraic(2.0 * tail.parameter, tail.amplitude ** 2)
    return SampledFunction(f.grid, f.values ** 2, tail)


def cosine_representation(U: FormFactor, momenta: Sequence[float] = (0.5, 1.0, 2.0),
                          numerics: Numerics = DEFAULT_NUMERICS,
                          tolerance: Optional[float] = None) -> CosineRepresentation:
    """G(k) three ways: direct P-integral, Parseval route and cosine transform of omega"""
    tolerance = numerics.identity_tolerance if tolerance is None else tolerance
    momenta = np.asarray(momenta, dtype=float)
    profile = U.profile
    grid_p = momentum_grid(numerics.k_max, numerics)
    h = dispersion_integrand(sine_transform(profile, grid_p, numerics.quad_tolerance), unit_weight(grid_p))
    direct = np.array([0.5 * np.pi * (dispersion_value(h, 0.0, k, numerics)) for k in momenta])

    split = signed_split(profile)
    omega = omega_convolution(split)
    omega_route = cosine_transform(omega, momenta, numerics.quad_tolerance, check_positivity=False).values
    omega_l1 = integrate_semi_infinite(SampledFunction(omega.grid, np.abs(omega.values), TailModel()))

    W = tail_function(profile)
    Omega = autocorrelation(W, kinks=split.roots)
    w2 = integrate_semi_infinite(_square(W))
    sine_part = integrate_oscillatory_batch(Omega, momenta, "sin", tolerance=numerics.quad_tolerance)
    parseval = 0.5 * np.pi * w2 - 0.5 * np.pi * momenta * sine_part

    U_c = cosine_transform(profile, momenta, numerics.quad_tolerance, check_positivity=False).values
    W_c = cosine_transform(W, momenta, numerics.quad_tolerance, check_positivity=False).values
    printed = 0.5 * np.pi * U_c * W_c

    rep = CosineRepresentation(omega, momenta, direct, parseval, omega_route, printed, float(omega_l1))
    scale = max(1.0, float(np.max(np.abs(direct))))
    for name, other in (("Parseval route", parseval), ("omega route", omega_route)):
        gap = float(np.max(np.abs(direct - other)))
        if gap > tolerance * scale:
            raise IdentityMismatch(f"direct P-integral and {name} differ by {gap:.3e}")
    gap = float(np.max(np.abs(parseval - omega_route)))
    if gap > tolerance * scale:
        raise IdentityMismatch(f"Parseval route and omega route differ by {gap:.3e}")
    if not np.isfinite(omega_l1):
        raise IdentityMismatch("omega is not absolutely integrable")
    logger.debug("cosine representation: normalization %.8f, omega L1 %.4e", rep.normalization, omega_l1)
    return rep
