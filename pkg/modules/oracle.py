"""Oracle Module - Independent spectral check of embedded states
Box discretization of the full Hamiltonian -d2/dr2 + V + eps |U><U|,
the box-ladder scan for a stable localized level and the standing-wave
Green's-function candidate wavefunction

Copyright (C) 2025 Embedded State Detector Contributors
This file is licensed under the GNU General Public License v3.0
See LICENSE or https://www.gnu.org/licenses/gpl-3.0.txt for details.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Dict, List, Optional

import numpy as np
from scipy import linalg

from .config import DEFAULT_NUMERICS, Numerics
from .errors import AmbiguousScan, ResolutionTooLow, TailNotDecaying, ValidationError
from .formfactor_builder import FormFactor
from .grids_quadrature import (SampledFunction, TailModel, cumulative_from_infinity,
                               cumulative_from_origin, integrate_semi_infinite, second_difference,
                               trapezoid_weights, trig_tail_integrals, uniform_run_mask)
from .local_potential import LocalPotential
from .logging_config import get_logger

logger = get_logger(__name__)

SUPPORT_FRACTION = 1e-4
SUPPORT_MULTIPLE = 4.0
WAVELENGTH_POINTS = 20.0
CANDIDATE_SUPPORT_MULTIPLE = 5.0


@dataclass(frozen=True, eq=False)
class BoxHamiltonian:
    length: float
    radii: np.ndarray
    matrix: np.ndarray
    epsilon: float

    @property
    def n(self) -> int:
        return self.radii.size

    @property
    def step(self) -> float:
        return self.length / (self.n + 1)


@dataclass(frozen=True)
class BoxLevel:
    length: float
    eigenvalue: float
    tail_mass: float
    participation: float
    residual: float


@dataclass(frozen=True, eq=False)
class SpectralScan:
    k0: float
    window: float
    support: float
    levels: List[BoxLevel]
    drift: float
    continuum_shift: float
    verdict: str

    @property
    def confirmed(self) -> bool:
        return self.verdict == "confirmed"

    def as_dict(self) -> Dict[str, Any]:
        return {
            "k0": self.k0,
            "window": self.window,
            "support": self.support,
            "drift": self.drift,
            "continuum_shift": self.continuum_shift,
            "verdict": self.verdict,
            "levels": [level.__dict__ for level in self.levels],
        }


@dataclass(frozen=True, eq=False)
class CandidateWavefunction:
    psi: SampledFunction
    k0: float
    tail_mass: float
    residual: float
    self_consistency: float
    consistent: bool = True


def effective_support(profile: SampledFunction, fraction: float = SUPPORT_FRACTION) -> float:
    """Largest node where |f| reaches fraction * max|f|"""
    mag = np.abs(profile.values)
    if not np.any(mag):
        return 0.0
    above = np.nonzero(mag >= fraction * np.max(mag))[0]
    return float(profile.grid.nodes[above[-1]])


def _kinetic(n: int, h: float) -> np.ndarray:
    """Five-point -d2/dr2 with odd reflection at both Dirichlet ends"""
    main = np.full(n, 30.0)
    main[0] = main[-1] = 29.0
    T = np.diag(main) + np.diag(np.full(n - 1, -16.0), 1) + np.diag(np.full(n - 1, -16.0), -1)
    T += np.diag(np.ones(n - 2), 2) + np.diag(np.ones(n - 2), -2)
    return T / (12.0 * h * h)


def assemble(V: Optional[LocalPotential], U: FormFactor, epsilon: float, L: float, n: int,
             k_target: Optional[float] = None) -> BoxHamiltonian:
    """-psi'' + V psi + eps U <U, psi> on n interior nodes of [0, L]"""
    if k_target is not None and n < WAVELENGTH_POINTS * L * k_target / math.pi:
        raise ResolutionTooLow(f"{n} nodes cannot resolve k={k_target:g} on a box of length {L:g}")
    support = effective_support(U.profile)
    if V is not None and not V.is_free:
        support = max(support, effective_support(V.profile))
    if L < SUPPORT_MULTIPLE * support:
        raise ValidationError(f"box length {L:g} is below {SUPPORT_MULTIPLE:g} x the support {support:.3g}")
    h = L / (n + 1)
    r = h * np.arange(1, n + 1)
    H = _kinetic(n, h)
    if V is not None and not V.is_free:
        H[np.diag_indices(n)] += V(r)
    u = np.sqrt(h) * U(r)
    H += epsilon * np.outer(u, u)
    return BoxHamiltonian(float(L), r, H, float(epsilon))


def _box_nodes(L: float, numerics: Numerics) -> int:
    return int(math.ceil(L / numerics.oracle_step)) - 1


def _localization(vector: np.ndarray, radii: np.ndarray, support: float):
    weight = vector ** 2
    total = float(np.sum(weight))
    tail = float(np.sum(weight[radii > support]) / total)
    participation = total ** 2 / (radii.size * float(np.sum(weight ** 2)))
    return tail, participation


def _levels_in_window(box: BoxHamiltonian, k0: float, window: float, support: float) -> List[BoxLevel]:
    lo, hi = k0 ** 2 - window, k0 ** 2 + window
    values, vectors = linalg.eigh(box.matrix, subset_by_value=(lo, hi))
    norm = float(np.linalg.norm(box.matrix))
    levels = []
    for lam, vec in zip(values, vectors.T):
        residual = float(np.linalg.norm(box.matrix @ vec - lam * vec)) / norm
        tail, participation = _localization(vec, box.radii, support)
        levels.append(BoxLevel(box.length, float(lam), tail, participation, residual))
    return levels


def window_width(k0: float, L: float) -> float:
    return max(0.05, 3.0 * (math.pi / L) ** 2 * 2.0 * k0)


def embedded_scan(V: Optional[LocalPotential], U: FormFactor, epsilon: float, k0: float,
                  numerics: Numerics = DEFAULT_NUMERICS) -> SpectralScan:
    """Look for a level near k0^2 that stays put and stays localized across the box ladder"""
    lengths = [numerics.box_length * f for f in numerics.box_ladder]
    support = effective_support(U.profile)
    window = window_width(k0, lengths[0])
    best: List[BoxLevel] = []
    for L in lengths:
        box = assemble(V, U, epsilon, L, _box_nodes(L, numerics), k0)
        levels = _levels_in_window(box, k0, window, support)
        if not levels:
            logger.info("box L=%g: no level within %.3g of k0^2", L, window)
            continue
        chosen = min(levels, key=lambda lv: lv.tail_mass)
        logger.info("box L=%g: level %.8f, tail mass %.3e, participation %.3f",
                    L, chosen.eigenvalue, chosen.tail_mass, chosen.participation)
        best.append(chosen)

    continuum_shift = k0 ** 2 * (1.0 - (lengths[0] / lengths[-1]) ** 2)
    drift = (max(lv.eigenvalue for lv in best) - min(lv.eigenvalue for lv in best)) if best else math.inf
    masses = [lv.tail_mass for lv in best]
    localized = len(best) == len(lengths) and all(m < numerics.oracle_tail_mass for m in masses)
    stable = drift < window / 5.0 and drift < 0.2 * continuum_shift
    if localized and stable:
        verdict = "confirmed"
    else:
        borderline = [m for m in masses if numerics.oracle_tail_mass <= m < numerics.oracle_ambiguous_mass]
        if borderline:
            raise AmbiguousScan(f"localization is borderline near k0={k0:g}: tail masses {masses}")
        verdict = "refuted"
    logger.info("embedded scan at k0=%g: %s (drift %.2e, continuum shift %.2e)",
                k0, verdict, drift, continuum_shift)
    return SpectralScan(float(k0), window, support, best, float(drift), float(continuum_shift), verdict)


def candidate_wavefunction(U: FormFactor, epsilon: float, k0: float,
                           numerics: Numerics = DEFAULT_NUMERICS) -> CandidateWavefunction:
    """psi = eps c integral of G0(r, t; k0) U(t) dt with the standing-wave Green's function

    G0 = -sin(k r<) cos(k r>) / k. When U~(k0) = 0 the cos(k0 r) tail
    cancels; eps <U, phi> = 1 is the same statement as D(k0) = 0.
    """
    grid = U.grid
    r = grid.nodes
    profile = U.profile
    cos_tail, _ = trig_tail_integrals(profile, k0)
    inner = cumulative_from_origin(lambda t: profile(t) * np.sin(k0 * t), grid)
    outer = cumulative_from_infinity(lambda t: profile(t) * np.cos(k0 * t), grid, cos_tail)
    phi = -(np.cos(k0 * r) * inner + np.sin(k0 * r) * outer) / k0
    overlap = integrate_semi_infinite(SampledFunction(grid, profile.values * phi, TailModel()))
    self_consistency = abs(1.0 - epsilon * overlap)

    weights = trapezoid_weights(r)
    psi_values = phi / math.sqrt(float(np.sum(weights * phi ** 2)))
    psi = SampledFunction(grid, psi_values, TailModel())
    cut = min(CANDIDATE_SUPPORT_MULTIPLE * effective_support(profile), 0.75 * grid.r_max)
    tail_mass = float(np.sum((weights * psi_values ** 2)[r > cut]))
    if tail_mass > numerics.wavefunction_tail_mass:
        raise TailNotDecaying(f"candidate at k0={k0:g} keeps {tail_mass:.2%} of its weight beyond r={cut:.3g}")

    c = integrate_semi_infinite(SampledFunction(grid, profile.values * psi_values, TailModel()))
    lhs = second_difference(r, psi_values) + k0 ** 2 * psi_values - epsilon * profile.values * c
    region = uniform_run_mask(r)
    residual = float(np.max(np.abs(lhs[region])))
    consistent = bool(self_consistency <= numerics.self_consistency_tolerance
                      and residual <= numerics.wavefunction_residual)
    logger.debug("candidate wavefunction: tail mass %.2e, residual %.2e, |1 - eps<U,phi>| = %.2e",
                 tail_mass, residual, self_consistency)
    if not consistent:
        logger.warning("candidate at k0=%g is not an eigenfunction: |1 - eps<U,phi>| = %.2e, residual %.2e",
                       k0, self_consistency, residual)
    return CandidateWavefunction(psi, float(k0), tail_mass, residual, float(self_consistency), consistent)
