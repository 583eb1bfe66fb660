"""Potential Spec Module - Declarative problem documents
Parses and validates the JSON spec (local potential, form factor, source,
epsilon, numerics) and turns it into the objects the library works on

Copyright (C) 2025 Embedded State Detector Contributors
This file is licensed under the GNU General Public License v3.0
See LICENSE or https://www.gnu.org/licenses/gpl-3.0.txt for details.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional

from .config import Numerics
from .detector import engineer_embedded_state
from .errors import SpecParseError, ValidationError
from .formfactor_builder import (FormFactor, SourceFunction, build_from_source, exp_times_poly_formfactor,
                                 exponential_formfactor, exponential_source, power_law_source,
                                 singular_exponential_source, tabulated_formfactor, tabulated_source,
                                 tent_formfactor)
from .grids_quadrature import RadialGrid
from .local_potential import (LocalPotential, exponential_potential, free_potential, gaussian_potential,
                              manufactured_potential, tabulated_potential, zero_energy_pair)
from .logging_config import get_logger

logger = get_logger(__name__)

LOCAL_FAMILIES = ('free', 'exponential', 'gaussian', 'manufactured', 'tabulated')
FORMFACTOR_FAMILIES = ('exponential', 'tent', 'exp_times_poly', 'built_from_source', 'tabulated')
SOURCE_FAMILIES = ('exponential', 'power_law', 'singular_exponential', 'tabulated')

# admissible range of each numeric family parameter
PARAM_RULES = {
    'local': {
        'exponential': {'strength': 'nonnegative', 'rate': 'positive'},
        'gaussian': {'strength': 'nonnegative', 'width': 'positive'},
    },
    'formfactor': {
        'exponential': {'amplitude': 'real', 'rate': 'positive'},
        'tent': {'strength': 'real', 'cutoff': 'positive'},
        'exp_times_poly': {'amplitude': 'real', 'rate': 'positive', 'slope': 'real',
                           'k0': 'positive', 'scale': 'real'},
    },
    'smooth': {
        'exponential': {'amplitude': 'positive', 'rate': 'positive'},
        'power_law': {'amplitude': 'positive', 'shift': 'positive', 'power': 'positive'},
        'singular_exponential': {'amplitude': 'positive', 'power': 'positive'},
    },
}
TABLE_KEYS = ('radii', 'values')


@dataclass(frozen=True)
class PotentialSpec:
    formfactor: Dict[str, Any]
    epsilon: int
    numerics: Numerics
    local: Optional[Dict[str, Any]] = None
    source: Optional[Dict[str, Any]] = None
    raw: Dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True, eq=False)
class Problem:
    """Everything a subcommand needs, built from one spec"""
    spec: PotentialSpec
    grid: RadialGrid
    V: Optional[LocalPotential]
    U: FormFactor
    source: Optional[SourceFunction]
    engineered_amplitude: Optional[float] = None

    @property
    def epsilon(self) -> int:
        return self.spec.epsilon

    @property
    def numerics(self) -> Numerics:
        return self.spec.numerics


def load_spec(path) -> Dict[str, Any]:
    """Reads a spec document from disk"""
    path = Path(path)
    try:
        text = path.read_text(encoding='utf-8')
    except OSError as e:
        raise SpecParseError(f"cannot read spec {path}: {e}") from e
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise SpecParseError(f"spec {path} is not valid JSON: line {e.lineno}, column {e.colno}: {e.msg}") from e
    if not isinstance(doc, dict):
        raise SpecParseError(f"spec {path} must be a JSON object")
    return doc


def _number(value, where: str) -> float:
    if isinstance(value, bool):
        raise SpecParseError(f"{where} must be a number, got {value!r}")
    try:
        number = float(value)
    except (TypeError, ValueError) as e:
        raise SpecParseError(f"{where} must be a number, got {value!r}") from e
    if not math.isfinite(number):
        raise ValidationError(f"{where} must be finite, got {value!r}")
    return number


def _coerce_params(key: str, family: str, params: Dict[str, Any]) -> Dict[str, Any]:
    """Numeric params as floats, each checked against its admissible range"""
    for name, kind in PARAM_RULES.get(key, {}).get(family, {}).items():
        if name not in params:
            continue
        if family == 'exp_times_poly' and name == 'amplitude' and params[name] == 'engineered':
            continue
        where = f"{key}.{family}.{name}"
        value = _number(params[name], where)
        if kind == 'positive' and not value > 0:
            raise ValidationError(f"{where} must be positive, got {value!r}")
        if kind == 'nonnegative' and not value >= 0:
            raise ValidationError(f"{where} must be non-negative, got {value!r}")
        params[name] = value
    if family == 'tabulated':
        for name in TABLE_KEYS:
            column = params.get(name)
            if column is None:
                continue
            if not isinstance(column, (list, tuple)):
                raise SpecParseError(f"{key}.tabulated.{name} must be a list of numbers")
            params[name] = [_number(v, f"{key}.tabulated.{name}") for v in column]
    return params


def _block(doc: Mapping[str, Any], key: str, families, required: bool) -> Optional[Dict[str, Any]]:
    block = doc.get(key)
    if block is None:
        if required:
            raise SpecParseError(f"spec needs a '{key}' block")
        return None
    if not isinstance(block, dict) or 'family' not in block:
        raise SpecParseError(f"'{key}' must be an object with a 'family' key")
    if block['family'] not in families:
        raise ValidationError(f"unknown {key} family {block['family']!r}; expected one of {', '.join(families)}")
    params = block.get('params', {})
    if not isinstance(params, dict):
        raise SpecParseError(f"'{key}.params' must be an object")
    return {'family': block['family'], 'params': _coerce_params(key, block['family'], dict(params))}


def _source_block(doc: Mapping[str, Any]) -> Optional[Dict[str, Any]]:
    block = doc.get('source')
    if block is None:
        return None
    if not isinstance(block, dict):
        raise SpecParseError("'source' must be an object")
    smooth = _block(block, 'smooth', SOURCE_FAMILIES, required=False)
    deltas = block.get('deltas', [])
    if not isinstance(deltas, list):
        raise SpecParseError("'source.deltas' must be a list")
    parsed = []
    for item in deltas:
        if isinstance(item, dict):
            weight, site = item.get('weight'), item.get('site')
        elif isinstance(item, (list, tuple)) and len(item) == 2:
            weight, site = item
        else:
            raise SpecParseError(f"delta source {item!r} must be {{weight, site}} or [weight, site]")
        try:
            weight, site = float(weight), float(site)
        except (TypeError, ValueError) as e:
            raise SpecParseError(f"delta source {item!r} has non-numeric entries") from e
        if not weight > 0 or not site > 0:
            raise ValidationError(f"delta source needs weight > 0 and site > 0, got ({weight}, {site})")
        parsed.append([weight, site])
    if smooth is None and not parsed:
        raise ValidationError("source needs a smooth part or at least one delta")
    return {'smooth': smooth, 'deltas': parsed}


def parse_spec(doc: Mapping[str, Any]) -> PotentialSpec:
    """Validates a spec document"""
    if 'epsilon' not in doc:
        raise SpecParseError("spec needs 'epsilon'")
    epsilon = doc['epsilon']
    if isinstance(epsilon, bool) or epsilon not in (1, -1):
        raise ValidationError(f"epsilon must be +1 or -1, got {epsilon!r}")
    formfactor = _block(doc, 'formfactor', FORMFACTOR_FAMILIES, required=True)
    local = _block(doc, 'local', LOCAL_FAMILIES, required=False)
    source = _source_block(doc)
    if formfactor['family'] == 'built_from_source' and source is None:
        raise ValidationError("formfactor 'built_from_source' needs a 'source' block")
    numerics_doc = doc.get('numerics') or {}
    if not isinstance(numerics_doc, dict):
        raise SpecParseError("'numerics' must be an object")
    numerics = Numerics.from_mapping(numerics_doc)
    return PotentialSpec(formfactor, int(epsilon), numerics, local, source, dict(doc))


# ---------- Building ----------

def breakpoints(spec: PotentialSpec) -> List[float]:
    """Kinks the radial grid must carry as nodes"""
    points = []
    if spec.source:
        points.extend(site for _, site in spec.source['deltas'])
    if spec.formfactor['family'] == 'tent':
        points.append(float(spec.formfactor['params'].get('cutoff', 1.0)))
    return points


def _require(params: Mapping[str, Any], key: str, where: str):
    if key not in params:
        raise SpecParseError(f"{where} needs parameter '{key}'")
    return params[key]


def build_potential(spec: PotentialSpec, grid: RadialGrid) -> Optional[LocalPotential]:
    if spec.local is None:
        return None
    family, params = spec.local['family'], spec.local['params']
    if family == 'free':
        return free_potential(grid)
    if family == 'exponential':
        return exponential_potential(params.get('strength', 1.0), params.get('rate', 1.0), grid)
    if family == 'gaussian':
        return gaussian_potential(params.get('strength', 1.0), params.get('width', 1.0), grid)
    if family == 'manufactured':
        return manufactured_potential(grid)
    return tabulated_potential(_require(params, 'radii', 'local.tabulated'),
                               _require(params, 'values', 'local.tabulated'), grid)


def build_source(spec: PotentialSpec, grid: RadialGrid) -> Optional[SourceFunction]:
    if spec.source is None:
        return None
    smooth = None
    block = spec.source['smooth']
    if block is not None:
        family, params = block['family'], block['params']
        if family == 'exponential':
            smooth = exponential_source(params.get('amplitude', 1.0), params.get('rate', 1.0), grid)
        elif family == 'power_law':
            smooth = power_law_source(params.get('amplitude', 1.0), params.get('shift', 1.0),
                                      params.get('power', 4.0), grid)
        elif family == 'singular_exponential':
            smooth = singular_exponential_source(params.get('amplitude', 1.0), params.get('power', 2.5), grid)
        else:
            smooth = tabulated_source(_require(params, 'radii', 'source.tabulated'),
                                      _require(params, 'values', 'source.tabulated'), grid)
    return SourceFunction(smooth, tuple(tuple(d) for d in spec.source['deltas']))


def build_formfactor(spec: PotentialSpec, grid: RadialGrid, V: Optional[LocalPotential],
                     source: Optional[SourceFunction]):
    """(FormFactor, engineered amplitude or None)"""
    family, params = spec.formfactor['family'], spec.formfactor['params']
    numerics = spec.numerics
    if family == 'exponential':
        return exponential_formfactor(params.get('amplitude', 1.0), params.get('rate', 1.0), grid), None
    if family == 'tent':
        return tent_formfactor(params.get('strength', 1.0), params.get('cutoff', 1.0), grid), None
    if family == 'exp_times_poly':
        rate = float(params.get('rate', 1.0))
        amplitude = params.get('amplitude', 1.0)
        if 'slope' in params:
            slope = float(params['slope'])
            k0 = None
        else:
            k0 = float(params.get('k0', 1.0))
            slope = (k0 ** 2 + rate ** 2) / (2.0 * rate)
        if amplitude == 'engineered':
            if k0 is None:
                k0 = (2.0 * rate * slope - rate ** 2) ** 0.5
            U, value = engineer_embedded_state(k0, rate, spec.epsilon, numerics, grid)
            scale = float(params.get('scale', 1.0))
            if scale != 1.0:
                U = exp_times_poly_formfactor(value * scale, rate, slope, grid)
            return U, value
        return exp_times_poly_formfactor(float(amplitude), rate, slope, grid), None
    if family == 'built_from_source':
        pair = zero_energy_pair(V if V is not None else free_potential(grid), numerics)
        return build_from_source(pair, source, numerics), None
    return tabulated_formfactor(_require(params, 'radii', 'formfactor.tabulated'),
                                _require(params, 'values', 'formfactor.tabulated'), grid), None


def prepare(spec: PotentialSpec) -> Problem:
    """Grid, potential, source and form factor for a validated spec"""
    grid = spec.numerics.radial_grid(breakpoints(spec))
    V = build_potential(spec, grid)
    source = build_source(spec, grid)
    U, amplitude = build_formfactor(spec, grid, V, source)
    logger.info("prepared problem: formfactor=%s local=%s epsilon=%+d",
                spec.formfactor['family'], spec.local['family'] if spec.local else 'none', spec.epsilon)
    return Problem(spec, grid, V, U, source, amplitude)
