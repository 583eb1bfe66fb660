"""Config Module - Numerical defaults and presets
Tolerances, grid sizes and the named corpus presets used by the CLI

Copyright (C) 2025 Embedded State Detector Contributors
This file is licensed under the GNU General Public License v3.0
See LICENSE or https://www.gnu.org/licenses/gpl-3.0.txt for details.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, fields, replace
from typing import Any, Dict, Mapping, Optional, Sequence

from .errors import ValidationError
from .grids_quadrature import RadialGrid, make_radial_grid


def _coerce_field(name: str, value: Any, default: Any) -> Any:
    """Casts an override to the type of the field it replaces"""
    try:
        if name == "box_ladder":
            return tuple(float(v) for v in value)
        if name == "seed":
            return None if value is None else int(value)
        if isinstance(default, bool):
            if not isinstance(value, bool):
                raise TypeError
            return value
        if isinstance(default, int):
            number = float(value)
            if isinstance(value, bool) or not number.is_integer():
                raise TypeError
            return int(number)
        if isinstance(default, float):
            if isinstance(value, bool):
                raise TypeError
            return float(value)
        return str(value)
    except (TypeError, ValueError) as e:
        raise ValidationError(f"numerics.{name} cannot be {value!r}") from e


@dataclass(frozen=True)
class Numerics:
    """Every tunable number of the pipeline, with desk-scale defaults"""
    # radial grid
    r_max: float = 40.0
    nodes: int = 2000
    r_min: float = 1e-6
    refine_origin: bool = True
    grid_jitter: float = 0.0
    seed: Optional[int] = None

    # quadrature
    quad_tolerance: float = 1e-10
    pv_tolerance: float = 1e-8
    pv_delta: float = 0.05
    flag_tolerance: float = 1e-9

    # ODE
    ode_method: str = "DOP853"
    ode_rtol: float = 1e-11
    ode_atol: float = 1e-13
    matching_tolerance: float = 1e-6

    # momentum scan
    k_max: float = 40.0
    k_limit: float = 320.0
    momentum_step: float = 0.01
    p_ceiling_factor: float = 2.0
    ceiling_tolerance: float = 0.1
    match_tolerance: float = 1e-6
    root_tolerance: float = 1e-8
    identity_tolerance: float = 1e-5

    # kernel
    kernel_R: float = 20.0
    kernel_nodes: int = 300
    kernel_levels: int = 3
    kernel_tolerance: float = 1e-10
    kernel_max_iterations: int = 50
    kernel_regularization: float = 1e-3
    kernel_tail_tolerance: float = 1e-6
    kernel_flag_tolerance: float = 1e-6

    # builder
    residual_tolerance: float = 1e-6

    # oracle
    box_length: float = 40.0
    box_ladder: tuple = (1.0, 1.5, 2.0)
    oracle_tail_mass: float = 0.05
    oracle_ambiguous_mass: float = 0.15
    wavefunction_tail_mass: float = 0.02
    wavefunction_residual: float = 1e-5
    self_consistency_tolerance: float = 1e-4
    oracle_step: float = 0.04

    def with_overrides(self, **overrides: Any) -> "Numerics":
        """Return a copy with the given fields replaced (unknown keys rejected)"""
        known = {f.name for f in fields(self)}
        unknown = set(overrides) - known
        if unknown:
            raise ValidationError(f"unknown numerics keys: {', '.join(sorted(unknown))}")
        clean = {key: _coerce_field(key, value, getattr(self, key)) for key, value in overrides.items()}
        result = replace(self, **clean)
        result.validate()
        return result

    @classmethod
    def from_mapping(cls, mapping: Optional[Mapping[str, Any]]) -> "Numerics":
        if not mapping:
            return cls()
        flat = dict(mapping)
        tolerances = flat.pop("tolerances", None) or {}
        flat.update(tolerances)
        return cls().with_overrides(**flat)

    def validate(self):
        for name in ("r_max", "nodes", "k_max", "quad_tolerance", "pv_tolerance",
                     "kernel_R", "kernel_nodes", "kernel_levels", "box_length", "oracle_step"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"numerics.{name} must be positive, got {getattr(self, name)!r}")
        if self.kernel_R > self.r_max:
            raise ValidationError("numerics.kernel_R must not exceed r_max")

    def as_dict(self) -> Dict[str, Any]:
        return {f.name: (list(getattr(self, f.name)) if f.name == "box_ladder" else getattr(self, f.name))
                for f in fields(self)}

    def radial_grid(self, breakpoints: Sequence[float] = ()) -> RadialGrid:
        """Radial grid described by these numerics, with kinks as nodes"""
        return make_radial_grid(self.r_max, self.nodes, self.r_min, self.refine_origin,
                                self.grid_jitter, self.seed, list(breakpoints) or None)


DEFAULT_NUMERICS = Numerics()


PRESETS = {
    'baseline-exponential': {
        'name': 'Repulsive exponential form factor, no local potential',
        'spec': {
            'formfactor': {'family': 'exponential', 'params': {'amplitude': 1.0, 'rate': 1.0}},
            'epsilon': 1,
        },
    },
    'engineered-embedded': {
        'name': 'Attractive exp-times-poly form factor tuned to an embedded state at k = 1',
        'spec': {
            'formfactor': {'family': 'exp_times_poly',
                           'params': {'amplitude': 'engineered', 'rate': 2.0, 'k0': 1.0}},
            'epsilon': -1,
        },
    },
    'theorem-b-manufactured': {
        'name': 'Manufactured local potential with a form factor built from g = exp(-t)',
        'spec': {
            'local': {'family': 'manufactured', 'params': {}},
            'source': {'smooth': {'family': 'exponential', 'params': {'amplitude': 1.0, 'rate': 1.0}},
                       'deltas': []},
            'formfactor': {'family': 'built_from_source', 'params': {}},
            'epsilon': 1,
        },
    },
}


def get_preset(name: str) -> Dict[str, Any]:
    """Returns a deep copy of a preset spec document"""
    preset = PRESETS.get(name)
    if preset is None:
        raise ValidationError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}")
    return copy.deepcopy(preset['spec'])
