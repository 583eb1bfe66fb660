"""CLI Module - Command-line front end
Subcommands that read a JSON potential spec, run one stage of the pipeline
and write report.json plus flat CSV series for plotting

Copyright (C) 2025 Embedded State Detector Contributors
This file is licensed under the GNU General Public License v3.0
See LICENSE or https://www.gnu.org/licenses/gpl-3.0.txt for details.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional

import numpy as np

from . import __version__
from .config import PRESETS, get_preset
from .detector import (cosine_representation, certify_theorem_A, certify_theorem_B, detect,
                       momentum_grid)
from .errors import EmbeddedStateError, SpecParseError, ValidationError
from .formfactor_builder import (build_from_source, integrability_ledger, measured_integrability,
                                 origin_value, verify_ode_identity)
from .glk_kernel import (check_requirements, convexity_identity_residual, diagonal_identity_residual,
                         f_transform, solve_kernel)
from .local_potential import free_potential, jost_modulus, weighted_transform, zero_energy_pair
from .logging_config import get_logger
from .oracle import candidate_wavefunction, embedded_scan
from .potential_spec import Problem, load_spec, parse_spec, prepare
from .special_transforms import (cosine_transform, hankel_transform, omega_convolution, parseval_check,
                                 riemann_lebesgue_residual, signed_split, sine_transform, tail_function)
from .ui import (print_banner, show_certificate, show_detection, show_error, show_key_values,
                 show_presets, show_scan, show_step_separator, show_written)
from .utils import format_number, stopwatch

logger = get_logger(__name__)

SCHEMA_VERSION = 1
JOST_POINTS = 80
JOST_RANGE = (0.25, 20.0)


class Run:
    """One subcommand invocation: its problem, results, series and timings"""

    def __init__(self, command: str, args: argparse.Namespace, problem: Optional[Problem] = None):
        self.command = command
        self.args = args
        self.problem = problem
        self.results: Dict[str, Any] = {}
        self.series: Dict[str, Dict[str, np.ndarray]] = {}
        self.timings: Dict[str, float] = {}

    @property
    def quiet(self) -> bool:
        return self.args.quiet

    def report(self) -> Dict[str, Any]:
        report = {
            "schema_version": SCHEMA_VERSION,
            "version": __version__,
            "command": self.command,
            "results": _plain(self.results),
            "timings": self.timings,
        }
        if self.problem is not None:
            report["spec"] = self.problem.spec.raw
            report["numerics"] = self.problem.numerics.as_dict()
        return report


# ---------- Spec handling ----------

def _parse_override(text: str):
    if '=' not in text:
        raise ValidationError(f"tolerance override {text!r} must look like KEY=VALUE")
    key, raw = text.split('=', 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip(), value


def spec_document(args: argparse.Namespace) -> Dict[str, Any]:
    """The spec document from --spec or --preset, with command-line overrides folded into numerics"""
    if args.spec:
        doc = load_spec(args.spec)
    elif args.preset:
        doc = get_preset(args.preset)
    else:
        raise SpecParseError("give a spec file with --spec or a named preset with --preset")
    numerics = dict(doc.get('numerics') or {})
    for text in args.tolerance or []:
        key, value = _parse_override(text)
        numerics[key] = value
    if args.seed is not None:
        numerics['seed'] = args.seed
        numerics.setdefault('grid_jitter', 0.0)
    if numerics:
        doc['numerics'] = numerics
    return doc


def _problem(args: argparse.Namespace, timings: Dict[str, float]) -> Problem:
    with stopwatch(timings, 'prepare'):
        return prepare(parse_spec(spec_document(args)))


def _require_local(problem: Problem, command: str):
    if problem.V is None:
        raise ValidationError(f"'{command}' needs a 'local' block in the spec")
    return problem.V


# ---------- Output ----------

def _plain(value):
    """JSON-safe copy: numpy scalars and arrays become Python numbers and lists"""
    if isinstance(value, Mapping):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    return value


def write_series(path: Path, columns: Mapping[str, Any]) -> Path:
    """Flat CSV with one column per key, every number in full double precision"""
    names = list(columns)
    arrays = [np.asarray(columns[name], dtype=float) for name in names]
    with path.open('w', newline='', encoding='utf-8') as handle:
        writer = csv.DictWriter(handle, fieldnames=names)
        writer.writeheader()
        for row in zip(*arrays):
            writer.writerow({name: format_number(v) for name, v in zip(names, row)})
    return path


def write_outputs(run: Run) -> List[Path]:
    out = Path(run.args.out)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    report_path = out / 'report.json'
    report_path.write_text(json.dumps(run.report(), indent=2, sort_keys=True) + '\n', encoding='utf-8')
    written.append(report_path)
    if run.args.format == 'csv':
        for name, columns in run.series.items():
            written.append(write_series(out / f'{name}.csv', columns))
    return written


def load_report(path) -> Dict[str, Any]:
    """Reads a report.json back, refusing reports of another schema version"""
    path = Path(path)
    try:
        report = json.loads(path.read_text(encoding='utf-8'))
    except (OSError, json.JSONDecodeError) as e:
        raise SpecParseError(f"cannot read report {path}: {e}") from e
    if report.get('schema_version') != SCHEMA_VERSION:
        raise ValidationError(f"report {path} has schema_version {report.get('schema_version')!r}, "
                              f"expected {SCHEMA_VERSION}")
    return report


def verdicts(report: Mapping[str, Any]) -> Dict[str, Any]:
    """The verdict-bearing fields of a report, for determinism comparisons"""
    results = report.get('results', {})
    found: Dict[str, Any] = {'command': report.get('command')}
    detection = results.get('detection')
    if detection:
        found['embedded_states'] = [round(s['k'], 6) for s in detection['embedded_states']]
        found['zeros'] = len(detection['zeros'])
        found['consistent'] = detection['consistent']
    certificates = list(results.get('certificates', []))
    if detection:
        certificates += detection['certificates']
    if certificates:
        found['certificates'] = {c['theorem']: c['passed'] for c in certificates}
    for key in ('verdict', 'oracle'):
        if key in results:
            block = results[key]
            found[key] = block['verdict'] if isinstance(block, Mapping) else block
    if 'candidate' in results:
        found['candidate_consistent'] = results['candidate']['consistent']
    if 'oracle_scans' in results:
        found['oracle'] = [scan['verdict'] for scan in results['oracle_scans']]
    return found


# ---------- Subcommands ----------

def cmd_transform(run: Run):
    problem = run.problem
    U = problem.U.profile
    numerics = problem.numerics
    kind = run.args.kind
    momenta = np.concatenate([[0.0], momentum_grid(run.args.k_max or numerics.k_max, numerics,
                                                   weighted=kind == 'weighted')])
    with stopwatch(run.timings, kind):
        if kind == 'sine':
            table = sine_transform(U, momenta, numerics.quad_tolerance)
            lhs, rhs = parseval_check(U, table)
            run.results['parseval'] = {'integral_U2': lhs, 'momentum_side': rhs}
            run.results['riemann_lebesgue'] = riemann_lebesgue_residual(table)
        elif kind == 'cosine':
            table = cosine_transform(U, momenta, numerics.quad_tolerance, numerics.flag_tolerance)
        elif kind == 'hankel':
            momenta = momenta[1:]
            table = hankel_transform(U, run.args.nu, momenta, numerics.quad_tolerance)
            run.results['nu'] = run.args.nu
        else:
            V = problem.V if problem.V is not None else free_potential(problem.grid)
            table = weighted_transform(U, V, momenta, numerics)
    run.results['kind'] = kind
    run.results['flags'] = dict(table.flags)
    run.results['points'] = int(table.momenta.size)
    run.series['momentum_series'] = {'k': table.momenta, 'U_tilde': table.values}
    if not run.quiet:
        show_key_values(f"🧮 {kind} transform", {'points': table.momenta.size,
                                                 'first k': float(table.momenta[0]),
                                                 'first value': float(table.values[0]),
                                                 'last value': float(table.values[-1]),
                                                 **table.flags})


def cmd_solve_local(run: Run):
    problem = run.problem
    V = _require_local(problem, 'solve-local')
    numerics = problem.numerics
    with stopwatch(run.timings, 'zero_energy_pair'):
        pair = zero_energy_pair(V, numerics)
    momenta = np.linspace(*JOST_RANGE, JOST_POINTS)
    with stopwatch(run.timings, 'jost_modulus'):
        jost = jost_modulus(V, momenta, numerics)
    wronskian = pair.wronskian()
    run.results.update({
        'A': pair.A,
        'B': pair.B,
        'rV_L1': V.rV_L1,
        'wronskian_max_deviation': float(np.max(np.abs(wronskian - 1.0))),
        'jost_min': float(np.min(jost.values)),
        'jost_at_last_k': float(jost.values[-1]),
        'jost_monotone_tail': bool(np.all(np.diff(np.abs(jost.values - 1.0)[momenta >= 2.0]) <= 0.0)),
    })
    run.series['local_series'] = {'r': pair.phi0.grid.nodes, 'phi0': pair.phi0.values,
                                  'chi0': pair.chi0.values, 'wronskian': wronskian}
    run.series['jost_series'] = {'k': jost.momenta, 'F2': jost.values}
    if not run.quiet:
        show_key_values("🧷 Zero-energy pair and Jost modulus", run.results)


def cmd_kernel(run: Run):
    problem = run.problem
    V = _require_local(problem, 'kernel')
    numerics = problem.numerics
    with stopwatch(run.timings, 'kernel'):
        K = solve_kernel(V, numerics=numerics)
    domain = K.domain()
    margin = float(np.max((np.abs(K.H) - K.bound())[domain]))
    with stopwatch(run.timings, 'f_transform'):
        f = f_transform(K, problem.U.profile, numerics)
    verdict = check_requirements(f)
    run.results.update({
        'iterations': K.iterations,
        'residual': K.residual,
        'R': K.R,
        'bound_margin': margin,
        'bound_holds': margin <= 0.0,
        'diagonal_identity_residual': diagonal_identity_residual(K),
        'tail_bound': f.tail_bound,
        'f_flags': dict(f.flags),
        'verdict': {'passed': verdict.passed, 'conditions': dict(verdict.conditions),
                    'details': dict(verdict.details)},
    })
    source = problem.source
    if source is not None and source.smooth is not None and not source.deltas:
        run.results['convexity_identity_residual'] = convexity_identity_residual(K, f, source.smooth)
    run.series['f_series'] = {'x': f.profile.grid.nodes, 'f': f.profile.values}
    if not run.quiet:
        show_key_values("🧵 Transformation kernel", {k: v for k, v in run.results.items()
                                                     if not isinstance(v, dict)})
        show_key_values("f-profile requirements", verdict.conditions)


def cmd_build_u(run: Run):
    problem = run.problem
    source = problem.source
    if source is None:
        raise ValidationError("'build-u' needs a 'source' block in the spec")
    numerics = problem.numerics
    V = problem.V if problem.V is not None else free_potential(problem.grid)
    with stopwatch(run.timings, 'build'):
        pair = zero_energy_pair(V, numerics)
        U = problem.U if problem.U.provenance == 'built' else build_from_source(pair, source, numerics)
    with stopwatch(run.timings, 'residual'):
        residual = verify_ode_identity(U, V, source, run.args.residual_tolerance, numerics)
    run.results.update({
        'origin_value': origin_value(pair, source),
        'residual': residual.__dict__,
        'regularity': dict(U.regularity),
        'integrability_ledger': integrability_ledger(source),
        'measured_integrability': measured_integrability(U),
    })
    run.series['radial_series'] = {'r': U.grid.nodes, 'U': U.profile.values, 'g': source.g(U.grid.nodes)}
    if not run.quiet:
        show_key_values("🏗️  Built form factor", {'U(0)': run.results['origin_value'],
                                                  'max residual': residual.max_residual,
                                                  'at r': residual.location, **U.regularity})


def _radial_series(problem: Problem) -> Dict[str, np.ndarray]:
    U = problem.U.profile
    r = U.grid.nodes
    W = tail_function(U)
    omega = omega_convolution(signed_split(U))
    inside = r <= omega.grid.r_max
    return {'r': r[inside], 'U': U.values[inside], 'W': W.values[inside], 'omega': omega(r[inside])}


def cmd_detect(run: Run):
    problem = run.problem
    numerics = problem.numerics
    with stopwatch(run.timings, 'detect'):
        report = detect(problem.U, problem.V, problem.epsilon, numerics)
    run.results['detection'] = report.as_dict()
    if problem.engineered_amplitude is not None:
        run.results['engineered_amplitude'] = problem.engineered_amplitude
    curve = report.curve
    transform = report.transform.as_function()
    run.series['momentum_series'] = {'k': curve.momenta, 'U_tilde': transform(curve.momenta),
                                     'D': curve.values}
    if problem.V is None:
        with stopwatch(run.timings, 'radial_series'):
            run.series['radial_series'] = _radial_series(problem)
    if run.args.cosine:
        with stopwatch(run.timings, 'cosine_representation'):
            run.results['cosine_representation'] = cosine_representation(problem.U, numerics=numerics).as_dict()
    if run.args.oracle:
        scans = []
        for state in report.embedded:
            with stopwatch(run.timings, f'oracle_{state.k:.6f}'):
                scans.append(embedded_scan(problem.V, problem.U, problem.epsilon, state.k, numerics).as_dict())
        run.results['oracle_scans'] = scans
    if not run.quiet:
        show_detection(run.results['detection'])
        for scan in run.results.get('oracle_scans', []):
            show_scan(scan)


def cmd_certify(run: Run):
    problem = run.problem
    with stopwatch(run.timings, 'certify'):
        if run.args.theorem == 'A':
            certificate = certify_theorem_A(problem.U, problem.numerics.flag_tolerance)
        else:
            V = problem.V if problem.V is not None else free_potential(problem.grid)
            certificate = certify_theorem_B(problem.U, V, problem.source, problem.numerics)
    run.results['certificates'] = [certificate.as_dict()]
    if not run.quiet:
        show_certificate(certificate.as_dict())


def cmd_oracle(run: Run):
    problem = run.problem
    numerics = problem.numerics
    k0 = run.args.k0
    with stopwatch(run.timings, 'embedded_scan'):
        scan = embedded_scan(problem.V, problem.U, problem.epsilon, k0, numerics)
    run.results['oracle'] = scan.as_dict()
    if problem.V is None:
        with stopwatch(run.timings, 'candidate'):
            candidate = candidate_wavefunction(problem.U, problem.epsilon, k0, numerics)
        run.results['candidate'] = {'tail_mass': candidate.tail_mass, 'residual': candidate.residual,
                                    'consistent': candidate.consistent,
                                    'self_consistency': candidate.self_consistency}
        run.series['candidate_series'] = {'r': candidate.psi.grid.nodes, 'psi': candidate.psi.values}
    if not run.quiet:
        show_scan(run.results['oracle'])
        if 'candidate' in run.results:
            show_key_values("🌊 Candidate wavefunction", run.results['candidate'])


def cmd_presets(args: argparse.Namespace) -> int:
    if args.name is None:
        show_presets(PRESETS)
        return 0
    print(json.dumps(get_preset(args.name), indent=2))
    return 0


COMMANDS = {
    'transform': cmd_transform,
    'solve-local': cmd_solve_local,
    'kernel': cmd_kernel,
    'build-u': cmd_build_u,
    'detect': cmd_detect,
    'certify': cmd_certify,
    'oracle': cmd_oracle,
}


# ---------- Parser ----------

def _add_common(p: argparse.ArgumentParser):
    source = p.add_mutually_exclusive_group()
    source.add_argument('--spec', help='path to a JSON potential spec')
    source.add_argument('--preset', choices=sorted(PRESETS), help='use a named preset spec')
    p.add_argument('--out', default='out', help='directory for report.json and the CSV series')
    p.add_argument('--format', choices=['csv', 'structured'], default='csv',
                   help='csv writes the series files next to report.json; structured writes only the report')
    p.add_argument('--tolerance', action='append', metavar='KEY=VALUE',
                   help='override one numerics field (repeatable)')
    p.add_argument('--seed', type=int, default=None, help='seed for randomized grid jitter')
    p.add_argument('--quiet', action='store_true', help='no terminal tables, only the output files')


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog='embedded-states',
                                 description='Detect and certify embedded bound states of V(r) + eps U(r)U(r\')')
    ap.add_argument('--version', action='version', version=f'%(prog)s {__version__}')
    sub = ap.add_subparsers(dest='cmd', required=True)

    p = sub.add_parser('transform', help='sine, cosine, Hankel or weighted transform of U')
    _add_common(p)
    p.add_argument('--kind', choices=['sine', 'cosine', 'hankel', 'weighted'], default='sine')
    p.add_argument('--nu', type=float, default=0.5, help='Hankel order')
    p.add_argument('--k-max', type=float, default=None)

    p = sub.add_parser('solve-local', help='zero-energy pair, A, B and the Jost modulus')
    _add_common(p)

    p = sub.add_parser('kernel', help='transformation kernel, its bound and the f-profile')
    _add_common(p)

    p = sub.add_parser('build-u', help='form factor from a source and its ODE residual')
    _add_common(p)
    p.add_argument('--residual-tolerance', type=float, default=None)

    p = sub.add_parser('detect', help='scan for embedded bound states')
    _add_common(p)
    p.add_argument('--cosine', action='store_true', help='also evaluate the cosine representation')
    p.add_argument('--oracle', action='store_true', help='run the box oracle on every detected state')

    p = sub.add_parser('certify', help='certificate of absence')
    _add_common(p)
    p.add_argument('--theorem', choices=['A', 'B'], default='A')

    p = sub.add_parser('oracle', help='box-ladder spectral check at k0')
    _add_common(p)
    p.add_argument('--k0', type=float, default=1.0)

    p = sub.add_parser('presets', help='list presets or print one as a spec document')
    p.add_argument('name', nargs='?', choices=sorted(PRESETS))
    return ap


def run_command(args: argparse.Namespace) -> Run:
    """Runs one spec-driven subcommand and writes its outputs"""
    timings: Dict[str, float] = {}
    problem = _problem(args, timings)
    run = Run(args.cmd, args, problem)
    run.timings.update(timings)
    COMMANDS[args.cmd](run)
    paths = write_outputs(run)
    if not args.quiet:
        show_written(paths)
    return run


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.cmd == 'presets':
        try:
            return cmd_presets(args)
        except EmbeddedStateError as e:
            show_error(e)
            return e.exit_code
    if not args.quiet:
        print_banner()
        show_step_separator(1, args.cmd.upper())
    try:
        run_command(args)
    except EmbeddedStateError as e:
        logger.error("%s failed: %s", args.cmd, e)
        show_error(e)
        return e.exit_code
    return 0
