"""UI Module - Terminal output for the command-line front end
Contains the banner, step separators and the verdict tables printed by
each subcommand

Copyright (C) 2025 Embedded State Detector Contributors
This file is licensed under the GNU General Public License v3.0
See LICENSE or https://www.gnu.org/licenses/gpl-3.0.txt for details.
"""

from .utils import Colors, format_short, verdict_mark


def print_banner():
    """Prints the welcome banner"""
    banner = f"""
{Colors.CYAN}{'='*80}
{Colors.BOLD}🔬 EMBEDDED STATE DETECTOR - separable plus local S-wave potentials 🔬{Colors.END}
{Colors.CYAN}{'='*80}{Colors.END}
"""
    print(banner)


def show_step_separator(step_number, title):
    """Shows a visual separator for each step"""
    separator = f"{Colors.BLUE}{'🟦' * 44}{Colors.END}"
    print(f"\n{separator}")
    print(f"{Colors.BOLD}🔻 STEP {step_number}: {title} 🔻{Colors.END}")
    print(f"{separator}\n")


def show_certificate(certificate):
    """One certificate with its per-condition diagnostics"""
    title = f"Certificate {certificate['theorem']}"
    if certificate.get('degenerate'):
        title += f" {Colors.YELLOW}(degenerate){Colors.END}"
    print(f"{Colors.BOLD}📜 {title}: {verdict_mark(certificate['passed'])}")
    for name, ok in certificate['conditions'].items():
        print(f"   {verdict_mark(ok)}  {name}")
    for reason in certificate['reasons']:
        print(f"   {Colors.YELLOW}↳ {reason}{Colors.END}")


def show_detection(detection):
    """Zeros of the transform, D at each zero and the embedded states"""
    print(f"{Colors.BOLD}📈 SCAN{Colors.END}: epsilon={detection['epsilon']:+g}, "
          f"ceiling k={format_short(detection['scan_ceiling'])}, "
          f"max |D - eps| near ceiling={format_short(detection['ceiling_gap'])}")
    zeros = detection['zeros']
    if not zeros:
        print(f"{Colors.GREEN}No zeros of the form factor transform on the scan{Colors.END}")
    else:
        print(f"\n{'k':>22} {'U~(k)':>14} {'D(k)':>14}  double")
        print("-" * 60)
        for z in zeros:
            print(f"{z['k']:22.15f} {format_short(z['U_tilde']):>14} {format_short(z['D']):>14}  "
                  f"{'yes' if z['double'] else 'no'}")
    states = detection['embedded_states']
    print()
    if states:
        for s in states:
            print(f"{Colors.RED}{Colors.BOLD}⚠️  EMBEDDED STATE at k={s['k']:.10f} "
                  f"(E={s['energy']:.10f}, D={format_short(s['D'])}){Colors.END}")
    else:
        print(f"{Colors.GREEN}{Colors.BOLD}✅ No embedded bound states{Colors.END}")
    for certificate in detection['certificates']:
        show_certificate(certificate)
    if not detection['consistent']:
        print(f"{Colors.RED}❌ certificate and scan disagree{Colors.END}")


def show_scan(scan):
    """Box-ladder levels and the oracle verdict"""
    print(f"\n{'L':>8} {'eigenvalue':>20} {'tail mass':>12} {'participation':>14}")
    print("-" * 58)
    for level in scan['levels']:
        print(f"{level['length']:8g} {level['eigenvalue']:20.12f} {format_short(level['tail_mass']):>12} "
              f"{format_short(level['participation']):>14}")
    color = Colors.GREEN if scan['verdict'] == 'confirmed' else Colors.YELLOW
    print(f"\n{Colors.BOLD}🧪 Oracle at k0={scan['k0']:g}: {color}{scan['verdict'].upper()}{Colors.END} "
          f"(drift {format_short(scan['drift'])}, continuum shift {format_short(scan['continuum_shift'])})")


def show_key_values(title, values):
    """Aligned name/value table for diagnostics"""
    print(f"{Colors.BOLD}{title}{Colors.END}")
    width = max((len(k) for k in values), default=0)
    for key, value in values.items():
        if isinstance(value, bool):
            shown = verdict_mark(value)
        elif isinstance(value, (int, float)):
            shown = format_short(value)
        else:
            shown = str(value)
        print(f"  {key:<{width}}  {shown}")


def show_presets(presets):
    """Lists the named preset specs"""
    print(f"{Colors.BOLD}📦 PRESETS{Colors.END}")
    for name, preset in presets.items():
        print(f"  {Colors.CYAN}{name}{Colors.END}: {preset['name']}")


def show_written(paths):
    for path in paths:
        print(f"{Colors.BLUE}💾 {path}{Colors.END}")


def show_error(error):
    print(f"{Colors.RED}❌ {type(error).__name__}: {error}{Colors.END}")
