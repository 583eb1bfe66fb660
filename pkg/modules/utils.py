"""Utils Module - Utility functions and constants
Contains color codes, number formatting, and small helpers shared by the CLI

Copyright (C) 2025 Embedded State Detector Contributors
This file is licensed under the GNU General Public License v3.0
See LICENSE or https://www.gnu.org/licenses/gpl-3.0.txt for details.
"""

import time
from contextlib import contextmanager


class Colors:
    """ANSI color codes for terminal output"""
    HEADER = '\033[95m'
    BLUE = '\033[94m'
    CYAN = '\033[96m'
    GREEN = '\033[92m'
    YELLOW = '\033[93m'
    RED = '\033[91m'
    BOLD = '\033[1m'
    UNDERLINE = '\033[4m'
    END = '\033[0m'


def format_number(value):
    """Full double precision scientific notation used in every series file"""
    return f"{float(value):.17e}"


def format_short(value):
    """Compact rendering for terminal tables"""
    if value is None:
        return "-"
    return f"{float(value):.6g}"


def verdict_mark(passed):
    """Colored pass/fail marker"""
    if passed:
        return f"{Colors.GREEN}✅ pass{Colors.END}"
    return f"{Colors.RED}❌ fail{Colors.END}"


@contextmanager
def stopwatch(timings, key):
    """Records the wall time of a block into timings[key] (seconds)"""
    start = time.perf_counter()
    try:
        yield
    finally:
        timings[key] = time.perf_counter() - start
