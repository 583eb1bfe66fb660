#!/usr/bin/env python3
# Copyright (C) 2025 Embedded State Detector Contributors
# This file is licensed under the GNU General Public License v3.0
# See LICENSE or https://www.gnu.org/licenses/gpl-3.0.txt for details.
"""
Embedded State Detector - command-line entry point
Detects and certifies the absence of positive-energy bound states of
S-wave local plus separable potentials
"""

import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from modules import cli
from modules.utils import Colors


def main(argv=None):
    """Runs one subcommand and returns its exit code"""
    try:
        return cli.main(argv)
    except KeyboardInterrupt:
        print(f"\n\n{Colors.YELLOW}⚠️  Run interrupted by user{Colors.END}\n")
        return 130


if __name__ == "__main__":
    sys.exit(main())
