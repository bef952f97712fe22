"""Laser phase plate modelling toolkit.

All quantities are SI: metres, radians, volts, W/m^2.
"""

import sys

from ._core import *  # noqa: F401,F403
from ._core import run_cli

__version__ = "0.1.0"


def main() -> int:
    return run_cli(sys.argv[1:])
