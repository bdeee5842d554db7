"""
tgifs entry point.

Usage:
    python main.py reproduce symmetric --seed 7
"""

import sys

from tgifs.cli import cli

if __name__ == "__main__":
    sys.exit(cli())
