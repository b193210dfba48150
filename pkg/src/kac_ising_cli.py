"""
Entry point: python src/kac_ising_cli.py <command> [flags]

Example: python src/kac_ising_cli.py phase-diagram --lambda 0.01 --h-ext 0 --out phase.csv
"""

import sys

from kac_ising.cli import main

if __name__ == "__main__":
    sys.exit(main())
