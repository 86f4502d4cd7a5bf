"""Per-j singular value tracking data (sigma_j vs R-values and L-values) for
the pds and eds families, one CSV per seed plus a JSON summary.

    python scripts/run_tracking.py [--out results] [--seed-list 1]
"""
import sys

from rqlp.cli import main

if __name__ == "__main__":
    status = 0
    for family in ("pds", "eds"):
        status |= main(["track", "--family", family, "--d", "2", *sys.argv[1:]])
    sys.exit(status)
