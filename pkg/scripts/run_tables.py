"""Time/err tables for all four matrix families at the desk-scale defaults.

    python scripts/run_tables.py [--out results] [--n 400] [--trials 20]

Extra flags are passed to ``rqlp-bench table`` unchanged.
"""
import sys

from rqlp.cli import main
from rqlp.testmat import FAMILIES


def run(extra):
    status = 0
    for family in FAMILIES:
        status |= main(["table", "--family", family, "--b", "13", *extra])
    return status


if __name__ == "__main__":
    sys.exit(run(sys.argv[1:]))
