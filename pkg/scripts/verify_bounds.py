"""Monte-Carlo check of the expected Frobenius bound on every family, with
per-seed RQLP / ERQLP bound reports written as JSON.

    python scripts/verify_bounds.py [--out results]
"""
import sys

from rqlp.cli import main
from rqlp.testmat import FAMILIES

if __name__ == "__main__":
    status = 0
    for family in FAMILIES:
        status |= main(["verify-bounds", "--family", family, *sys.argv[1:]])
    sys.exit(status)
