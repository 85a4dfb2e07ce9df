#!/usr/bin/env python3
"""Track how fast the rounded quota approaches the prior as K grows.

Prints one CSV row per K with the exact rational distance, its float value,
and the #types/(2K) ceiling it always respects.

    python scripts/quota_rounding_study.py --spec src/linkmech/data/counterexample.json --K-max 64
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction

from linkmech import compute_quota, tv_distance, validate_problem


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--spec", required=True)
    ap.add_argument("--K-max", type=int, default=64)
    args = ap.parse_args()

    with open(args.spec, "r", encoding="utf-8") as fh:
        problem = validate_problem(json.load(fh))
    n = len(problem.types)

    print("K,tv_to_prior,tv_to_prior_float,ceiling")
    for K in range(1, args.K_max + 1):
        d = tv_distance(problem.prior, compute_quota(problem, K))
        ceiling = Fraction(n, 2 * K)
        assert d <= ceiling
        print(f"{K},{d},{float(d)!r},{ceiling}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
