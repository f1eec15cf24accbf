"""Measure the approximation report ratios on the fixture corpus.

Prints the worst observed ratio of each quantity to its rate and the
constants frozen in ``src/lcbayes/fixtures/approx_constants.json``
(worst case times a safety factor of about two).
"""

import argparse
import json
import math

from lcbayes.approx import approximate_density
from lcbayes.data_gen import parse_truth

CORPUS = [
    {"family": "gaussian"},
    {"family": "laplace"},
    {"family": "gamma", "shape": 2.0},
    {"family": "beta", "a": 2.0, "b": 3.0},
    {"family": "uniform"},
]
SIZES = [10**3, 10**4, 10**5]
LOOSE = {"C_knots": 1e9, "c_gap": 0.0, "C_dom": 1e9, "C_hellinger": 1e9, "D": 1.0, "n0": 1000}


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--margin", type=float, default=2.0)
    args = parser.parse_args()
    worst = {"C_knots": 0.0, "c_gap": math.inf, "C_dom": 0.0, "C_hellinger": 0.0}
    for spec in CORPUS:
        truth = parse_truth(spec)
        for n in SIZES:
            r = approximate_density(truth, n=n, constants=LOOSE)
            logn = math.log(n)
            width = r.interval[1] - r.interval[0]
            ratios = {
                "C_knots": r.knot_count / (n**0.2 * logn),
                "c_gap": r.min_knot_gap / (n**-1.2 * logn),
                "C_dom": r.domination_ratio,
                "C_hellinger": r.hellinger_sq / (logn**2 * n**-0.8 + width**2 * n**-1.6),
            }
            print(spec["family"], n, {k: f"{v:.4g}" for k, v in ratios.items()})
            for k, v in ratios.items():
                worst[k] = min(worst[k], v) if k == "c_gap" else max(worst[k], v)
    print("worst", worst)
    frozen = {k: (v / args.margin if k == "c_gap" else v * args.margin) for k, v in worst.items()}
    print(json.dumps(frozen, indent=2))


if __name__ == "__main__":
    main()
