"""Fitted discrepancy exponents for Z^2, Z and the ring configuration."""

import argparse

import numpy as np

from coulomb_lab.discrepancy import fit_exponent
from coulomb_lab.pointsets import Box, gen_named, gen_ring_counterexample


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--samples", type=int, default=64)
    ap.add_argument("--seed", type=int, default=7)
    a = ap.parse_args()
    cases = [
        ("Z2", gen_named("Z2", Box.square(520)), 1.0, np.geomspace(16, 512, 8)),
        ("Z", gen_named("Z", Box.square(520)), 0.0, np.geomspace(16, 512, 8)),
    ]
    for eps in (0.1, 0.3, 0.45):
        for lo, hi in ((16, 512), (256, 8192), (4096, 131072)):
            P = gen_ring_counterexample(0.0, eps, int(hi / 4) + 8)
            cases.append((f"ring eps={eps} R={lo}..{hi}", P, 0.0, np.geomspace(lo, hi, 8)))
    print("case,alpha,C")
    for name, P, m, radii in cases:
        r = fit_exponent(P, m, radii, a.samples, a.seed)
        print(f"{name},{r.fitted_alpha:.4f},{r.fitted_C:.4g}", flush=True)


if __name__ == "__main__":
    main()
