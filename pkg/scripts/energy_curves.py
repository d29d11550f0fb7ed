"""Normalized window energies for V1 and H1, and the ring flux bound."""

import argparse

from coulomb_lab.fields import make_H1, make_V1
from coulomb_lab.pointsets import Box, gen_ring_counterexample
from coulomb_lab.renorm_energy import energy_curve, flux_energy_curve, raw_growth_exponent


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--radii", type=float, nargs="+", default=[10, 20, 40, 80])
    ap.add_argument("--profile", choices=("linear", "cubic"), default="linear")
    a = ap.parse_args()
    dom = Box.square(max(a.radii) + 10)
    for f in (make_V1(dom), make_H1(dom)):
        cur = energy_curve(f, a.radii, profile=a.profile)
        print(f"# {cur.label}: {cur.classification}, exponent {cur.growth_exponent:.4f}, log^2 coefficient {cur.log2_coef:.4f}")
        print(cur.to_csv(), end="", flush=True)
    ring = gen_ring_counterexample(0.0, 0.3, 24)
    cur = flux_energy_curve(ring, 0.0, [4.0 * k + 2 for k in (2, 4, 8, 16, 20)])
    print(f"# {cur.label}: {cur.classification}, raw exponent {raw_growth_exponent(cur):.4f}")
    print(cur.to_csv(), end="")


if __name__ == "__main__":
    main()
