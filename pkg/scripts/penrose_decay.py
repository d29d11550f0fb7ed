"""Density convergence and correction decay for the Penrose-type point sets."""

import argparse

from coulomb_lab.penrose import PHI, correction_decay, densities, density_ratios


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n-max", type=int, default=7)
    ap.add_argument("--grid-h", type=float, default=1 / 128)
    a = ap.parse_args()
    m = densities(0)[2]
    print(f"# limit density {m:.10f}; phi^-4 = {PHI ** -4:.6f}, phi^-3 = {PHI ** -3:.6f}")
    print("n,density_ratio")
    for n, r in enumerate(density_ratios(1, 12), start=1):
        print(f"{n},{r:.8f}")
    rows = correction_decay(a.n_max, a.grid_h)
    print("n,rhs_norm,grad_norm,rhs_ratio,grad_ratio")
    for prev, row in zip([None] + rows[:-1], rows):
        rr = row.rhs_norm / prev.rhs_norm if prev else float("nan")
        gr = row.grad_norm / prev.grad_norm if prev else float("nan")
        print(f"{row.n},{row.rhs_norm:.6e},{row.grad_norm:.6e},{rr:.5f},{gr:.5f}")


if __name__ == "__main__":
    main()
