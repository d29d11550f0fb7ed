"""W over the fundamental domain of the modular group."""

import argparse

import numpy as np

from coulomb_lab.perfect_lattice import fundamental_domain_scan


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--nx", type=int, default=21)
    ap.add_argument("--ny", type=int, default=20)
    ap.add_argument("--y-max", type=float, default=2.0)
    a = ap.parse_args()
    taus, W = fundamental_domain_scan(a.nx, a.ny, a.y_max)
    i = int(np.argmin(W))
    print(f"# minimum W = {W[i]:.10f} at tau = {taus[i].real:+.4f}{taus[i].imag:+.4f}i")
    print("re_tau,im_tau,W")
    for t, w in zip(taus, W):
        print(f"{t.real:.6f},{t.imag:.6f},{w:.10f}")


if __name__ == "__main__":
    main()
