"""Bottleneck ||phi||/N against window size for several defect families."""

import argparse

from coulomb_lab.gridflow import BlockWindow, column_graph_defects, row_defects, run_bijection, thinned_row_defects

FAMILIES = {
    "row": lambda w, N, s: row_defects(w, N),
    "column4": lambda w, N, s: column_graph_defects(w, N, s, 4),
    "column4N": lambda w, N, s: column_graph_defects(w, N, s, 4 * N),
    "thinned": lambda w, N, s: thinned_row_defects(w, N, s),
}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--windows", type=int, nargs="+", default=[16, 32, 64, 128])
    ap.add_argument("--N", type=int, nargs="+", default=[4, 8, 16])
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    ap.add_argument("--families", nargs="+", default=list(FAMILIES), choices=list(FAMILIES))
    a = ap.parse_args()
    print("family,N,seed,window,ratio,max_displacement")
    for fam in a.families:
        seeds = [0] if fam == "row" else a.seeds
        for N in a.N:
            for s in seeds:
                for n in a.windows:
                    w = BlockWindow.centered(n)
                    r = run_bijection(FAMILIES[fam](w, N, s), w, N)
                    print(f"{fam},{N},{s},{n},{r.bottleneck / N:.4f},{r.bijection.max_displacement:.4f}", flush=True)


if __name__ == "__main__":
    main()
