"""Command line entry point: ``lab <subcommand> ...``.

Exit status: 0 success, 2 invalid input, 3 numerical defect, 4 block size N
too small for the flow.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import dataclass

import numpy as np

from coulomb_lab.errors import BlockSizeTooSmall, LabError, NumericalDefect

EXIT_OK, EXIT_INVALID, EXIT_DEFECT, EXIT_N_SMALL = 0, 2, 3, 4

log = logging.getLogger("coulomb_lab")


@dataclass
class RunConfig:
    command: str
    args: argparse.Namespace
    seed: int = 0
    out: str | None = None
    format: str = "json"


def parse_radii(spec: str) -> list[float]:
    """'a:b:geomK' (K geometric steps), 'a:b:linK', or a comma list."""
    if ":" not in spec:
        try:
            r = [float(x) for x in spec.split(",") if x]
        except ValueError:
            raise LabError(f"bad radii list {spec!r}")
    else:
        try:
            a, b, kind = spec.split(":")
            a, b = float(a), float(b)
        except ValueError:
            raise LabError(f"bad radii grammar {spec!r}; expected a:b:geomK or a:b:linK")
        for pre, fn in (("geom", np.geomspace), ("lin", np.linspace)):
            if kind.startswith(pre):
                try:
                    k = int(kind[len(pre):])
                except ValueError:
                    raise LabError(f"bad step count in {spec!r}")
                if k < 2 or not 0 < a < b:
                    raise LabError(f"need 0 < a < b and at least 2 steps in {spec!r}")
                r = [float(x) for x in fn(a, b, k)]
                break
        else:
            raise LabError(f"unknown spacing {kind!r}")
    if not r or any(x <= 0 for x in r) or any(y <= x for x, y in zip(r, r[1:])):
        raise LabError("radii must be positive and strictly increasing")
    return r


def _vec(s: str) -> tuple[float, float]:
    try:
        a, b = (float(x) for x in s.split(","))
    except ValueError:
        raise LabError(f"expected 'x,y', got {s!r}")
    return a, b


def _emit(text: str, out: str | None):
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")


def _positive(name, v):
    if not v > 0:
        raise LabError(f"--{name} must be positive")


# -- subcommands -------------------------------------------------------------------------------


def cmd_generate(a) -> str:
    from coulomb_lab import pointsets as ps
    from coulomb_lab.penrose import penrose_points

    kind = a.kind.lower()
    if kind == "ring":
        P = ps.gen_ring_counterexample(a.m, a.eps, a.kmax)
    elif kind == "penrose":
        P = penrose_points(a.n)
    else:
        _positive("window", a.window)
        box = ps.Box.square(a.window)
        if kind in ("bravais", "triangular"):
            if kind == "triangular":
                u, v = ps.triangular_basis()
            else:
                u, v = _vec(a.u), _vec(a.v)
            P = ps.gen_bravais(u, v, box, normalize=a.normalize or kind == "triangular")
        else:
            names = {k.lower(): k for k in ps.NAMED_KINDS}
            if kind not in names or kind == "z2_minus_a":
                raise LabError(f"unknown kind {a.kind!r}")
            P = ps.gen_named(names[kind], box)
    return P.to_csv() if a.format == "csv" else P.to_json()


def _load_points(path: str):
    from coulomb_lab.pointsets import PointSet

    try:
        with open(path) as fh:
            return PointSet.from_json(fh.read())
    except (OSError, json.JSONDecodeError, KeyError) as e:
        raise LabError(f"cannot read point set {path!r}: {e}")


def cmd_discrepancy(a) -> str:
    from coulomb_lab.discrepancy import fit_exponent

    P = _load_points(a.inp)
    rep = fit_exponent(P, a.m, parse_radii(a.radii), a.samples, a.seed)
    sys.stderr.write(f"fitted C={rep.fitted_C:.6g} alpha={rep.fitted_alpha:.6g}\n")
    return rep.to_csv() if a.format == "csv" else rep.to_json()


def _make_field(a, Rmax: float):
    from coulomb_lab import fields
    from coulomb_lab.pointsets import Box, gen_named

    dom = Box.square(Rmax + 1)
    name = a.field.lower()
    if name == "v1":
        return fields.make_V1(dom)
    if name == "h1":
        return fields.make_H1(dom, a.tol, "digamma" if a.fast else "series")
    if name == "z2":
        return fields.make_Z2(dom)
    if name == "multiscale":
        K = a.K
        R = fields.scale_radius(K)
        P = gen_named("Z2", Box.square(Rmax + R + 2))
        return fields.make_multiscale(P, 1.0, K)
    raise LabError(f"unknown field {a.field!r}")


def cmd_energy(a) -> str:
    from coulomb_lab import renorm_energy as re_

    radii = parse_radii(a.radii)
    if a.flux_bound:
        if not a.inp:
            raise LabError("--flux-bound needs --in with a point set")
        cur = re_.flux_energy_curve(_load_points(a.inp), a.m, radii, a.r_min)
    else:
        f = _make_field(a, radii[-1])
        if a.delta is not None:
            _positive("delta", a.delta)
        cur = re_.energy_curve(f, radii, a.delta, a.h, a.profile, a.quad_n)
    sys.stderr.write(f"classification={cur.classification} exponent={cur.growth_exponent:.6g}\n")
    return cur.to_csv() if a.format == "csv" else cur.to_json()


def cmd_perfect(a) -> str:
    from coulomb_lab import perfect_lattice as pl

    _positive("tol", a.tol)
    name = a.lattice.lower()
    if name == "square":
        b = pl.square_basis()
    elif name == "triangular":
        b = pl.triangular_basis()
    elif name == "tau":
        x, y = _vec(a.tau)
        b = pl.basis_from_tau(complex(x, y))
    elif name == "basis":
        b = pl.LatticeBasis(_vec(a.u), _vec(a.v)).normalized()
    else:
        raise LabError(f"unknown lattice {a.lattice!r}")
    W = pl.perfect_W_ewald(b, a.tol)
    W2 = pl.perfect_W_extrapolate(b)
    sys.stderr.write(f"W={W:.8g} cross_check_delta={abs(W - W2):.3g}\n")
    doc = {"schema": "v1", "basis": b.to_dict(), "W": W, "method": "ewald", "tol": a.tol,
           "cross_check_delta": abs(W - W2)}
    if a.format == "csv":
        return "ux,uy,vx,vy,W,cross_check_delta\n" + ",".join(
            repr(x) for x in (*b.u, *b.v, W, abs(W - W2))) + "\n"
    return json.dumps(doc)


def cmd_flow(a) -> str:
    from coulomb_lab import gridflow as gf

    if a.N < 1 or a.window_blocks < 3:
        raise LabError("need --N >= 1 and --window-blocks >= 3")
    w = gf.BlockWindow.centered(a.window_blocks)
    kind = a.defects.lower()
    if kind == "row":
        A = gf.row_defects(w, a.N)
    elif kind == "column":
        A = gf.column_graph_defects(w, a.N, a.seed)
    elif kind == "thinned":
        A = gf.thinned_row_defects(w, a.N, a.seed)
    elif kind == "point":
        A = np.array([[0, 0]], dtype=np.int64)
    elif kind == "none":
        A = np.zeros((0, 2), dtype=np.int64)
    else:
        raise LabError(f"unknown defect family {a.defects!r}")
    run = gf.run_bijection(A, w, a.N)
    sys.stderr.write(f"bottleneck={run.bottleneck} ratio={run.bottleneck / a.N:.6g} "
                     f"max_displacement={run.bijection.max_displacement:.6g}\n")
    if a.phi_out:
        with open(a.phi_out, "w", newline="") as fh:
            fh.write(run.phi.to_csv())
    if a.format == "json":
        return json.dumps({"schema": "v1", "N": a.N, "window_blocks": a.window_blocks, "defects": kind,
                           "bottleneck": int(run.bottleneck),
                           "max_displacement": run.bijection.max_displacement,
                           "pairs": np.column_stack([run.bijection.src, run.bijection.dst]).tolist()})
    return run.bijection.to_csv()


def cmd_penrose(a) -> str:
    from coulomb_lab import penrose as pr

    if a.decay:
        rows = pr.correction_decay(a.n_max, a.grid_h)
        if a.format == "csv":
            return pr.decay_csv(rows)
        return json.dumps({"schema": "v1", "rows": [r.__dict__ for r in rows]})
    if a.n < 0:
        raise LabError("--n must be >= 0")
    u1, u2 = pr.tile_counts(a.n)
    mn, qn, m = pr.densities(a.n)
    if a.format == "csv":
        return "n,u_type1,u_type2,m_n,q_n,m\n" + f"{a.n},{u1},{u2},{mn!r},{qn!r},{m!r}\n"
    return json.dumps({"schema": "v1", "n": a.n, "counts": [u1, u2], "m_n": mn, "q_n": qn, "m": m})


# -- parser ------------------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lab", description="Renormalized Coulomb energy toolkit.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, fmt="json"):
        sp.add_argument("--out", default=None)
        sp.add_argument("--format", choices=("csv", "json"), default=fmt)
        sp.add_argument("--seed", type=int, default=0)

    g = sub.add_parser("generate", help="emit a point configuration")
    g.add_argument("--kind", required=True)
    g.add_argument("--window", type=float, default=16.0, help="half-width of the square window")
    g.add_argument("--u", default="1,0")
    g.add_argument("--v", default="0,1")
    g.add_argument("--normalize", action="store_true")
    g.add_argument("--m", type=float, default=0.0)
    g.add_argument("--eps", type=float, default=0.3)
    g.add_argument("--kmax", type=int, default=16)
    g.add_argument("--n", type=int, default=4)
    common(g)

    d = sub.add_parser("discrepancy", help="ball-count discrepancy and exponent fit")
    d.add_argument("--in", dest="inp", required=True)
    d.add_argument("--m", type=float, required=True)
    d.add_argument("--radii", required=True)
    d.add_argument("--samples", type=int, default=64)
    common(d, "csv")

    e = sub.add_parser("energy", help="energy curve of an explicit field")
    e.add_argument("--field", default="v1")
    e.add_argument("--radii", required=True)
    e.add_argument("--delta", type=float, default=None)
    e.add_argument("--h", type=float, default=None)
    e.add_argument("--profile", choices=("linear", "cubic"), default="linear")
    e.add_argument("--quad-n", type=int, default=16)
    e.add_argument("--tol", type=float, default=1e-10)
    e.add_argument("--fast", action="store_true", help="closed-form evaluator for H1")
    e.add_argument("--K", type=int, default=6)
    e.add_argument("--flux-bound", action="store_true")
    e.add_argument("--in", dest="inp", default=None)
    e.add_argument("--m", type=float, default=0.0)
    e.add_argument("--r-min", type=float, default=1.0)
    common(e, "csv")

    pf = sub.add_parser("perfect", help="perfect-lattice energy")
    pf.add_argument("--lattice", default="triangular")
    pf.add_argument("--tau", default="0,1")
    pf.add_argument("--u", default="1,0")
    pf.add_argument("--v", default="0,1")
    pf.add_argument("--tol", type=float, default=1e-12)
    common(pf)

    fl = sub.add_parser("flow", help="bounded flow and bijection for defected Z^2")
    fl.add_argument("--defects", default="row")
    fl.add_argument("--window-blocks", type=int, default=16)
    fl.add_argument("--N", type=int, default=8)
    fl.add_argument("--phi-out", default=None)
    common(fl, "csv")

    pe = sub.add_parser("penrose", help="inflation counts, densities, correction decay")
    pe.add_argument("--n", type=int, default=4)
    pe.add_argument("--decay", action="store_true")
    pe.add_argument("--n-max", type=int, default=6)
    pe.add_argument("--grid-h", type=float, default=1 / 128)
    common(pe)
    return p


COMMANDS = {
    "generate": cmd_generate,
    "discrepancy": cmd_discrepancy,
    "energy": cmd_energy,
    "perfect": cmd_perfect,
    "flow": cmd_flow,
    "penrose": cmd_penrose,
}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        a = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_INVALID
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING, stream=sys.stderr)
    cfg = RunConfig(a.command, a, a.seed, a.out, a.format)
    try:
        text = COMMANDS[cfg.command](a)
        _emit(text, cfg.out)
    except BlockSizeTooSmall as e:
        sys.stderr.write(f"error: {e}\n")
        return EXIT_N_SMALL
    except LabError as e:
        sys.stderr.write(f"error: {e}\n")
        return EXIT_INVALID
    except NumericalDefect as e:
        sys.stderr.write(f"numerical defect: {e}\n")
        return EXIT_DEFECT
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
