"""Robinson-triangle inflation, tile counts, densities and correction decay.

Type 1 has sides (1, 1, phi) with apex angle 108 degrees; type 2 has sides
(phi, phi, 1) with apex angle 36 degrees. Vertices are stored as
(apex, B, C) with the two legs apex-B and apex-C.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from decimal import Decimal, getcontext

import numpy as np
from scipy.spatial import cKDTree

from coulomb_lab.errors import LabError, NumericalDefect
from coulomb_lab.pointsets import Box, PointSet

PHI = (1 + math.sqrt(5.0)) / 2
TYPE1, TYPE2 = 1, 2


def cross2(a, b):
    """z-component of the cross product of planar vectors (broadcasting)."""
    a, b = np.asarray(a), np.asarray(b)
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def heron(a: float, b: float, c: float) -> float:
    s = (a + b + c) / 2
    return math.sqrt(s * (s - a) * (s - b) * (s - c))


AREA1 = heron(1.0, 1.0, PHI)
AREA2 = heron(PHI, PHI, 1.0)


@dataclass
class RobinsonTriangle:
    kind: int
    vertices: np.ndarray  # (3, 2): apex, B, C
    generation: int = 0

    def sides(self) -> list[float]:
        a, b, c = self.vertices
        return sorted([float(np.linalg.norm(b - a)), float(np.linalg.norm(c - a)), float(np.linalg.norm(c - b))])

    def area(self) -> float:
        a, b, c = self.vertices
        return 0.5 * abs(float(cross2(b - a, c - a)))

    def point(self, bary) -> np.ndarray:
        return np.asarray(bary, float) @ self.vertices


@dataclass
class Tiling:
    kinds: np.ndarray     # (n,) int
    verts: np.ndarray     # (n, 3, 2)
    generation: int = 0
    anchors: dict = field(default_factory=lambda: {TYPE1: (1 / 3, 1 / 3, 1 / 3), TYPE2: (1 / 3, 1 / 3, 1 / 3)})

    def __len__(self) -> int:
        return len(self.kinds)

    @property
    def triangles(self) -> list[RobinsonTriangle]:
        return [RobinsonTriangle(int(k), v, self.generation) for k, v in zip(self.kinds, self.verts)]

    def areas(self) -> np.ndarray:
        a, b, c = self.verts[:, 0], self.verts[:, 1], self.verts[:, 2]
        return 0.5 * np.abs(cross2(b - a, c - a))

    def counts(self) -> tuple[int, int]:
        return int((self.kinds == TYPE1).sum()), int((self.kinds == TYPE2).sum())

    def distinguished(self) -> np.ndarray:
        out = np.empty((len(self), 2))
        for k in (TYPE1, TYPE2):
            sel = self.kinds == k
            out[sel] = np.einsum("i,nij->nj", np.asarray(self.anchors[k], float), self.verts[sel])
        return out

    def to_json(self) -> str:
        return json.dumps({
            "schema": "v1",
            "generation": self.generation,
            "triangles": [{"kind": int(k), "vertices": v.tolist()} for k, v in zip(self.kinds, self.verts)],
        })


def seed_tiling(kind: int = TYPE1, anchor=(1 / 3, 1 / 3, 1 / 3)) -> Tiling:
    """A single tile with horizontal base, translated so that its anchor is the origin."""
    if kind == TYPE1:
        leg, base = 1.0, PHI
    elif kind == TYPE2:
        leg, base = PHI, 1.0
    else:
        raise LabError("kind must be 1 or 2")
    hgt = math.sqrt(leg * leg - base * base / 4)
    V = np.array([[0.0, hgt], [-base / 2, 0.0], [base / 2, 0.0]])
    V -= np.asarray(anchor, float) @ V
    return Tiling(np.array([kind]), V[None], 0, {TYPE1: tuple(anchor), TYPE2: tuple(anchor)})


def _split_type1(A, B, C):
    """Inflated type 1 (apex A, legs phi, base phi^2) -> (type2, type1) children."""
    D = B + (C - B) / PHI
    return (TYPE2, np.stack([B, A, D], axis=1)), (TYPE1, np.stack([D, A, C], axis=1))


def inflate(t: Tiling) -> Tiling:
    """Scale by phi about the origin and substitute every tile."""
    V = t.verts * PHI
    kinds, verts = [], []
    s1 = t.kinds == TYPE1
    if s1.any():
        A, B, C = V[s1, 0], V[s1, 1], V[s1, 2]
        for k, v in _split_type1(A, B, C):
            kinds.append(np.full(len(A), k))
            verts.append(v)
    s2 = t.kinds == TYPE2
    if s2.any():
        A, B, C = V[s2, 0], V[s2, 1], V[s2, 2]
        D = C + (A - C) / PHI ** 2
        kinds.append(np.full(len(A), TYPE2))
        verts.append(np.stack([B, C, D], axis=1))
        # the remaining gnomon (D, A, B) is a type 1 tile at the inflated scale
        for k, v in _split_type1(D, A, B):
            kinds.append(np.full(len(A), k))
            verts.append(v)
    return Tiling(np.concatenate(kinds), np.concatenate(verts), t.generation + 1, dict(t.anchors))


def inflate_n(n: int, kind: int = TYPE1, anchors=None) -> Tiling:
    if n < 0:
        raise LabError("n must be >= 0")
    a1 = (1 / 3, 1 / 3, 1 / 3) if anchors is None else anchors[TYPE1]
    t = seed_tiling(kind, a1)
    if anchors is not None:
        t.anchors = dict(anchors)
    for _ in range(n):
        t = inflate(t)
    return t


def check_tiling(t: Tiling, tol: float = 1e-9) -> None:
    """Side lengths of the unit-scale leaves; raises NumericalDefect on failure."""
    want = {TYPE1: sorted([1.0, 1.0, PHI]), TYPE2: sorted([1.0, PHI, PHI])}
    for k in (TYPE1, TYPE2):
        V = t.verts[t.kinds == k]
        if not len(V):
            continue
        s = np.sort(np.stack([np.linalg.norm(V[:, 1] - V[:, 0], axis=1),
                              np.linalg.norm(V[:, 2] - V[:, 0], axis=1),
                              np.linalg.norm(V[:, 2] - V[:, 1], axis=1)], axis=1), axis=1)
        if np.abs(s - np.array(want[k])).max() > tol * PHI ** t.generation:
            raise NumericalDefect(f"type {k} tiles have wrong side lengths")


def _in_triangles(X: np.ndarray, V: np.ndarray, eps: float = 0.0) -> np.ndarray:
    """Mask (len(X), len(V)) of points strictly inside each triangle (by margin eps)."""
    a, b, c = V[:, 0], V[:, 1], V[:, 2]
    def side(p, q):
        return cross2((q - p)[None, :, :], X[:, None, :] - p[None, :, :])
    s1, s2, s3 = side(a, b), side(b, c), side(c, a)
    pos = (s1 > eps) & (s2 > eps) & (s3 > eps)
    neg = (s1 < -eps) & (s2 < -eps) & (s3 < -eps)
    return pos | neg


def check_disjoint(t: Tiling, samples_per_tile: int = 3, seed: int = 0) -> bool:
    """Sampled check that tile interiors do not overlap."""
    rng = np.random.default_rng(seed)
    cen = t.verts.mean(axis=1)
    tree = cKDTree(cen)
    for _ in range(samples_per_tile):
        w = rng.dirichlet((1, 1, 1), len(t))
        X = np.einsum("ni,nij->nj", w, t.verts)
        nb = tree.query_ball_point(X, 2 * PHI)
        for i, lst in enumerate(nb):
            others = [j for j in lst if j != i]
            if others and _in_triangles(X[i:i + 1], t.verts[others], 1e-12).any():
                return False
    return True


def bounding_box(t: Tiling) -> Box:
    P = t.verts.reshape(-1, 2)
    return Box.from_bounds(P.min(axis=0), P.max(axis=0))


def outer_triangle(n: int, anchor=(1 / 3, 1 / 3, 1 / 3)) -> np.ndarray:
    """Vertices (apex, B, C) of phi^n times the seed tile; the base BC stays horizontal."""
    return seed_tiling(TYPE1, anchor).verts[0] * PHI ** n


def inscribed_box(n: int, anchor=(1 / 3, 1 / 3, 1 / 3)) -> Box:
    """Largest axis-aligned box inside phi^n Omega_1: half the base by half the height."""
    A, B, C = outer_triangle(n, anchor)
    L = C[0] - B[0]
    H = A[1] - B[1]
    return Box(((B[0] + C[0]) / 2, B[1] + H / 4), (L / 4, H / 4))


def penrose_points(n: int, p1_bary=(1 / 3, 1 / 3, 1 / 3), p2_bary=(1 / 3, 1 / 3, 1 / 3)) -> PointSet:
    """Distinguished points of the leaves of n inflations of a type 1 seed.

    The window is the bounding box of phi^n Omega_1, which holds every point.
    """
    for b in (p1_bary, p2_bary):
        b = np.asarray(b, float)
        if b.shape != (3,) or not np.all(b > 0) or not math.isclose(b.sum(), 1.0, rel_tol=1e-12):
            raise LabError("barycentric anchors must be positive and sum to 1")
    t = inflate_n(n, TYPE1, {TYPE1: tuple(p1_bary), TYPE2: tuple(p2_bary)})
    pts = t.distinguished()
    return PointSet(pts, np.ones(len(pts)), bounding_box(t), f"penrose n={n}")


def anchor_boundary_distance(kind: int, bary) -> float:
    V = seed_tiling(kind).verts[0]
    p = np.asarray(bary, float) @ V
    d = []
    for i in range(3):
        a, b = V[i], V[(i + 1) % 3]
        d.append(abs(float(cross2(b - a, p - a))) / float(np.linalg.norm(b - a)))
    return min(d)


# -- counts and densities ----------------------------------------------------------------------------


def u_sequence(n: int) -> list[int]:
    """u_0 .. u_n with u_0 = 1, u_1 = 0, u_{k+2} = u_{k+1} + u_k."""
    u = [1, 0]
    while len(u) <= n:
        u.append(u[-1] + u[-2])
    return u[: n + 1]


def v_sequence(n: int) -> list[int]:
    v = [0, 1]
    while len(v) <= n:
        v.append(v[-1] + v[-2])
    return v[: n + 1]


def u_closed_form(k: int, digits: int = 60) -> int:
    """Nearest integer to phi^k/(phi+2) + (-phi)^(-k) (phi+1)/(phi+2), in high precision."""
    getcontext().prec = digits + 2 * k // 4 + 10
    phi = (1 + Decimal(5).sqrt()) / 2
    val = phi ** k / (phi + 2) + (-phi) ** (-k) * (phi + 1) / (phi + 2)
    return int(val.to_integral_value())


def tile_counts(n: int) -> tuple[int, int]:
    """(u_{2n}, u_{2n+1}): numbers of type 1 and type 2 leaves after n inflations of a type 1 tile."""
    if n < 0:
        raise LabError("n must be >= 0")
    u = u_sequence(2 * n + 1)
    a, b = u[2 * n], u[2 * n + 1]
    if (a, b) != (u_closed_form(2 * n), u_closed_form(2 * n + 1)):
        raise NumericalDefect("recurrence and closed form disagree")
    return a, b


def _dec_areas():
    getcontext().prec = 60
    s5 = Decimal(5).sqrt()
    phi = (1 + s5) / 2

    def her(a, b, c):
        s = (a + b + c) / 2
        return (s * (s - a) * (s - b) * (s - c)).sqrt()

    one = Decimal(1)
    return phi, her(one, one, phi), her(phi, phi, one)


def densities(n: int, as_decimal: bool = False):
    """(m_n, q_n, m): point densities of phi^n Omega_1, phi^n Omega_2 and the limit."""
    if n < 0:
        raise LabError("n must be >= 0")
    phi, A1, A2 = _dec_areas()
    u = u_sequence(2 * n + 1)
    v = v_sequence(2 * n + 1)
    a, b = Decimal(u[2 * n]), Decimal(u[2 * n + 1])
    c, d = Decimal(v[2 * n]), Decimal(v[2 * n + 1])
    mn = (a + b) / (a * A1 + b * A2)
    qn = (c + d) / (c * A1 + d * A2)
    m = (1 + phi) / (A1 + phi * A2)
    if as_decimal:
        return mn, qn, m
    return float(mn), float(qn), float(m)


def density_ratios(n_lo: int, n_hi: int) -> list[float]:
    """(m_{n+1} - m)/(m_n - m) for n_lo <= n <= n_hi."""
    out = []
    for n in range(n_lo, n_hi + 1):
        a, _, m = densities(n, True)
        b, _, _ = densities(n + 1, True)
        out.append(float((b - m) / (a - m)))
    return out


# -- correction decay ----------------------------------------------------------------------------------


def _children_of_outer(n: int):
    """The two children (type1, type2) of phi^n Omega_1 with vertex arrays."""
    V = outer_triangle(n)
    A, B, C = V
    D = B + (C - B) / PHI
    return np.array([D, A, C]), np.array([B, A, D])  # type 1 child, type 2 child


def _rasterize(n: int, grid_h: float):
    """Cell centers of a grid of spacing grid_h * phi^n inside phi^n Omega_1, with child labels."""
    h = grid_h * PHI ** n
    V = outer_triangle(n)
    lo, hi = V.min(axis=0), V.max(axis=0)
    nx = int(math.ceil((hi[0] - lo[0]) / h))
    ny = int(math.ceil((hi[1] - lo[1]) / h))
    xs = lo[0] + (np.arange(nx) + 0.5) * h
    ys = lo[1] + (np.arange(ny) + 0.5) * h
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    P = np.column_stack([X.ravel(), Y.ravel()])
    T1, T2 = _children_of_outer(n)
    in1 = _in_triangles(P, T1[None])[:, 0]
    in2 = _in_triangles(P, T2[None])[:, 0] & ~in1
    label = np.zeros(nx * ny, np.int8)
    label[in1] = 1
    label[in2] = 2
    return label.reshape(nx, ny), h


def _neumann_apply(u: np.ndarray, mask: np.ndarray, nbr: list, h: float) -> np.ndarray:
    out = np.zeros_like(u)
    for (sa, sb), both in nbr:
        d = np.where(both, u[sa] - u[sb], 0.0)
        out[sa] += d
        out[sb] -= d
    return out / (h * h)


def neumann_poisson(mask: np.ndarray, f: np.ndarray, h: float, rtol: float = 1e-10, maxiter: int = 100000):
    """Solve -Laplace u = f on the cells of mask with zero-flux walls (5-point stencil).

    f must have zero sum over the mask. Conjugate gradients with the constant
    nullspace projected out; returns u with zero mean.
    """
    M = mask
    nbr = [((np.s_[:-1, :], np.s_[1:, :]), M[:-1, :] & M[1:, :]),
           ((np.s_[:, :-1], np.s_[:, 1:]), M[:, :-1] & M[:, 1:])]
    n = int(M.sum())

    def proj(x):
        x = np.where(M, x, 0.0)
        return np.where(M, x - x[M].sum() / n, 0.0)

    b = proj(f)
    if abs(f[M].sum()) > 1e-12 * max(1.0, np.abs(f[M]).sum()):
        raise NumericalDefect("right-hand side is not mean-zero")
    u = np.zeros_like(b)
    r = b.copy()
    p = r.copy()
    rr = float((r * r).sum())
    bn = math.sqrt(float((b * b).sum()))
    if bn == 0:
        return u, 0
    it = 0
    while math.sqrt(rr) > rtol * bn and it < maxiter:
        Ap = _neumann_apply(p, M, nbr, h)
        a = rr / float((p * Ap).sum())
        u += a * p
        r -= a * Ap
        r = proj(r)
        rn = float((r * r).sum())
        p = r + (rn / rr) * p
        rr = rn
        it += 1
    if math.sqrt(rr) > rtol * bn:
        raise NumericalDefect("conjugate gradients did not converge")
    return proj(u), it


def grad_sup(u: np.ndarray, mask: np.ndarray, h: float) -> float:
    """sup over cells of |grad u| from averaged one-sided differences inside the mask."""
    def axis_grad(ax):
        g = np.zeros_like(u)
        c = np.zeros_like(u)
        s0 = [slice(None)] * 2
        s1 = [slice(None)] * 2
        s0[ax] = slice(None, -1)
        s1[ax] = slice(1, None)
        s0, s1 = tuple(s0), tuple(s1)
        both = mask[s0] & mask[s1]
        d = np.where(both, (u[s1] - u[s0]) / h, 0.0)
        g[s0] += d
        g[s1] += d
        c[s0] += both
        c[s1] += both
        return np.where(c > 0, g / np.maximum(c, 1), 0.0)

    gx, gy = axis_grad(0), axis_grad(1)
    return float(np.sqrt(gx * gx + gy * gy)[mask].max())


@dataclass
class DecayRow:
    n: int
    rhs_norm: float
    grad_norm: float
    iterations: int = 0


def correction_decay(n_max: int, grid_h: float = 1 / 128) -> list[DecayRow]:
    """Per n: size of the correction right-hand side and sup of the gradient of its Neumann solution.

    grid_h is relative: the mesh at scale n is grid_h * phi^n, so every
    level is resolved by the same number of cells.
    """
    if not 1 <= n_max <= 8:
        raise LabError("n_max must lie in 1..8")
    if not 0 < grid_h <= 0.1:
        raise LabError("grid_h must lie in (0, 0.1]")
    rows = []
    for n in range(1, n_max + 1):
        mn, _, _ = densities(n, True)
        mp, qp, _ = densities(n - 1, True)
        c1, c2 = mn - mp, mn - qp
        rhs = float(max(abs(c1), abs(c2)))
        label, h = _rasterize(n, grid_h)
        mask = label > 0
        f = np.where(label == 1, float(c1), 0.0) + np.where(label == 2, float(c2), 0.0)
        # the staircase changes the child areas, so restore a zero total
        f = np.where(mask, f - f[mask].mean(), 0.0)
        u, it = neumann_poisson(mask, f, h)
        rows.append(DecayRow(n, rhs, grad_sup(u, mask, h), it))
    return rows


def decay_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "rhs_norm", "grad_norm"])
    for r in rows:
        w.writerow([r.n, repr(r.rhs_norm), repr(r.grad_norm)])
    return buf.getvalue()
