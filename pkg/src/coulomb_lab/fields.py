"""Explicit vector fields j with -div j = 2 pi (sum_p alpha_p delta_p - m).

Sign convention: near a registered point p with coefficient alpha,
j(x) = -alpha (x-p)/|x-p|^2 + bounded, i.e. j = grad U for a potential U that
behaves like -alpha log|x-p|. Away from the points div j = 2 pi m.

Plane vectors (a, b) are identified with complex numbers a + ib. For a
holomorphic F the gradient of Re F is conj(F').
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field as dc_field
from typing import Callable

import numpy as np
from scipy.spatial import cKDTree
from scipy.special import psi

from coulomb_lab.errors import LabError
from coulomb_lab.perfect_lattice import periodic_potential_grad, square_basis
from coulomb_lab.pointsets import Box, PointSet

EULER_GAMMA = 0.57721566490153286061


@dataclass
class SingularField:
    """A vector field evaluator with its singular-point registry.

    ``domain`` is the box in which the registry is complete and the evaluator
    is valid; ``None`` means the whole plane.
    """

    evaluate: Callable[[np.ndarray], np.ndarray]
    points: np.ndarray
    alphas: np.ndarray
    background: float
    label: str = ""
    tail_error: float = 0.0
    domain: Box | None = None
    meta: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        self.points = np.asarray(self.points, float).reshape(-1, 2)
        self.alphas = np.asarray(self.alphas, float).reshape(-1)
        if len(self.points) != len(self.alphas):
            raise LabError("registry points and coefficients differ in length")

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, float)
        out = self.evaluate(x.reshape(-1, 2))
        return out.reshape(x.shape)

    def registry_in(self, box: Box) -> tuple[np.ndarray, np.ndarray]:
        if self.domain is not None and not self.domain.contains_box(box):
            raise LabError(f"registry of {self.label!r} is incomplete outside {self.domain}")
        keep = box.contains(self.points) if len(self.points) else np.zeros(0, bool)
        return self.points[keep], self.alphas[keep]

    def registry_json(self) -> str:
        return json.dumps({
            "schema": "v1",
            "label": self.label,
            "background": self.background,
            "tail_error": self.tail_error,
            "domain": None if self.domain is None else self.domain.to_dict(),
            "points": self.points.tolist(),
            "alphas": self.alphas.tolist(),
        })


def _as_points(x) -> tuple[np.ndarray, tuple]:
    x = np.asarray(x, float)
    if x.shape[-1] != 2:
        raise LabError("points must have a trailing dimension of 2")
    return x.reshape(-1, 2), x.shape


def _check_away(X: np.ndarray, sing: np.ndarray, what: str):
    if np.any(sing):
        i = int(np.argmax(sing))
        raise LabError(f"{what}: evaluation at singular point {X[i].tolist()}")


# -- the 1-periodic field for Z ---------------------------------------------------------


def _cot_pi(z: np.ndarray) -> np.ndarray:
    """cot(pi z), stable for large |Im z|."""
    flip = z.imag < 0
    w = np.where(flip, np.conj(z), z)
    q = np.exp(2j * np.pi * w)
    c = 1j * (q + 1) / (q - 1)
    return np.where(flip, np.conj(c), c)


def field_V1(x) -> np.ndarray:
    """Gradient of V1 = -log|sin(pi z)|, the 1-periodic field with charges at Z x {0}."""
    X, shp = _as_points(x)
    z = X[:, 0] + 1j * X[:, 1]
    _check_away(X, (X[:, 1] == 0) & (X[:, 0] == np.rint(X[:, 0])), "field_V1")
    g = np.conj(-np.pi * _cot_pi(z))
    return np.column_stack([g.real, g.imag]).reshape(shp)


def _integer_axis_points(lo: float, hi: float, kmin: int | None = None) -> np.ndarray:
    a = math.ceil(lo) if kmin is None else max(math.ceil(lo), kmin)
    k = np.arange(a, math.floor(hi) + 1, dtype=float)
    return np.column_stack([k, np.zeros_like(k)])


def make_V1(domain: Box) -> SingularField:
    pts = _integer_axis_points(domain.lo[0], domain.hi[0])
    if not (domain.lo[1] <= 0 <= domain.hi[1]):
        pts = pts[:0]
    return SingularField(field_V1, pts, np.ones(len(pts)), 0.0, "V1 (Z)", 0.0, domain)


# -- the Weierstrass field for N -----------------------------------------------------------


# Euler-Maclaurin remainder after the B4 term is below EM_BOUND / K^6 once K >= 2|z|
EM_BOUND = 0.52


def h1_complex_series(z: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """f(z) = sum_{k>=1} z/(k(k-z)) by a partial sum plus an asymptotic tail.

    The partial sum runs to K = ceil(2|z|) + T. The tail is the integral
    -log(1 - z/K) with Euler-Maclaurin corrections through the B4 term; T is
    the smallest value for which the remainder bound is below tol.
    """
    z = np.asarray(z, complex).reshape(-1)
    T = max(1, int(math.ceil((EM_BOUND / tol) ** (1 / 6))))
    K = np.ceil(2 * np.abs(z)).astype(np.int64) + T
    out = np.empty_like(z)
    # evaluate in groups sharing K up to a factor, so the k-range matrix stays small
    order = np.argsort(K)
    i = 0
    n = len(z)
    while i < n:
        Kmax = int(K[order[i]]) * 2
        j = int(np.searchsorted(K[order], Kmax, side="right"))
        idx = order[i:j]
        for c0 in range(0, len(idx), max(1, 2_000_000 // Kmax)):
            sub = idx[c0:c0 + max(1, 2_000_000 // Kmax)]
            zs = z[sub]
            Ks = K[sub]
            k = np.arange(1, int(Ks.max()) + 1, dtype=float)[None, :]
            terms = zs[:, None] / (k * (k - zs[:, None]))
            terms = np.where(k <= Ks[:, None], terms, 0)
            partial = terms.sum(axis=1)
            Kf = Ks.astype(float)
            g = 1 / (Kf - zs) - 1 / Kf
            g1 = -1 / (Kf - zs) ** 2 + 1 / Kf ** 2
            g3 = -6 / (Kf - zs) ** 4 + 6 / Kf ** 4
            tail = -np.log(1 - zs / Kf) - g / 2 - g1 / 12 + g3 / 720
            out[sub] = partial + tail
        i = j
    return out


def h1_complex_digamma(z: np.ndarray) -> np.ndarray:
    """Closed form f(z) = -gamma - digamma(1 - z)."""
    return -EULER_GAMMA - psi(1 - np.asarray(z, complex))


def field_H1(x, tol: float = 1e-10, method: str = "series") -> np.ndarray:
    """Gradient of H1 = -log|prod_{k>=1} (1 - z/k) e^{z/k}|, charges at (k, 0), k >= 1."""
    if tol <= 0:
        raise LabError("tol must be positive")
    X, shp = _as_points(x)
    _check_away(X, (X[:, 1] == 0) & (X[:, 0] == np.rint(X[:, 0])) & (X[:, 0] >= 1), "field_H1")
    z = X[:, 0] + 1j * X[:, 1]
    if method == "series":
        f = h1_complex_series(z, tol)
    elif method == "digamma":
        f = h1_complex_digamma(z)
    else:
        raise LabError(f"unknown method {method!r}")
    g = np.conj(f)
    return np.column_stack([g.real, g.imag]).reshape(shp)


def make_H1(domain: Box, tol: float = 1e-10, method: str = "digamma") -> SingularField:
    pts = _integer_axis_points(domain.lo[0], domain.hi[0], kmin=1)
    if not (domain.lo[1] <= 0 <= domain.hi[1]):
        pts = pts[:0]
    ev = lambda X: field_H1(X, tol, method)
    return SingularField(ev, pts, np.ones(len(pts)), 0.0, "H1 (N)", tol, domain, {"method": method})


def h1_partial_product_potential(z, n_terms: int) -> np.ndarray:
    """-log|prod_{k<=n} (1 - z/k) e^{z/k}| (truncated product)."""
    z = np.asarray(z, complex)
    k = np.arange(1, n_terms + 1, dtype=float)
    t = np.log(np.abs(1 - z[..., None] / k)) + (z[..., None] / k).real
    return -t.sum(axis=-1)


# -- the perfect square-lattice field and its relatives -------------------------------------


def make_Z2(domain: Box, tol: float = 1e-12) -> SingularField:
    b = square_basis()
    ev = lambda X: periodic_potential_grad(b, X, tol)
    s = domain._slack()
    xs = np.arange(math.ceil(domain.lo[0] - s), math.floor(domain.hi[0] + s) + 1)
    ys = np.arange(math.ceil(domain.lo[1] - s), math.floor(domain.hi[1] + s) + 1)
    P = np.array(np.meshgrid(xs, ys, indexing="ij")).reshape(2, -1).T.astype(float)
    return SingularField(ev, P, np.ones(len(P)), 1.0, "Z2 periodic", tol, domain)


def make_Z2_minus_Z(domain: Box, tol: float = 1e-12) -> SingularField:
    f = field_combine(make_Z2(domain, tol), make_V1(domain), -1)
    f.label = "Z2 minus Z"
    return f


# -- multiscale field ------------------------------------------------------------------------


def profile_dV(t: np.ndarray) -> np.ndarray:
    """Derivative of the radial profile V of the scale-k correction."""
    t = np.asarray(t, float)
    with np.errstate(divide="ignore"):
        return np.where(t <= 0.5, -3.0 * t, np.where(t <= 1.0, t - 1.0 / t, 0.0))


def scale_radius(k: int) -> float:
    return float(2 ** (k - 1))


def _pair_chunks(tree: cKDTree, X: np.ndarray, r: float, target: int = 4_000_000):
    """Yield (x-index, point-index) arrays for all pairs with |x - p| <= r, chunked by x."""
    density = max(1.0, tree.n / max(1e-300, _tree_area(tree)))
    per = max(1, int(target / (density * math.pi * r * r + 1)))
    for a in range(0, len(X), per):
        lists = tree.query_ball_point(X[a:a + per], r)
        lens = np.fromiter((len(l) for l in lists), dtype=np.int64, count=len(lists))
        if lens.sum() == 0:
            continue
        ii = np.repeat(np.arange(a, a + len(lists)), lens)
        jj = np.concatenate([np.asarray(l, dtype=np.int64) for l in lists if len(l)])
        yield ii, jj


def _tree_area(tree: cKDTree) -> float:
    span = tree.maxes - tree.mins
    return float(max(span[0], 1.0) * max(span[1], 1.0))


def grad_U1(P: PointSet, X: np.ndarray) -> np.ndarray:
    """Sum over p of the radial field (-1/r + r) e_r on B(p, 1)."""
    out = np.zeros_like(X)
    for ii, jj in _pair_chunks(P.tree, X, 1.0):
        d = X[ii] - P.points[jj]
        r2 = np.einsum("ij,ij->i", d, d)
        inside = r2 < 1.0
        with np.errstate(divide="ignore", invalid="ignore"):
            w = np.where(inside, -1.0 / r2 + 1.0, 0.0) * P.weights[jj]
        out += np.column_stack([np.bincount(ii, d[:, 0] * w, len(X)), np.bincount(ii, d[:, 1] * w, len(X))])
    return out


def grad_Uk(P: PointSet, k: int, X: np.ndarray) -> np.ndarray:
    """Sum over p of (1/R_k) V'(|x-p|/R_k) e_r."""
    if k < 2:
        raise LabError("scale index k must be >= 2")
    R = scale_radius(k)
    out = np.zeros_like(X)
    for ii, jj in _pair_chunks(P.tree, X, R):
        d = X[ii] - P.points[jj]
        r = np.hypot(d[:, 0], d[:, 1])
        with np.errstate(divide="ignore", invalid="ignore"):
            w = np.where(r > 0, profile_dV(r / R) / (R * r), 0.0) * P.weights[jj]
        out += np.column_stack([np.bincount(ii, d[:, 0] * w, len(X)), np.bincount(ii, d[:, 1] * w, len(X))])
    return out


def _check_multiscale_domain(P: PointSet, K: int, X: np.ndarray):
    R = scale_radius(K) if K >= 1 else 1.0
    inner = P.window.shrink(R) if min(P.window.halfwidths) > R else None
    if inner is None or not np.all(inner.contains(X)):
        raise LabError(f"points too close to the window boundary for scale K={K} (R_K={R})")


def field_multiscale(P: PointSet, m: float, K: int, x) -> np.ndarray:
    """grad U^1 + sum_{k=2}^K grad U^k for the configuration P."""
    if K < 1:
        raise LabError("K must be >= 1")
    X, shp = _as_points(x)
    _check_multiscale_domain(P, K, X)
    if len(P):
        d, _ = P.tree.query(X)
        _check_away(X, d == 0, "field_multiscale")
    out = grad_U1(P, X)
    for k in range(2, K + 1):
        out += grad_Uk(P, k, X)
    return out.reshape(shp)


def multiscale_scale_norms(P: PointSet, ks, X) -> np.ndarray:
    """Measured sup over the sample points X of |grad U^k| for each k in ks."""
    X, _ = _as_points(X)
    return np.array([float(np.max(np.hypot(*grad_Uk(P, k, X).T))) for k in ks])


def unit_cell_samples(n: int = 16, offset: float = 0.5) -> np.ndarray:
    g = (np.arange(n) + offset) / n
    return np.array(np.meshgrid(g, g, indexing="ij")).reshape(2, -1).T


def make_multiscale(P: PointSet, m: float, K: int, tail_error: float | None = None) -> SingularField:
    """Field of the multiscale construction truncated at scale K.

    If tail_error is not given it is estimated from measured scale norms
    at K-1 and K as a geometric tail.
    """
    R = scale_radius(K)
    domain = P.window.shrink(R)
    if tail_error is None:
        tail_error = float("nan")
        if K >= 3:
            c = np.array(domain.center)
            Xs = c + unit_cell_samples(8) - 0.5
            n1, n2 = multiscale_scale_norms(P, [K - 1, K], Xs)
            q = n2 / n1 if n1 > 0 else 0.0
            tail_error = n2 * q / (1 - q) if q < 1 else float("inf")
    ev = lambda X: field_multiscale(P, m, K, X)
    pts, al = P.points, P.weights
    keep = domain.contains(pts)
    return SingularField(ev, pts[keep], al[keep], m, f"multiscale K={K} [{P.label}]", tail_error, domain, {"K": K})


def multiscale_background(P: PointSet, K: int, x) -> np.ndarray:
    """Density n_K(x) = #(P ∩ B(x, R_K)) / (pi R_K^2), the background of the partial field."""
    X, shp = _as_points(x)
    R = scale_radius(K)
    n = np.asarray(P.tree.query_ball_point(X, R, return_length=True), float)
    return (n / (math.pi * R * R)).reshape(shp[:-1])


# -- field correcting a bounded displacement -------------------------------------------------


def _bijection_arrays(Phi) -> tuple[np.ndarray, np.ndarray]:
    if hasattr(Phi, "src") and hasattr(Phi, "dst"):
        return np.asarray(Phi.src), np.asarray(Phi.dst)
    src, dst = Phi
    return np.asarray(src), np.asarray(dst)


def validate_bijection(src: np.ndarray, dst: np.ndarray) -> Box:
    """Check that dst enumerates the integer points of a rectangle exactly once.

    Returns the closed box spanned by dst.
    """
    src = np.asarray(src, float).reshape(-1, 2)
    dst = np.asarray(dst, float).reshape(-1, 2)
    if len(src) != len(dst) or len(src) == 0:
        raise LabError("bijection tables are empty or of different lengths")
    if not np.array_equal(dst, np.rint(dst)):
        raise LabError("bijection targets must be integer points")
    if len(np.unique(src, axis=0)) != len(src) or len(np.unique(dst, axis=0)) != len(dst):
        raise LabError("map is not injective")
    lo, hi = dst.min(axis=0), dst.max(axis=0)
    n_rect = int((hi[0] - lo[0] + 1) * (hi[1] - lo[1] + 1))
    if n_rect != len(dst):
        raise LabError("map is not onto the integer points of its target rectangle")
    return Box.from_bounds(lo, hi) if np.all(hi > lo) else Box((lo[0], lo[1]), (0.5, 0.5))


def dipole_neumann_grad(d: np.ndarray, q: np.ndarray, a: float) -> np.ndarray:
    """Gradient of U solving -Laplace U = 2 pi (delta_0 - delta_q) in B(0, a), zero normal derivative.

    U = -log|x| + log|x - q| + log|x - q*|, q* = a^2 q / |q|^2.
    """
    qs = q * (a * a / np.einsum("ij,ij->i", q, q))[:, None]
    out = np.zeros_like(d)
    for c, sgn in ((0.0, -1.0), (q, 1.0), (qs, 1.0)):
        e = d - c
        r2 = np.einsum("ij,ij->i", e, e)
        out += sgn * e / r2[:, None]
    return out


def field_move(P: PointSet, Phi, x, tol: float = 1e-12) -> np.ndarray:
    """grad V_{Z^2} + sum_p grad U_p for a displacement-bounded bijection Phi: P -> Z^2."""
    return make_move(P, Phi, tol)(x)


def make_move(P: PointSet, Phi, tol: float = 1e-12) -> SingularField:
    src, dst = _bijection_arrays(Phi)
    src = np.asarray(src, float).reshape(-1, 2)
    dst = np.asarray(dst, float).reshape(-1, 2)
    target = validate_bijection(src, dst)
    if len(P) and np.any(P.tree.query(src)[0] > 1e-9 * (1 + np.abs(src).max())):
        raise LabError("bijection source contains points outside P")
    q = dst - src
    disp = np.hypot(q[:, 0], q[:, 1])
    a = 2.0 * float(disp.max())
    moved = disp > 0
    ps, qs = src[moved], q[moved]
    tree = cKDTree(ps) if len(ps) else None
    b = square_basis()
    # valid region: target rectangle shrunk by the correction radius and half a cell
    margin = a + 0.5
    hw = (target.halfwidths[0] + 0.5 - margin, target.halfwidths[1] + 0.5 - margin)
    domain = Box(target.center, hw) if min(hw) > 0 else None
    if domain is None:
        raise LabError("bijection target is too small for its displacement")

    def ev(X):
        X = np.asarray(X, float).reshape(-1, 2)
        out = periodic_potential_grad(b, X, tol)
        if tree is not None and a > 0:
            lists = tree.query_ball_point(X, a)
            lens = np.fromiter((len(l) for l in lists), dtype=np.int64, count=len(lists))
            if lens.sum():
                ii = np.repeat(np.arange(len(X)), lens)
                jj = np.concatenate([np.asarray(l, dtype=np.int64) for l in lists if len(l)])
                d = X[ii] - ps[jj]
                inside = np.einsum("ij,ij->i", d, d) < a * a
                ii, jj, d = ii[inside], jj[inside], d[inside]
                g = dipole_neumann_grad(d, qs[jj], a)
                out += np.column_stack([np.bincount(ii, g[:, 0], len(X)), np.bincount(ii, g[:, 1], len(X))])
        return out

    keep = domain.contains(P.points)
    return SingularField(ev, P.points[keep], np.ones(int(keep.sum())), 1.0,
                         f"move [{P.label}]", tol, domain, {"R1": a})


# -- algebra ------------------------------------------------------------------------------------


def field_combine(f: SingularField, g: SingularField, sign: int = 1) -> SingularField:
    """f + sign*g with merged registry and background."""
    if sign not in (1, -1):
        raise LabError("sign must be +1 or -1")
    if f.domain is None:
        dom = g.domain
    elif g.domain is None:
        dom = f.domain
    else:
        dom = f.domain.intersect(g.domain)
    pts = np.vstack([f.points, g.points])
    al = np.concatenate([f.alphas, sign * g.alphas])
    if dom is not None and len(pts):
        k = dom.contains(pts)
        pts, al = pts[k], al[k]
    if len(pts):
        u, inv = np.unique(np.round(pts, 12), axis=0, return_inverse=True)
        inv = inv.reshape(-1)
        a2 = np.bincount(inv, weights=al, minlength=len(u))
        nz = np.abs(a2) > 1e-12
        pts, al = u[nz], a2[nz]
    if len(pts) >= 2:
        dd, _ = cKDTree(pts).query(pts, k=2)
        if not dd[:, 1].min() > 0:
            raise LabError("combined singular set is not of uniform type")
    fe, ge = f.evaluate, g.evaluate
    if sign == 1:
        ev = lambda X: fe(X) + ge(X)
    else:
        ev = lambda X: fe(X) - ge(X)
    lab = f"({f.label}) {'+' if sign == 1 else '-'} ({g.label})"
    return SingularField(ev, pts, al, f.background + sign * g.background, lab,
                         f.tail_error + g.tail_error, dom)


def zero_field(domain: Box | None = None) -> SingularField:
    return SingularField(lambda X: np.zeros_like(np.asarray(X, float)), np.zeros((0, 2)), np.zeros(0), 0.0, "zero", 0.0, domain)


def monopole_field(p=(0.0, 0.0), alpha: float = 1.0, const=(0.0, 0.0)) -> SingularField:
    """-alpha (x-p)/|x-p|^2 + const, an m = 0 field with a single charge."""
    p = np.asarray(p, float)
    c = np.asarray(const, float)

    def ev(X):
        d = np.asarray(X, float).reshape(-1, 2) - p
        return -alpha * d / np.einsum("ij,ij->i", d, d)[:, None] + c

    return SingularField(ev, p[None, :], [alpha], 0.0, "monopole", 0.0, None)


# -- numerical checks and export ---------------------------------------------------------------


def divergence_fd(f: SingularField, X, h: float = 1e-4) -> np.ndarray:
    """Centered finite-difference divergence."""
    X, _ = _as_points(X)
    ex = np.array([h, 0.0])
    ey = np.array([0.0, h])
    return ((f(X + ex)[:, 0] - f(X - ex)[:, 0]) + (f(X + ey)[:, 1] - f(X - ey)[:, 1])) / (2 * h)


def circle_flux(f: SingularField, p, r: float, n: int = 256) -> float:
    """Outward flux of f through the circle of radius r about p (trapezoid in angle)."""
    t = 2 * np.pi * np.arange(n) / n
    nu = np.column_stack([np.cos(t), np.sin(t)])
    X = np.asarray(p, float) + r * nu
    return float(np.sum(np.einsum("ij,ij->i", f(X), nu)) * 2 * np.pi * r / n)


def rasterize(f: SingularField, x0: float, y0: float, h: float, nx: int, ny: int) -> np.ndarray:
    """Field sampled at (x0 + i h, y0 + j h); shape (ny, nx, 2), NaN at registry points."""
    xs = x0 + h * np.arange(nx)
    ys = y0 + h * np.arange(ny)
    X, Y = np.meshgrid(xs, ys)
    pts = np.column_stack([X.ravel(), Y.ravel()])
    out = np.full_like(pts, np.nan)
    if len(f.points):
        d, _ = cKDTree(f.points).query(pts)
        ok = d > 0
    else:
        ok = np.ones(len(pts), bool)
    out[ok] = f(pts[ok])
    return out.reshape(ny, nx, 2)


def write_raster(path: str, f: SingularField, x0: float, y0: float, h: float, nx: int, ny: int) -> None:
    """Binary raster (little-endian header nx, ny as int64; x0, y0, h as float64) plus a JSON sidecar."""
    data = rasterize(f, x0, y0, h, nx, ny)
    with open(path, "wb") as fh:
        fh.write(struct.pack("<qqddd", nx, ny, x0, y0, h))
        fh.write(np.ascontiguousarray(data, dtype="<f8").tobytes())
    with open(str(path) + ".json", "w") as fh:
        fh.write(f.registry_json())


def read_raster(path: str) -> tuple[dict, np.ndarray]:
    with open(path, "rb") as fh:
        nx, ny, x0, y0, h = struct.unpack("<qqddd", fh.read(40))
        data = np.frombuffer(fh.read(), dtype="<f8").reshape(ny, nx, 2)
    return {"nx": nx, "ny": ny, "x0": x0, "y0": y0, "h": h}, data
