"""Energy of perfect Bravais lattices.

For a lattice L of covolume A put

    V(x) = (1/A) * sum_{p in L*, p != 0} exp(2i pi p.x) / (2 pi |p|^2),

the periodic solution of -Laplace V = 2 pi (sum_l delta_l - 1/A). The constant
``c(L) = lim_{x->0} (V(x) + log|x|)`` determines the energy of the gradient
field of V: at background 1/A the energy per unit area is ``pi * c(L) / A``.

``c`` is computed two independent ways: Ewald splitting with a Gaussian
screen (:func:`regularized_constant`) and a brute-force damped dual sum followed
by extrapolation in the screen width and in |x| (:func:`regularized_constant_direct`).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import exp1

from coulomb_lab.errors import LabError

EULER_GAMMA = 0.57721566490153286061


@dataclass(frozen=True)
class LatticeBasis:
    u: tuple[float, float]
    v: tuple[float, float]

    def __post_init__(self):
        object.__setattr__(self, "u", (float(self.u[0]), float(self.u[1])))
        object.__setattr__(self, "v", (float(self.v[0]), float(self.v[1])))
        if not self.covolume > 1e-14 * max(1.0, self.max_norm2):
            raise LabError("degenerate lattice basis")

    @property
    def max_norm2(self) -> float:
        return max(self.u[0] ** 2 + self.u[1] ** 2, self.v[0] ** 2 + self.v[1] ** 2)

    @property
    def covolume(self) -> float:
        return abs(self.u[0] * self.v[1] - self.u[1] * self.v[0])

    @property
    def matrix(self) -> np.ndarray:
        """Columns are u and v."""
        return np.array([[self.u[0], self.v[0]], [self.u[1], self.v[1]]])

    def scaled(self, s: float) -> "LatticeBasis":
        return LatticeBasis((self.u[0] * s, self.u[1] * s), (self.v[0] * s, self.v[1] * s))

    def normalized(self) -> "LatticeBasis":
        return self.scaled(1.0 / math.sqrt(self.covolume))

    def rotated(self, theta: float) -> "LatticeBasis":
        c, s = math.cos(theta), math.sin(theta)
        rot = lambda w: (c * w[0] - s * w[1], s * w[0] + c * w[1])
        return LatticeBasis(rot(self.u), rot(self.v))

    def to_dict(self) -> dict:
        return {"u": list(self.u), "v": list(self.v)}


def square_basis() -> LatticeBasis:
    return LatticeBasis((1.0, 0.0), (0.0, 1.0))


def triangular_basis() -> LatticeBasis:
    a = math.sqrt(2.0 / math.sqrt(3.0))
    return LatticeBasis((a, 0.0), (a / 2, a * math.sqrt(3.0) / 2))


def basis_from_tau(tau: complex) -> LatticeBasis:
    """Unit-covolume basis (1, tau)/sqrt(Im tau)."""
    if tau.imag <= 0:
        raise LabError("tau must lie in the upper half plane")
    s = 1.0 / math.sqrt(tau.imag)
    return LatticeBasis((s, 0.0), (tau.real * s, tau.imag * s))


def dual_lattice(b: LatticeBasis) -> LatticeBasis:
    """Basis (u*, v*) with <u_i, u*_j> = delta_ij."""
    D = np.linalg.inv(b.matrix).T
    return LatticeBasis((D[0, 0], D[1, 0]), (D[0, 1], D[1, 1]))


def gauss_reduce(b: LatticeBasis) -> LatticeBasis:
    """Lagrange-Gauss reduction: |u| <= |v| and |u.v| <= |u|^2/2."""
    u = np.array(b.u)
    v = np.array(b.v)
    if u @ u > v @ v:
        u, v = v, u
    for _ in range(200):
        mu = round(float(u @ v) / float(u @ u))
        v = v - mu * u
        if v @ v >= u @ u:
            break
        u, v = v, u
    return LatticeBasis(tuple(u), tuple(v))


def lattice_points(b: LatticeBasis, rmax: float, include_zero: bool = False) -> np.ndarray:
    """All lattice vectors of norm <= rmax (reduced basis makes the box tight)."""
    r = gauss_reduce(b)
    M = r.matrix
    Minv = np.linalg.inv(M)
    # |coefficient i| <= rmax * |row i of M^{-1}|
    ni = int(math.ceil(rmax * np.linalg.norm(Minv[0]))) + 1
    nj = int(math.ceil(rmax * np.linalg.norm(Minv[1]))) + 1
    i, j = np.meshgrid(np.arange(-ni, ni + 1), np.arange(-nj, nj + 1), indexing="ij")
    pts = np.column_stack([i.ravel(), j.ravel()]) @ M.T
    n2 = np.einsum("ij,ij->i", pts, pts)
    keep = n2 <= rmax * rmax
    if not include_zero:
        keep &= n2 > 0
    return pts[keep]


def _zmax(tol: float) -> float:
    return math.log(1.0 / tol) + 12.0


def regularized_constant(b: LatticeBasis, tol: float = 1e-12, s: float | None = None) -> float:
    """lim_{x->0} (V(x) + log|x|) by Ewald splitting.

    With heat-kernel time s the periodic Green function G = V/(2 pi) splits as
    sum_l E1(|x-l|^2/4s)/(4 pi) + (1/A) sum_{p != 0} exp(-4 pi^2 |p|^2 s) e_p(x)/(4 pi^2 |p|^2) - s/A,
    and the l = 0 term is -(gamma + log(|x|^2/4s))/(4 pi) + O(|x|^2).
    The default s = A/(4 pi) balances both sums.
    """
    if tol <= 0:
        raise LabError("tol must be positive")
    A = b.covolume
    if s is None:
        s = A / (4 * math.pi)
    z = _zmax(tol)
    lam = lattice_points(b, math.sqrt(4 * s * z))
    real = math.fsum(np.sort(exp1(np.einsum("ij,ij->i", lam, lam) / (4 * s)))) / (4 * math.pi)
    dual = dual_lattice(b)
    p = lattice_points(dual, math.sqrt(z / (4 * math.pi ** 2 * s)))
    p2 = np.einsum("ij,ij->i", p, p)
    recip = math.fsum(np.sort(np.exp(-4 * math.pi ** 2 * p2 * s) / (4 * math.pi ** 2 * p2))) / A
    G0 = (-EULER_GAMMA + math.log(4 * s)) / (4 * math.pi) + real + recip - s / A
    return 2 * math.pi * G0


def _damped_dual_sum(p: np.ndarray, p2: np.ndarray, x: np.ndarray, s: float, A: float) -> float:
    w = np.cos(2 * math.pi * (p @ x)) * np.exp(-4 * math.pi ** 2 * p2 * s) / (4 * math.pi ** 2 * p2)
    return math.fsum(w) / A


def _neville_at_zero(t, f) -> float:
    """Value at t=0 of the interpolating polynomial through (t_i, f_i)."""
    t = list(map(float, t))
    P = list(map(float, f))
    n = len(t)
    for k in range(1, n):
        for i in range(n - k):
            P[i] = (t[i + k] * P[i] - t[i] * P[i + 1]) / (t[i + k] - t[i])
    return P[0]


def regularized_constant_direct(b: LatticeBasis, x_list) -> float:
    """Brute-force estimate of lim_{x->0}(V(x) + log|x|).

    For each offset x the Gaussian-damped dual sum is evaluated at two damping
    widths s proportional to |x|^2; the damping bias is linear in s up to terms
    exponentially small in |x|^2/s, so a two-point extrapolation removes it.
    The regular part V(x) + log|x| is then extrapolated to x=0 in |x|^2.
    """
    xs = [np.asarray(x, float).reshape(2) for x in x_list]
    if len(xs) < 2:
        raise LabError("need at least two offsets")
    r = [float(np.hypot(*x)) for x in xs]
    if any(ri <= 0 for ri in r) or any(b2 >= a2 for a2, b2 in zip(r, r[1:])):
        raise LabError("offsets must be nonzero with strictly decreasing |x|")
    A = b.covolume
    dual = dual_lattice(b)
    vals = []
    for x, rx in zip(xs, r):
        s1, s2 = rx * rx / 100.0, rx * rx / 200.0
        p = lattice_points(dual, math.sqrt(40.0 / (4 * math.pi ** 2 * s2)))
        p2 = np.einsum("ij,ij->i", p, p)
        S1 = _damped_dual_sum(p, p2, x, s1, A)
        S2 = _damped_dual_sum(p, p2, x, s2, A)
        S0 = (s1 * S2 - s2 * S1) / (s1 - s2)
        vals.append(2 * math.pi * S0 + math.log(rx))
    return _neville_at_zero([ri * ri for ri in r], vals)


def _require_unit(b: LatticeBasis):
    if abs(b.covolume - 1.0) > 1e-12:
        raise LabError(f"basis must have unit covolume (got {b.covolume!r}); normalize first")


def perfect_W_ewald(b: LatticeBasis, tol: float = 1e-12) -> float:
    """Energy per unit area of the perfect lattice field at background 1."""
    _require_unit(b)
    return math.pi * regularized_constant(b, tol)


def default_offsets(b: LatticeBasis, direction=None) -> list:
    d = np.array(b.u if direction is None else direction, float)
    d = d / np.linalg.norm(d)
    return [0.1 * d, 0.05 * d, 0.025 * d]


def perfect_W_extrapolate(b: LatticeBasis, x_list=None) -> float:
    _require_unit(b)
    if x_list is None:
        x_list = default_offsets(b)
    return math.pi * regularized_constant_direct(b, x_list)


def energy_at_background(b: LatticeBasis, tol: float = 1e-12) -> float:
    """Energy per unit area of the lattice b at its own background m = 1/covolume."""
    return math.pi * regularized_constant(b, tol) / b.covolume


def scaled_energy_check(b: LatticeBasis, m: float, tol: float = 1e-12) -> tuple[float, float]:
    """(lhs, rhs) of W_m = m (W_1 - (pi/2) log m) for the lattice b / sqrt(m)."""
    if not m > 0:
        raise LabError("m must be positive")
    _require_unit(b)
    lhs = m * (perfect_W_ewald(b, tol) - 0.5 * math.pi * math.log(m))
    rhs = energy_at_background(b.scaled(1.0 / math.sqrt(m)), tol)
    return lhs, rhs


def fundamental_domain_scan(nx: int = 20, ny: int = 20, y_max: float = 2.0, tol: float = 1e-12):
    """W over a grid of tau in {|Re tau| <= 1/2, |tau| >= 1}, Im tau <= y_max.

    Returns (taus, W) as flat arrays.
    """
    taus, Ws = [], []
    for x in np.linspace(-0.5, 0.5, nx):
        y0 = math.sqrt(1.0 - x * x)
        for t in np.linspace(0.0, 1.0, ny):
            tau = complex(x, y0 + t * (y_max - y0))
            taus.append(tau)
            Ws.append(perfect_W_ewald(basis_from_tau(tau), tol))
    return np.array(taus), np.array(Ws)


def periodic_potential_grad(b: LatticeBasis, x, tol: float = 1e-12) -> np.ndarray:
    """Gradient of V at points x (shape (..., 2)) by Ewald splitting.

    Near each lattice point l, grad V = -(x-l)/|x-l|^2 + O(|x-l|).
    """
    x = np.asarray(x, float)
    shp = x.shape
    X = x.reshape(-1, 2)
    A = b.covolume
    s = A / (4 * math.pi)
    z = _zmax(tol)
    M = b.matrix
    # reduce into the fundamental cell so the real-space sum is short
    frac = X @ np.linalg.inv(M).T
    Xr = X - np.floor(frac + 0.5) @ M.T
    cell_r = 0.5 * (np.linalg.norm(M[:, 0]) + np.linalg.norm(M[:, 1]))
    lam = lattice_points(b, math.sqrt(4 * s * z) + cell_r, include_zero=True)
    out = np.zeros_like(Xr)
    for l in lam:
        d = Xr - l
        r2 = np.einsum("ij,ij->i", d, d)
        with np.errstate(divide="ignore", invalid="ignore"):
            w = np.exp(-r2 / (4 * s)) / r2
        out -= d * w[:, None]
    p = lattice_points(dual_lattice(b), math.sqrt(z / (4 * math.pi ** 2 * s)))
    p2 = np.einsum("ij,ij->i", p, p)
    coef = np.exp(-4 * math.pi ** 2 * p2 * s) / p2
    ph = np.sin(2 * math.pi * (Xr @ p.T))
    out -= (ph * coef) @ p / A
    return out.reshape(shp)


def report_json(b: LatticeBasis, tol: float = 1e-12) -> str:
    W = perfect_W_ewald(b, tol)
    W2 = perfect_W_extrapolate(b)
    return json.dumps({"schema": "v1", "basis": b.to_dict(), "W": W, "method": "ewald",
                       "tol": tol, "cross_check_delta": abs(W - W2)})
