"""Window energy W(j, chi) and large-R energy curves.

The self-energy of each point charge is removed analytically. Near every
registered point p the monopole G_p(x) = -alpha (x-p)/|x-p|^2 is subtracted
through a smooth mask,

    Gt(x) = sum_p G_p(x) psi(|x-p|/delta),  psi = 1 on [0, 1/2], 0 on [1, inf),

and the energy is split as

    1/2 chi |j|^2 = 1/2 chi |j - Gt|^2 + chi Gt.(j - Gt) + 1/2 chi |Gt|^2.

The first term is bounded and integrated on a uniform grid. The other two
live in the balls B(p, delta); the only non-integrable piece,
1/2 chi(p) |G_p|^2 psi^2, has the closed form
pi alpha^2 chi(p) (log(delta/2) - log(eta) + J), whose -log(eta) cancels
the counterterm, so no limit is ever taken numerically.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from coulomb_lab.discrepancy import fit_loglog, flux_lower_bound
from coulomb_lab.errors import LabError, NumericalDefect
from coulomb_lab.fields import SingularField
from coulomb_lab.pointsets import Box, PointSet

log = logging.getLogger(__name__)

PROFILES = ("linear", "cubic")


@dataclass(frozen=True)
class CutoffProfile:
    R: float
    profile: str = "linear"
    center: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if not self.R > 1:
            raise LabError("cutoff radius must exceed 1")
        if self.profile not in PROFILES:
            raise LabError(f"unknown cutoff profile {self.profile!r}")

    @property
    def grad_bound(self) -> float:
        return 1.0 if self.profile == "linear" else 1.5


def cutoff_radial(c: CutoffProfile, r) -> np.ndarray:
    t = np.clip(c.R - np.asarray(r, float), 0.0, 1.0)
    if c.profile == "cubic":
        return t * t * (3 - 2 * t)
    return t


def cutoff_value(c: CutoffProfile, x) -> np.ndarray | float:
    x = np.asarray(x, float)
    r = np.hypot(x[..., 0] - c.center[0], x[..., 1] - c.center[1])
    v = cutoff_radial(c, r)
    return float(v) if v.ndim == 0 else v


def mask(t):
    """psi: 1 on [0, 1/2], 0 on [1, inf), quintic smoothstep in between (C^2)."""
    s = np.clip(2 * np.asarray(t, float) - 1, 0.0, 1.0)
    return 1 - s ** 3 * (10 - 15 * s + 6 * s * s)


def _mask_log_integral() -> float:
    # J = int_{1/2}^{1} psi(t)^2 / t dt
    x, w = np.polynomial.legendre.leggauss(64)
    t = 0.75 + 0.25 * x
    return float(0.25 * np.sum(w * mask(t) ** 2 / t))


MASK_J = _mask_log_integral()


def default_delta(points: np.ndarray) -> float:
    if len(points) < 2:
        return 0.25
    d, _ = cKDTree(points).query(points, k=2)
    return min(0.25 * float(d[:, 1].min()), 0.25)


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("LAB_THREADS", "1")))
    except ValueError:
        return 1


def _polar_nodes(delta: float, quad_n: int):
    """Nodes (r, theta) and weights (including the Jacobian r) on B(0, delta).

    Gauss-Legendre in r on [0, delta/2] and [delta/2, delta], trapezoid in theta.
    """
    x, w = np.polynomial.legendre.leggauss(quad_n)
    r = np.concatenate([(x + 1) * delta / 4, delta / 2 + (x + 1) * delta / 4])
    wr = np.concatenate([w, w]) * delta / 4
    nt = 4 * quad_n
    th = 2 * np.pi * (np.arange(nt) + 0.5) / nt
    R, T = np.meshgrid(r, th, indexing="ij")
    W = (wr * r)[:, None] * np.full(nt, 2 * np.pi / nt)[None, :]
    return R.ravel(), T.ravel(), W.ravel()


def ball_energy(f: SingularField, p, delta: float, quad_n: int = 16) -> float:
    """W(j, 1_{B(p, delta)}) = pi a^2 log(delta) + 1/2 int_B |j - G|^2 - pi^2 a m delta^2."""
    if quad_n < 8:
        raise LabError("quad_n must be >= 8")
    if delta <= 0:
        raise LabError("delta must be positive")
    p = np.asarray(p, float)
    if len(f.points) == 0:
        raise LabError("field has no registered singularities")
    d = np.hypot(*(f.points - p).T)
    i = int(np.argmin(d))
    if d[i] > 1e-12:
        raise LabError(f"{p.tolist()} is not a registered singular point")
    alpha = float(f.alphas[i])
    others = np.delete(d, i)
    if len(others) and others.min() < 2 * delta:
        raise LabError("delta too large: the ball touches another singular point")
    r, t, w = _polar_nodes(delta, quad_n)
    off = np.column_stack([r * np.cos(t), r * np.sin(t)])
    e = f(p + off) + alpha * off / (r * r)[:, None]
    integral = 0.5 * float(np.sum(w * np.einsum("ij,ij->i", e, e)))
    floor = math.pi * alpha ** 2 * math.log(delta) - math.pi ** 2 * alpha * f.background * delta ** 2
    val = floor + integral
    if val < floor - 1e-12 * max(1.0, abs(floor)):
        raise NumericalDefect("ball energy fell below its analytic lower bound")
    return val


def _ball_terms(f, c, pts, al, delta, quad_n):
    """Sum over balls of the chi(p) closed form plus the quadrature of the masked remainder."""
    r, t, w = _polar_nodes(delta, quad_n)
    off = np.column_stack([r * np.cos(t), r * np.sin(t)])
    ps = mask(r / delta)
    const = math.log(delta / 2) + MASK_J
    vals = []
    for p, a in zip(pts, al):
        X = p + off
        chi = cutoff_value(c, X)
        chip = float(cutoff_value(c, p))
        if chip == 0.0 and not np.any(chi):
            continue
        Gt = -a * off / (r * r)[:, None] * ps[:, None]
        jr = f(X) - Gt
        dens = chi * np.einsum("ij,ij->i", Gt, jr) + 0.5 * (chi - chip) * np.einsum("ij,ij->i", Gt, Gt)
        vals.append(math.pi * a * a * chip * const + float(np.sum(w * dens)))
    return vals


def _grid_rows(f, c, pts, al, delta, h, R, x0, i0, i1, n):
    """Midpoint sum of 1/2 chi |j - Gt|^2 h^2 over grid rows i0..i1-1."""
    cx, cy = c.center
    ys = cy + x0 + (np.arange(i0, i1) + 0.5) * h
    xs = cx + x0 + (np.arange(n) + 0.5) * h
    X, Y = np.meshgrid(xs, ys)
    inside = (X - cx) ** 2 + (Y - cy) ** 2 < R * R
    P = np.column_stack([X[inside], Y[inside]])
    if len(P) == 0:
        return 0.0
    j = f(P)
    if len(pts):
        tree = cKDTree(pts)
        near = tree.query_ball_point(P, delta)
        lens = np.fromiter((len(l) for l in near), dtype=np.int64, count=len(near))
        if lens.sum():
            ii = np.repeat(np.arange(len(P)), lens)
            jj = np.concatenate([np.asarray(l, dtype=np.int64) for l in near if len(l)])
            d = P[ii] - pts[jj]
            rr = np.hypot(d[:, 0], d[:, 1])
            g = -al[jj][:, None] * d / (rr * rr)[:, None] * mask(rr / delta)[:, None]
            j[:, 0] -= np.bincount(ii, g[:, 0], len(P))
            j[:, 1] -= np.bincount(ii, g[:, 1], len(P))
    chi = cutoff_value(c, P)
    return 0.5 * math.fsum(chi * np.einsum("ij,ij->i", j, j)) * h * h


def _grid_offset(pts, x0, h, c):
    # keep cell centers off registry points
    if len(pts) == 0:
        return x0
    for k in range(8):
        shift = x0 + k * h * 1e-3 * math.sqrt(2)
        u = (pts - np.asarray(c.center) - shift) / h - 0.5
        if np.all(np.abs(u - np.rint(u)).max(axis=1) > 1e-9):
            if k:
                log.info("window_energy: grid jittered by %g", shift - x0)
            return shift
    raise NumericalDefect("could not move grid off registry points")


def window_energy(f: SingularField, c: CutoffProfile, delta: float | None = None, h: float | None = None,
                  quad_n: int = 16, chunk_cells: int = 2_000_000) -> float:
    """W(j, chi_R) computed without any numerical eta -> 0 limit."""
    R = c.R
    if delta is None:
        delta = default_delta(f.points)
    pts, al = f.registry_in(Box.square(R + delta, c.center))
    if h is None:
        h = delta / 8
    if h > delta / 8 * (1 + 1e-12):
        raise LabError("mesh too coarse: need h <= delta/8")
    if len(pts) >= 2:
        dd, _ = cKDTree(pts).query(pts, k=2)
        if dd[:, 1].min() < 2 * delta:
            raise LabError("delta must be below half the minimum separation")
    # registry points whose ball meets the support
    rp = np.hypot(pts[:, 0] - c.center[0], pts[:, 1] - c.center[1]) if len(pts) else np.zeros(0)
    keep = rp < R + delta
    pts, al = pts[keep], al[keep]
    n = int(math.ceil(2 * R / h))
    x0 = _grid_offset(pts, -n * h / 2, h, c)
    rows = max(1, chunk_cells // n)
    spans = [(i, min(i + rows, n)) for i in range(0, n, rows)]
    job = lambda s: _grid_rows(f, c, pts, al, delta, h, R, x0, s[0], s[1], n)
    nt = _threads()
    if nt > 1 and len(spans) > 1:
        with ThreadPoolExecutor(nt) as ex:
            grid = list(ex.map(job, spans))
    else:
        grid = [job(s) for s in spans]
    balls = _ball_terms(f, c, pts, al, delta, quad_n)
    return math.fsum(grid) + math.fsum(balls)


# -- energy curves -------------------------------------------------------------------------


@dataclass
class EnergyCurve:
    radii: list
    W_values: list
    normalized: list
    delta: float
    classification: str
    growth_exponent: float
    h: float | None = None
    profile: str = "linear"
    thresholds: dict = field(default_factory=dict)
    log_slope: float = float("nan")
    log2_coef: float = float("nan")
    label: str = ""

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["R", "W", "W_normalized"])
        for row in zip(self.radii, self.W_values, self.normalized):
            w.writerow([repr(float(v)) for v in row])
        return buf.getvalue()

    def to_json(self) -> str:
        d = {"schema": "v1"}
        d.update(asdict(self))
        return json.dumps(d)


DEFAULT_THRESHOLDS = {"drift": 0.05, "exponent": 0.1}


def growth_exponent(radii, values) -> float:
    """d log E / d log R for positive E, else slope in log R relative to mean |E|."""
    radii = np.asarray(radii, float)
    values = np.asarray(values, float)
    if np.all(values > 0):
        return fit_loglog(radii, values)[1]
    slope = np.polyfit(np.log(radii), values, 1)[0]
    return float(slope / max(np.mean(np.abs(values)), 1e-300))


def classify(radii, normalized, thresholds=None) -> tuple[str, float]:
    th = dict(DEFAULT_THRESHOLDS, **(thresholds or {}))
    radii = np.asarray(radii, float)
    v = np.asarray(normalized, float)
    if len(radii) < 3:
        return "inconclusive", float("nan")
    expo = growth_exponent(radii, v)
    top = radii >= radii[-1] / 2 * (1 - 1e-12)
    if top.sum() >= 2:
        vt = v[top]
        drift = (vt.max() - vt.min()) / max(abs(vt[-1]), 1e-300)
        if drift < th["drift"]:
            return "finite", expo
    if np.all(np.diff(v) > 0) and expo > th["exponent"]:
        return "infinite", expo
    return "inconclusive", expo


def _curve(radii, W, delta, h, profile, label, thresholds):
    radii = [float(r) for r in radii]
    norm = [w / (math.pi * r * r) for w, r in zip(W, radii)]
    cls, expo = classify(radii, norm, thresholds)
    lr = np.log(radii)
    ls = float(np.polyfit(lr, norm, 1)[0]) if len(radii) >= 2 else float("nan")
    l2 = float(np.polyfit(lr ** 2, norm, 1)[0]) if len(radii) >= 2 else float("nan")
    return EnergyCurve(radii, list(map(float, W)), norm, delta, cls, expo, h, profile,
                       dict(DEFAULT_THRESHOLDS, **(thresholds or {})), ls, l2, label)


def energy_curve(f: SingularField, radii, delta: float | None = None, h: float | None = None,
                 profile: str = "linear", quad_n: int = 16, thresholds=None) -> EnergyCurve:
    radii = [float(r) for r in radii]
    if any(b <= a for a, b in zip(radii, radii[1:])):
        raise LabError("radii must be increasing")
    if delta is None:
        delta = default_delta(f.points)
    if h is None:
        h = delta / 8
    W = []
    for R in radii:
        W.append(window_energy(f, CutoffProfile(R, profile), delta, h, quad_n))
        log.info("energy_curve %s: R=%g W=%.10g (delta=%g h=%g %s)", f.label, R, W[-1], delta, h, profile)
    return _curve(radii, W, delta, h, profile, f.label, thresholds)


def flux_energy_curve(P: PointSet, m: float, radii, r_min: float = 1.0, thresholds=None) -> EnergyCurve:
    """Energy curve built from the counting lower bound instead of a field.

    Any admissible field has energy on B_R at least this curve, so an
    'infinite' classification certifies infinite energy.
    """
    W = [flux_lower_bound(P, m, R, r_min) for R in radii]
    cur = _curve(radii, W, float("nan"), None, "flux-bound", f"flux bound [{P.label}]", thresholds)
    return cur


def raw_growth_exponent(curve: EnergyCurve) -> float:
    """Log-log slope of W itself (not normalized) against R."""
    return fit_loglog(curve.radii, curve.W_values)[1]
