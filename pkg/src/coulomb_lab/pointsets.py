"""Finite windows of infinite planar point configurations.

A :class:`PointSet` carries the points of a configuration that fall inside an
axis-aligned window, together with the guarantee that *every* point of the
infinite configuration inside that window is present. Queries that would need
points outside the window are refused instead of silently truncated.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
from scipy.spatial import cKDTree

from coulomb_lab.errors import LabError

SCHEMA = "v1"

# relative slack used when deciding closed-ball / closed-box membership
_REL_TOL = 1e-12

TRIANGULAR_SCALE = math.sqrt(2.0 / math.sqrt(3.0))


@dataclass(frozen=True)
class Box:
    center: tuple[float, float]
    halfwidths: tuple[float, float]

    def __post_init__(self):
        if not (self.halfwidths[0] > 0 and self.halfwidths[1] > 0):
            raise LabError(f"box half-widths must be positive, got {self.halfwidths}")
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))
        object.__setattr__(self, "halfwidths", (float(self.halfwidths[0]), float(self.halfwidths[1])))

    @classmethod
    def square(cls, halfwidth: float, center=(0.0, 0.0)) -> "Box":
        return cls(center, (halfwidth, halfwidth))

    @classmethod
    def around_ball(cls, x, R: float) -> "Box":
        return cls((x[0], x[1]), (R, R))

    @classmethod
    def from_bounds(cls, lo, hi) -> "Box":
        return cls(((lo[0] + hi[0]) / 2, (lo[1] + hi[1]) / 2), ((hi[0] - lo[0]) / 2, (hi[1] - lo[1]) / 2))

    @property
    def lo(self) -> np.ndarray:
        return np.array(self.center) - np.array(self.halfwidths)

    @property
    def hi(self) -> np.ndarray:
        return np.array(self.center) + np.array(self.halfwidths)

    def _slack(self) -> float:
        return _REL_TOL * (1.0 + max(abs(c) for c in self.center) + max(self.halfwidths))

    def contains(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        s = self._slack()
        return np.all((pts >= self.lo - s) & (pts <= self.hi + s), axis=1)

    def contains_ball(self, x, R: float) -> bool:
        x = np.asarray(x, dtype=float)
        s = self._slack()
        return bool(np.all(x - R >= self.lo - s) and np.all(x + R <= self.hi + s))

    def contains_box(self, other: "Box") -> bool:
        s = self._slack()
        return bool(np.all(other.lo >= self.lo - s) and np.all(other.hi <= self.hi + s))

    def shrink(self, d: float) -> "Box":
        hw = (self.halfwidths[0] - d, self.halfwidths[1] - d)
        if min(hw) <= 0:
            raise LabError(f"cannot shrink box {self} by {d}")
        return Box(self.center, hw)

    def intersect(self, other: "Box") -> "Box":
        lo = np.maximum(self.lo, other.lo)
        hi = np.minimum(self.hi, other.hi)
        if np.any(hi <= lo):
            raise LabError("boxes do not overlap")
        return Box.from_bounds(lo, hi)

    def to_dict(self) -> dict:
        return {"center": list(self.center), "halfwidths": list(self.halfwidths)}

    @classmethod
    def from_dict(cls, d: dict) -> "Box":
        return cls(tuple(d["center"]), tuple(d["halfwidths"]))


@dataclass(frozen=True, eq=False)
class PointSet:
    """Points of a configuration inside a fully populated window.

    ``int_points`` is set for configurations contained in the integer lattice;
    it holds the same points as ``points`` with exact integer coordinates.
    """

    points: np.ndarray
    weights: np.ndarray
    window: Box
    label: str = ""
    int_points: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).reshape(-1, 2)
        w = np.ones(len(pts)) if self.weights is None else np.asarray(self.weights, dtype=float).reshape(-1)
        if len(w) != len(pts):
            raise LabError("weights and points differ in length")
        if len(pts) and not np.all(self.window.contains(pts)):
            raise LabError("point set has points outside its window")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)
        if self.int_points is not None:
            ip = np.asarray(self.int_points, dtype=np.int64).reshape(-1, 2)
            object.__setattr__(self, "int_points", ip)

    def __len__(self) -> int:
        return len(self.points)

    @cached_property
    def tree(self) -> cKDTree:
        return cKDTree(self.points if len(self.points) else np.zeros((0, 2)))

    def restrict(self, window: Box, label: str | None = None) -> "PointSet":
        if not self.window.contains_box(window):
            raise LabError("restriction window exceeds the populated window")
        keep = window.contains(self.points) if len(self) else np.zeros(0, bool)
        ip = None if self.int_points is None else self.int_points[keep]
        return PointSet(self.points[keep], self.weights[keep], window, label or self.label, ip)

    # serialization -----------------------------------------------------------------
    def to_json_dict(self) -> dict:
        d = {
            "schema": SCHEMA,
            "label": self.label,
            "window": self.window.to_dict(),
            "points": self.points.tolist(),
            "weights": self.weights.tolist(),
        }
        if self.int_points is not None:
            d["integer"] = True
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())

    @classmethod
    def from_json_dict(cls, d: dict) -> "PointSet":
        if d.get("schema") != SCHEMA:
            raise LabError(f"unsupported point set schema {d.get('schema')!r}")
        pts = np.asarray(d["points"], dtype=float).reshape(-1, 2)
        ip = None
        if d.get("integer"):
            ip = np.rint(pts).astype(np.int64)
            if not np.array_equal(ip, pts):
                raise LabError("point set flagged integer but has non-integer coordinates")
        return cls(pts, np.asarray(d["weights"], dtype=float), Box.from_dict(d["window"]), d.get("label", ""), ip)

    @classmethod
    def from_json(cls, text: str) -> "PointSet":
        return cls.from_json_dict(json.loads(text))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "y", "weight"])
        for (x, y), a in zip(self.points.tolist(), self.weights.tolist()):
            w.writerow([repr(x), repr(y), repr(a)])
        return buf.getvalue()


def _as_vec(v) -> np.ndarray:
    v = np.asarray(v, dtype=float).reshape(2)
    return v


def _lattice_in_box(u: np.ndarray, v: np.ndarray, window: Box) -> np.ndarray:
    """Integer coefficient pairs (i, j) with i*u + j*v inside the window."""
    M = np.column_stack([u, v])
    Minv = np.linalg.inv(M)
    corners = np.array([[window.lo[0], window.lo[1]], [window.lo[0], window.hi[1]],
                        [window.hi[0], window.lo[1]], [window.hi[0], window.hi[1]]])
    coef = corners @ Minv.T
    lo = np.floor(coef.min(axis=0)) - 1
    hi = np.ceil(coef.max(axis=0)) + 1
    i, j = np.meshgrid(np.arange(lo[0], hi[0] + 1), np.arange(lo[1], hi[1] + 1), indexing="ij")
    ij = np.column_stack([i.ravel(), j.ravel()])
    pts = ij @ M.T
    keep = window.contains(pts)
    return ij[keep].astype(np.int64), pts[keep]


def gen_bravais(u, v, window: Box, normalize: bool = False, label: str | None = None) -> PointSet:
    """All points of Zu + Zv inside ``window``.

    With ``normalize`` the basis is rescaled to unit covolume first.
    """
    u, v = _as_vec(u), _as_vec(v)
    cov = abs(u[0] * v[1] - u[1] * v[0])
    if cov <= 1e-14 * max(1.0, np.dot(u, u), np.dot(v, v)):
        raise LabError("degenerate lattice basis")
    if normalize:
        s = 1.0 / math.sqrt(cov)
        u, v = u * s, v * s
    ij, pts = _lattice_in_box(u, v, window)
    ip = None
    if np.array_equal(u, np.rint(u)) and np.array_equal(v, np.rint(v)):
        ip = ij @ np.rint(np.array([u, v])).astype(np.int64)
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    pts = pts[order]
    if ip is not None:
        ip = ip[order]
    return PointSet(pts, np.ones(len(pts)), window, label or f"bravais u={u.tolist()} v={v.tolist()}", ip)


def triangular_basis() -> tuple[np.ndarray, np.ndarray]:
    """The unit-covolume triangular lattice basis."""
    a = TRIANGULAR_SCALE
    return np.array([a, 0.0]), np.array([a * 0.5, a * math.sqrt(3.0) / 2.0])


NAMED_KINDS = ("Z", "N", "Z2", "Z2_minus_Z", "Z2_minus_N", "Z2_minus_A")


def _integer_points(ip: np.ndarray, window: Box, label: str) -> PointSet:
    order = np.lexsort((ip[:, 1], ip[:, 0])) if len(ip) else np.zeros(0, int)
    ip = ip[order]
    return PointSet(ip.astype(float), np.ones(len(ip)), window, label, ip)


def _z2_in_box(window: Box) -> np.ndarray:
    s = window._slack()
    xs = np.arange(math.ceil(window.lo[0] - s), math.floor(window.hi[0] + s) + 1, dtype=np.int64)
    ys = np.arange(math.ceil(window.lo[1] - s), math.floor(window.hi[1] + s) + 1, dtype=np.int64)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    return np.column_stack([X.ravel(), Y.ravel()])


def integer_array(A) -> np.ndarray:
    """Coerce a PointSet or array of points to exact integer coordinates."""
    if isinstance(A, PointSet):
        if A.int_points is not None:
            return A.int_points
        A = A.points
    arr = np.asarray(A, dtype=float).reshape(-1, 2)
    ia = np.rint(arr)
    if not np.array_equal(ia, arr):
        raise LabError("set is not contained in Z^2")
    return ia.astype(np.int64)


def gen_named(kind: str, window: Box, A=None) -> PointSet:
    """The configurations Z, N (on the horizontal axis), Z^2 and Z^2 minus a set."""
    if kind not in NAMED_KINDS:
        raise LabError(f"unknown configuration kind {kind!r}")
    z2 = _z2_in_box(window)
    if kind in ("Z", "N"):
        on_axis = z2[:, 1] == 0
        pts = z2[on_axis]
        if kind == "N":
            pts = pts[pts[:, 0] >= 0]
        return _integer_points(pts, window, kind)
    if kind == "Z2":
        return _integer_points(z2, window, kind)
    if kind == "Z2_minus_Z":
        return _integer_points(z2[z2[:, 1] != 0], window, kind)
    if kind == "Z2_minus_N":
        removed = (z2[:, 1] == 0) & (z2[:, 0] >= 0)
        return _integer_points(z2[~removed], window, kind)
    if A is None:
        raise LabError("Z2_minus_A requires the removed set A")
    a = integer_array(A)
    keep = ~_rows_in(z2, a)
    return _integer_points(z2[keep], window, "Z2_minus_A")


def _rows_in(P: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """Mask of rows of integer array P that occur in Q."""
    if len(Q) == 0 or len(P) == 0:
        return np.zeros(len(P), bool)
    lo = P.min(axis=0)
    hi = P.max(axis=0)
    inb = np.all((Q >= lo) & (Q <= hi), axis=1)
    Q = Q[inb]
    if len(Q) == 0:
        return np.zeros(len(P), bool)
    span = int(hi[1] - lo[1] + 1)
    kp = (P[:, 0] - lo[0]) * span + (P[:, 1] - lo[1])
    kq = (Q[:, 0] - lo[0]) * span + (Q[:, 1] - lo[1])
    return np.isin(kp, kq)


def ring_count(m: float, eps: float, k: int) -> int:
    return int(math.floor(32.0 * math.pi * m * k + k ** eps))


def gen_ring_counterexample(m: float, eps: float, k_max: int) -> PointSet:
    """Rings of equally spaced points on the circles of radius 4k.

    Ring k carries floor(32*pi*m*k + k**eps) points. The window is the bounding
    box of B(0, 4*k_max); points of larger rings reaching into its corners are
    included so that the window is complete.
    """
    if m < 0:
        raise LabError("background m must be >= 0")
    if not 0 < eps < 0.5:
        raise LabError("eps must lie in (0, 1/2)")
    if k_max < 1:
        raise LabError("k_max must be >= 1")
    window = Box.square(4.0 * k_max)
    chunks = []
    k_outer = int(math.ceil(math.sqrt(2.0) * k_max))
    for k in range(1, k_outer + 1):
        n = ring_count(m, eps, k)
        if n == 0:
            continue
        t = 2.0 * math.pi * np.arange(n) / n
        ring = 4.0 * k * np.column_stack([np.cos(t), np.sin(t)])
        if k > k_max:
            ring = ring[window.contains(ring)]
        chunks.append(ring)
    pts = np.vstack(chunks) if chunks else np.zeros((0, 2))
    return PointSet(pts, np.ones(len(pts)), window, f"ring m={m} eps={eps} k_max={k_max}")


def count_in_ball(P: PointSet, x, R: float) -> int:
    """Number of points p of P with |p - x| <= R."""
    x = _as_vec(x)
    if not P.window.contains_ball(x, R):
        raise LabError(f"ball B({x.tolist()}, {R}) exits the window of {P.label!r}")
    if len(P) == 0:
        return 0
    return int(P.tree.query_ball_point(x, R * (1 + _REL_TOL) + _REL_TOL, return_length=True))


def count_in_balls(P: PointSet, xs, R: float) -> np.ndarray:
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    for x in xs:
        if not P.window.contains_ball(x, R):
            raise LabError(f"ball B({x.tolist()}, {R}) exits the window of {P.label!r}")
    if len(P) == 0:
        return np.zeros(len(xs), dtype=np.int64)
    return np.asarray(P.tree.query_ball_point(xs, R * (1 + _REL_TOL) + _REL_TOL, return_length=True), dtype=np.int64)


def min_separation(P: PointSet) -> float:
    """Minimum pairwise distance, via nearest-neighbour queries on a k-d tree."""
    if len(P) < 2:
        raise LabError("min_separation needs at least two points")
    d, _ = P.tree.query(P.points, k=2)
    return float(d[:, 1].min())


def is_uniform(P: PointSet) -> bool:
    if len(P) < 2:
        return True
    return min_separation(P) > 0 and bool(np.all(np.isfinite(P.weights)))


def from_points(points: Sequence, window: Box, label: str = "", weights: Iterable | None = None) -> PointSet:
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    w = np.ones(len(pts)) if weights is None else np.asarray(list(weights), dtype=float)
    ip = None
    if len(pts) and np.array_equal(pts, np.rint(pts)):
        ip = np.rint(pts).astype(np.int64)
    return PointSet(pts, w, window, label, ip)
