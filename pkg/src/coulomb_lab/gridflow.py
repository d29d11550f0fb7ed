"""Discrete 1-forms on the grid graph of blocks, bounded flows and bijections.

Blocks are indexed by integer pairs; block p = (px, py) of size N is the set
K_p = [px N, px N + N) x [py N, py N + N) of integer points. A rectangular
block window holds nx x ny blocks starting at (x0, y0). Its outer ring is the
boundary; the remaining blocks are interior.

A :class:`OneForm` stores one value per undirected edge: ``h[i, j]`` is
phi((x0+i, y0+j), (x0+i+1, y0+j)) and ``v[i, j]`` is
phi((x0+i, y0+j), (x0+i, y0+j+1)); the reversed edges carry the negatives.
Arrays are int64, or object dtype holding Fractions for rational forms.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_flow

from coulomb_lab.errors import BlockSizeTooSmall, LabError, NumericalDefect
from coulomb_lab.pointsets import Box, PointSet, from_points, gen_named, integer_array


@dataclass(frozen=True)
class BlockWindow:
    x0: int
    y0: int
    nx: int
    ny: int

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1:
            raise LabError("block window must be non-empty")

    @classmethod
    def centered(cls, n: int) -> "BlockWindow":
        return cls(-(n // 2), -(n // 2), n, n)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    def padded(self, k: int = 1) -> "BlockWindow":
        return BlockWindow(self.x0 - k, self.y0 - k, self.nx + 2 * k, self.ny + 2 * k)

    def contains(self, p) -> bool:
        return self.x0 <= p[0] < self.x0 + self.nx and self.y0 <= p[1] < self.y0 + self.ny

    def local(self, p) -> tuple[int, int]:
        if not self.contains(p):
            raise LabError(f"block {tuple(p)} outside window {self}")
        return (int(p[0]) - self.x0, int(p[1]) - self.y0)

    def interior_mask(self) -> np.ndarray:
        m = np.zeros(self.shape, bool)
        if self.nx > 2 and self.ny > 2:
            m[1:-1, 1:-1] = True
        return m


@dataclass
class OneForm:
    window: BlockWindow
    h: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        nx, ny = self.window.shape
        if self.h.shape != (nx - 1, ny) or self.v.shape != (nx, ny - 1):
            raise LabError("edge arrays do not match the window")

    @classmethod
    def zeros(cls, window: BlockWindow, dtype=np.int64) -> "OneForm":
        nx, ny = window.shape
        return cls(window, np.zeros((nx - 1, ny), dtype), np.zeros((nx, ny - 1), dtype))

    def value(self, p, q):
        """phi(p, q) for adjacent blocks p, q of the window."""
        i, j = self.window.local(p)
        k, l = self.window.local(q)
        if (k - i, l - j) == (1, 0):
            return self.h[i, j]
        if (k - i, l - j) == (-1, 0):
            return -self.h[k, l]
        if (k - i, l - j) == (0, 1):
            return self.v[i, j]
        if (k - i, l - j) == (0, -1):
            return -self.v[k, l]
        raise LabError(f"{tuple(p)} and {tuple(q)} are not adjacent")

    def edges(self):
        """Yield ((p, q), phi(p, q)) for each undirected edge with p < q."""
        x0, y0 = self.window.x0, self.window.y0
        for (i, j), val in np.ndenumerate(self.h):
            yield ((x0 + i, y0 + j), (x0 + i + 1, y0 + j)), val
        for (i, j), val in np.ndenumerate(self.v):
            yield ((x0 + i, y0 + j), (x0 + i, y0 + j + 1)), val

    def sup_norm(self):
        vals = [abs(x) for x in (self.h.max(initial=0), self.h.min(initial=0), self.v.max(initial=0), self.v.min(initial=0))]
        return max(vals)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["px", "py", "qx", "qy", "value"])
        for (p, q), val in self.edges():
            if val != 0:
                w.writerow([p[0], p[1], q[0], q[1], str(val)])
        return buf.getvalue()


def _embed(f: np.ndarray, src: BlockWindow, dst: BlockWindow) -> np.ndarray:
    out = np.zeros(dst.shape, dtype=f.dtype)
    i, j = src.x0 - dst.x0, src.y0 - dst.y0
    out[i:i + src.nx, j:j + src.ny] = f
    return out


def block_array(f, window: BlockWindow | None = None, dtype=np.int64) -> tuple[np.ndarray, BlockWindow]:
    """Coerce a dict {block: value} or an array on ``window`` to (array, window)."""
    if isinstance(f, dict):
        if window is None:
            if not f:
                window = BlockWindow(0, 0, 1, 1)
            else:
                ks = np.array(list(f.keys()))
                lo, hi = ks.min(axis=0), ks.max(axis=0)
                window = BlockWindow(int(lo[0]), int(lo[1]), int(hi[0] - lo[0] + 1), int(hi[1] - lo[1] + 1))
        dt = object if any(isinstance(x, Fraction) for x in f.values()) else dtype
        arr = np.zeros(window.shape, dtype=dt)
        if dt is object:
            arr[...] = 0
        for k, val in f.items():
            arr[window.local(k)] = val
        return arr, window
    if window is None:
        raise LabError("an array block function needs its window")
    arr = np.asarray(f)
    if arr.shape != window.shape:
        raise LabError("block function does not match its window")
    return arr, window


def gradient_form(f, window: BlockWindow | None = None) -> OneForm:
    """grad f (p, q) = f(q) - f(p), on the window padded by one block."""
    arr, win = block_array(f, window)
    pw = win.padded(1)
    F = _embed(arr, win, pw)
    return OneForm(pw, F[1:, :] - F[:-1, :], F[:, 1:] - F[:, :-1])


def divergence(phi: OneForm) -> np.ndarray:
    """div phi (p) = sum over neighbours q of phi(p, q), for every block of the window."""
    h, v = phi.h, phi.v
    d = np.zeros(phi.window.shape, dtype=np.result_type(h, v))
    if d.dtype == object:
        d[...] = 0
    d[:-1, :] = d[:-1, :] + h
    d[1:, :] = d[1:, :] - h
    d[:, :-1] = d[:, :-1] + v
    d[:, 1:] = d[:, 1:] - v
    return d


def divergence_at(phi: OneForm, p):
    return divergence(phi)[phi.window.local(p)]


def pairing(phi: OneForm, psi: OneForm):
    """<phi, psi> = sum over undirected edges of phi * psi (forms on the same window)."""
    if phi.window != psi.window:
        raise LabError("forms live on different windows")
    return (phi.h * psi.h).sum() + (phi.v * psi.v).sum()


def total_variation(phi: OneForm, S=None):
    """[phi, S] = 1/2 sum over directed edges a in S of |phi(a)|; S=None means all edges."""
    if S is None:
        return abs(phi.h).sum() + abs(phi.v).sum()
    tot = 0
    for p, q in S:
        tot = tot + abs(phi.value(p, q))
    return Fraction(tot) / 2 if not isinstance(tot, float) else tot / 2


def elementary_form(window: BlockWindow, p, q) -> OneForm:
    """alpha_(p,q): 1 on (p, q), -1 on (q, p), 0 elsewhere."""
    phi = OneForm.zeros(window)
    i, j = window.local(p)
    k, l = window.local(q)
    d = (k - i, l - j)
    if d == (1, 0):
        phi.h[i, j] = 1
    elif d == (-1, 0):
        phi.h[k, l] = -1
    elif d == (0, 1):
        phi.v[i, j] = 1
    elif d == (0, -1):
        phi.v[k, l] = -1
    else:
        raise LabError("blocks are not adjacent")
    return phi


def perimeter(B) -> int:
    """Number of directed edges (p, q) with p in B and q not in B."""
    S = {tuple(map(int, b)) for b in B}
    n = 0
    for x, y in S:
        for q in ((x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)):
            if q not in S:
                n += 1
    return n


def loop_integrals(phi: OneForm) -> np.ndarray:
    """Circulation around every unit square of the window (counterclockwise)."""
    h, v = phi.h, phi.v
    return h[:, :-1] + v[1:, :] - h[:, 1:] - v[:-1, :]


def poincare_potential(phi: OneForm) -> np.ndarray:
    """f with grad f = phi, f = 0 at the lower-left block; requires zero loop integrals."""
    if np.any(loop_integrals(phi) != 0):
        raise LabError("form is not closed")
    nx, ny = phi.window.shape
    f = np.zeros((nx, ny), dtype=np.result_type(phi.h, phi.v))
    if f.dtype == object:
        f[...] = 0
    f[1:, 0] = np.cumsum(phi.h[:, 0])
    f[:, 1:] = f[:, :1] + np.cumsum(phi.v, axis=1)
    return f


def gradient_on_window(f: np.ndarray, window: BlockWindow) -> OneForm:
    """grad f restricted to edges inside the window (no padding)."""
    return OneForm(window, f[1:, :] - f[:-1, :], f[:, 1:] - f[:, :-1])


# -- defect measures -----------------------------------------------------------------------------


@dataclass
class BlockMeasure:
    N: int
    window: BlockWindow
    mu: np.ndarray

    def __post_init__(self):
        if self.N < 1:
            raise LabError("N must be >= 1")
        if self.mu.shape != self.window.shape:
            raise LabError("measure does not match window")

    def at(self, p) -> int:
        return int(self.mu[self.window.local(p)])

    def total(self, B) -> int:
        return int(sum(self.at(p) for p in B))


def _check_blocks_inside(P: PointSet, N: int, window: BlockWindow):
    lo = np.array([window.x0 * N, window.y0 * N], float)
    hi = np.array([(window.x0 + window.nx) * N - 1, (window.y0 + window.ny) * N - 1], float)
    s = 1e-9
    if np.any(lo < P.window.lo - s) or np.any(hi > P.window.hi + s):
        raise LabError("blocks extend beyond the populated window of the point set")


def block_counts(P: PointSet, N: int, window: BlockWindow) -> np.ndarray:
    """Number of points of the integer set P in each block."""
    if N < 1:
        raise LabError("N must be >= 1")
    _check_blocks_inside(P, N, window)
    ip = integer_array(P)
    b = np.floor_divide(ip, N) - np.array([window.x0, window.y0])
    ok = (b[:, 0] >= 0) & (b[:, 0] < window.nx) & (b[:, 1] >= 0) & (b[:, 1] < window.ny)
    b = b[ok]
    c = np.bincount(b[:, 0] * window.ny + b[:, 1], minlength=window.nx * window.ny)
    return c.reshape(window.shape).astype(np.int64)


def mu_blocks(A: PointSet, N: int, window: BlockWindow) -> BlockMeasure:
    """mu_N(p) = #(A ∩ K_p), the deficit of Z^2 minus A in each block."""
    return BlockMeasure(N, window, block_counts(A, N, window))


def mu_from_lattice(Lambda: PointSet, N: int, window: BlockWindow) -> BlockMeasure:
    """mu_N(p) = N^2 - #(Lambda ∩ K_p); refuses sets with more than N^2 points in a block."""
    mu = N * N - block_counts(Lambda, N, window)
    if np.any(mu < 0):
        raise LabError("a block holds more than N^2 points")
    return BlockMeasure(N, window, mu)


# -- bounded flow --------------------------------------------------------------------------------


def _flow_network(mu: BlockMeasure, c: int, pop: np.ndarray):
    nx, ny = mu.window.shape
    nb = nx * ny
    S, T = nb, nb + 1
    interior = mu.window.interior_mask()
    idx = np.arange(nb).reshape(nx, ny)
    rows, cols, caps = [], [], []

    def add(a, b, w):
        a, b, w = np.ravel(a), np.ravel(b), np.ravel(np.broadcast_to(w, np.shape(a)))
        keep = w > 0
        rows.append(a[keep])
        cols.append(b[keep])
        caps.append(w[keep])

    bnd = ~interior
    add(np.full(int(bnd.sum()), S), idx[bnd], pop[bnd])
    add(idx[interior], np.full(int(interior.sum()), T), mu.mu[interior])
    for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        a = idx[max(0, -di):nx - max(0, di), max(0, -dj):ny - max(0, dj)]
        b = idx[max(0, di):nx + min(0, di), max(0, dj):ny + min(0, dj)]
        # boundary blocks only feed interior neighbours
        ok = interior.ravel()[b]
        add(a[ok], b[ok], c)
    r = np.concatenate(rows)
    cc = np.concatenate(cols)
    w = np.concatenate(caps).astype(np.int32)
    G = csr_matrix((w, (r, cc)), shape=(nb + 2, nb + 2))
    G.sum_duplicates()
    return G, S, T


def _max_flow(mu: BlockMeasure, c: int, pop: np.ndarray):
    G, S, T = _flow_network(mu, c, pop)
    res = maximum_flow(G, S, T)
    return res.flow_value, res.flow


def bounded_flow(mu: BlockMeasure, pop: np.ndarray | None = None, return_bottleneck: bool = False):
    """Integer phi with -div phi = mu on interior blocks and minimal sup norm.

    Mass enters interior blocks from the boundary ring; each boundary block
    supplies at most its population (N^2 - mu by default). The bottleneck is
    found by binary search on a uniform edge capacity, each step one max-flow.
    """
    if np.any(mu.mu < 0):
        raise LabError("mu must be nonnegative")
    win = mu.window
    if pop is None:
        pop = mu.N * mu.N - mu.mu
    interior = win.interior_mask()
    need = int(mu.mu[interior].sum())
    if need == 0:
        phi = OneForm.zeros(win)
        return (phi, 0) if return_bottleneck else phi
    if need > int(pop[~interior].sum()) or need >= 2 ** 31:
        raise NumericalDefect("boundary supply cannot carry the interior deficit")
    lo, hi = 0, need
    if _max_flow(mu, hi, pop)[0] != need:
        raise NumericalDefect("max-flow infeasible at capacity equal to total mass")
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if _max_flow(mu, mid, pop)[0] == need:
            hi = mid
        else:
            lo = mid
    val, F = _max_flow(mu, hi, pop)
    nx, ny = win.shape
    nb = nx * ny
    F = F.tocsr()[:nb, :nb]
    idx = np.arange(nb).reshape(nx, ny)

    def net(a, b):
        # scipy returns a skew-symmetric flow matrix: F[a, b] is the net flow a -> b
        a, b = a.ravel(), b.ravel()
        return np.asarray(F[a, b]).ravel().astype(np.int64)

    h = net(idx[:-1, :], idx[1:, :]).reshape(nx - 1, ny)
    v = net(idx[:, :-1], idx[:, 1:]).reshape(nx, ny - 1)
    phi = OneForm(win, h, v)
    d = divergence(phi)
    if np.any(-d[interior] != mu.mu[interior]):
        raise NumericalDefect("flow does not satisfy -div phi = mu on interior blocks")
    if phi.sup_norm() > hi:
        raise NumericalDefect("flow exceeds its capacity")
    return (phi, hi) if return_bottleneck else phi


# -- transport and bijection ---------------------------------------------------------------------

# neighbour order used everywhere: lexicographic order of q relative to p
DIRS = ((-1, 0), (0, -1), (0, 0), (0, 1), (1, 0))


@dataclass
class TransportTable:
    N: int
    window: BlockWindow
    pop: np.ndarray
    n: np.ndarray  # shape (5, nx, ny): n_{p -> p + DIRS[k]}

    def entry(self, p, q) -> int:
        i, j = self.window.local(p)
        d = (q[0] - p[0], q[1] - p[1])
        if d not in DIRS:
            return 0
        return int(self.n[DIRS.index(d), i, j])

    def column_sums(self) -> np.ndarray:
        nx, ny = self.window.shape
        col = np.zeros((nx + 2, ny + 2), np.int64)
        for k, (dx, dy) in enumerate(DIRS):
            col[1 + dx:1 + dx + nx, 1 + dy:1 + dy + ny] += self.n[k]
        return col[1:-1, 1:-1]


def _outflows(phi: OneForm) -> np.ndarray:
    nx, ny = phi.window.shape
    out = np.zeros((5, nx, ny), np.int64)
    h = np.asarray(phi.h, dtype=np.int64)
    v = np.asarray(phi.v, dtype=np.int64)
    out[4, :-1, :] = np.maximum(h, 0)       # to (x+1, y)
    out[0, 1:, :] = np.maximum(-h, 0)      # to (x-1, y)
    out[3, :, :-1] = np.maximum(v, 0)       # to (x, y+1)
    out[1, :, 1:] = np.maximum(-v, 0)      # to (x, y-1)
    return out


def block_transport(Lambda: PointSet, phi: OneForm, N: int) -> TransportTable:
    """n_{p->q} = max(phi(p,q), 0) for neighbours, n_{p->p} = population - outflow."""
    win = phi.window
    pop = block_counts(Lambda, N, win)
    n = _outflows(phi)
    n[2] = pop - n[[0, 1, 3, 4]].sum(axis=0)
    if np.any(n[2] < 0):
        raise BlockSizeTooSmall("N too small for ||phi||_inf: a block would send more points than it holds")
    tab = TransportTable(N, win, pop, n)
    if np.any(n.sum(axis=0) != pop):
        raise NumericalDefect("transport row sums differ from block populations")
    interior = win.interior_mask()
    if np.any(tab.column_sums()[interior] != N * N):
        raise LabError("table inconsistent: interior column sums differ from N^2 (phi does not match mu)")
    return tab


@dataclass
class Bijection:
    src: np.ndarray
    dst: np.ndarray
    max_displacement: float
    N: int

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["from_x", "from_y", "to_x", "to_y"])
        w.writerows(np.column_stack([self.src, self.dst]).tolist())
        return buf.getvalue()

    def inverse(self) -> dict:
        return {tuple(d): tuple(s) for s, d in zip(self.src.tolist(), self.dst.tolist())}


def build_bijection(Lambda: PointSet, table: TransportTable, N: int) -> Bijection:
    """Explicit Phi: Lambda -> Z^2 onto the integer points of the interior blocks."""
    win = table.window
    nx, ny = win.shape
    ip = integer_array(Lambda)
    b = np.floor_divide(ip, N) - np.array([win.x0, win.y0])
    ok = (b[:, 0] >= 0) & (b[:, 0] < nx) & (b[:, 1] >= 0) & (b[:, 1] < ny)
    ip, b = ip[ok], b[ok]
    bid = b[:, 0] * ny + b[:, 1]
    order = np.lexsort((ip[:, 1], ip[:, 0], bid))
    ip, b, bid = ip[order], b[order], bid[order]
    pop = np.bincount(bid, minlength=nx * ny)
    if np.any(pop.reshape(nx, ny) != table.pop):
        raise LabError("table populations do not match the point set")
    start = np.concatenate([[0], np.cumsum(pop)[:-1]])
    rank = np.arange(len(bid)) - start[bid]
    cum = np.cumsum(table.n.reshape(5, -1), axis=0)  # (5, nb)
    k = (rank[None, :] >= cum[:, bid]).sum(axis=0)
    dirs = np.array(DIRS)
    q = b + dirs[k]
    interior = win.interior_mask()
    inq = (q[:, 0] >= 0) & (q[:, 0] < nx) & (q[:, 1] >= 0) & (q[:, 1] < ny)
    qi = np.zeros(len(q), bool)
    qi[inq] = interior[q[inq, 0], q[inq, 1]]
    src, q = ip[qi], q[qi]
    qid = q[:, 0] * ny + q[:, 1]
    o2 = np.lexsort((src[:, 1], src[:, 0], qid))
    src, q, qid = src[o2], q[o2], qid[o2]
    cnt = np.bincount(qid, minlength=nx * ny)
    st = np.concatenate([[0], np.cumsum(cnt)[:-1]])
    r = np.arange(len(qid)) - st[qid]
    if np.any(cnt[interior.ravel()] != N * N) or np.any(r >= N * N):
        raise LabError("table infeasible: a receiving block does not get exactly N^2 points")
    gq = q + np.array([win.x0, win.y0])
    dst = np.column_stack([gq[:, 0] * N + r // N, gq[:, 1] * N + r % N]).astype(np.int64)
    disp = np.hypot(*(dst - src).T.astype(float)) if len(src) else np.zeros(0)
    md = float(disp.max(initial=0.0))
    # verify bijectivity onto the interior slots
    n_int = int(interior.sum()) * N * N
    key = (dst[:, 0] - win.x0 * N) * (ny * N) + (dst[:, 1] - win.y0 * N)
    if len(dst) != n_int or len(np.unique(key)) != n_int:
        raise NumericalDefect("constructed map is not a bijection onto the interior slots")
    if md > 2 * math.sqrt(2) * N + 1e-9:
        raise NumericalDefect("displacement exceeds 2 sqrt(2) N")
    return Bijection(src, dst, md, N)


# -- one dimension --------------------------------------------------------------------------------


@dataclass
class OneForm1D:
    """phi((k, k+1)) = values[k - k0] for k = k0 .. k0 + len(values) - 1."""

    k0: int
    values: np.ndarray

    def minus_div(self) -> np.ndarray:
        """-div phi (k) = phi((k-1, k)) - phi((k, k+1)) for k = k0+1 .. k0+len-1."""
        return self.values[:-1] - self.values[1:]

    def sup_norm(self):
        return max(abs(x) for x in self.values) if len(self.values) else 0


def prefix_flow_1d(mu, k0: int = 0) -> OneForm1D:
    """The prefix-sum flow anchored at 0: phi((k,k+1)) = -sum_{i=1}^{k} mu(i) for k >= 0,
    sum_{i=k+1}^{0} mu(i) for k < 0. ``mu[i]`` is the value at block k0 + i.

    Returned edges cover k = k0 - 1 .. k0 + len(mu) - 1, so -div phi = mu on
    every block carrying mu.
    """
    mu = np.asarray(mu)
    ks = np.arange(k0 - 1, k0 + len(mu))
    blocks = np.arange(k0, k0 + len(mu))
    cs = np.concatenate([[0], np.cumsum(mu)])  # cs[i] = sum of first i entries

    def S(a, b):
        # sum of mu(i) for a <= i <= b (blocks), clipped to the support
        a = max(a, k0)
        b = min(b, k0 + len(mu) - 1)
        return cs[b - k0 + 1] - cs[a - k0] if b >= a else 0

    vals = [(-S(1, k) if k >= 0 else S(k + 1, 0)) for k in ks]
    return OneForm1D(int(k0 - 1), np.array(vals, dtype=mu.dtype if mu.dtype != bool else np.int64))


def mu_1d(points, N, k0: int, nblocks: int) -> np.ndarray:
    """N - #(points ∩ [kN, kN+N)) for k = k0 .. k0+nblocks-1 (real points allowed)."""
    x = np.asarray(points, float).reshape(-1)
    k = np.floor(x / N).astype(np.int64) - k0
    k = k[(k >= 0) & (k < nblocks)]
    return N - np.bincount(k, minlength=nblocks).astype(np.int64)


# -- defect families ------------------------------------------------------------------------------


def row_defects(window: BlockWindow, N: int, row: int = 0) -> np.ndarray:
    """The full integer row y = row across the window's x-extent."""
    xs = np.arange(window.x0 * N, (window.x0 + window.nx) * N, dtype=np.int64)
    return np.column_stack([xs, np.full_like(xs, row)])


def column_graph_defects(window: BlockWindow, N: int, seed: int, height: int = 4) -> np.ndarray:
    """One removed point per integer column, at a random height in [0, height).

    The height of column x is drawn from a generator keyed on (seed, x), so
    nested windows see the same defects.
    """
    xs = np.arange(window.x0 * N, (window.x0 + window.nx) * N, dtype=np.int64)
    ys = np.array([np.random.default_rng([seed, int(x) & 0xFFFFFFFF]).integers(0, height) for x in xs])
    return np.column_stack([xs, ys]).astype(np.int64)


def thinned_row_defects(window: BlockWindow, N: int, seed: int, p: float = 0.5) -> np.ndarray:
    """Each point of the row y = 0 removed independently with probability p (keyed per column)."""
    A = row_defects(window, N)
    keep = np.array([np.random.default_rng([seed, int(x) & 0xFFFFFFFF]).random() < p for x in A[:, 0]], bool)
    return A[keep]


def lattice_minus(A: np.ndarray, window: BlockWindow, N: int) -> PointSet:
    """Z^2 minus A on the integer points of the block window, as a PointSet."""
    box = Box.from_bounds((window.x0 * N, window.y0 * N),
                          ((window.x0 + window.nx) * N - 1, (window.y0 + window.ny) * N - 1))
    return gen_named("Z2_minus_A", box, np.asarray(A, dtype=np.int64).reshape(-1, 2))


def defect_set(A: np.ndarray, window: BlockWindow, N: int) -> PointSet:
    box = Box.from_bounds((window.x0 * N, window.y0 * N),
                          ((window.x0 + window.nx) * N - 1, (window.y0 + window.ny) * N - 1))
    A = np.asarray(A, dtype=np.int64).reshape(-1, 2)
    A = A[box.contains(A)] if len(A) else A
    return from_points(A, box, "defects")


@dataclass
class FlowRun:
    N: int
    window: BlockWindow
    mu: BlockMeasure
    phi: OneForm
    bottleneck: int
    table: TransportTable
    bijection: Bijection


def run_bijection(A: np.ndarray, window: BlockWindow, N: int) -> FlowRun:
    """Full pipeline for Lambda = Z^2 minus A on a block window."""
    Lam = lattice_minus(A, window, N)
    mu = mu_from_lattice(Lam, N, window)
    phi, c = bounded_flow(mu, return_bottleneck=True)
    tab = block_transport(Lam, phi, N)
    bij = build_bijection(Lam, tab, N)
    return FlowRun(N, window, mu, phi, c, tab, bij)
