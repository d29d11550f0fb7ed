"""Ball-count discrepancy statistics and the counting-only flux lower bound."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.stats import qmc

from coulomb_lab.errors import LabError
from coulomb_lab.pointsets import PointSet, count_in_balls

log = logging.getLogger(__name__)

# inward shift applied to r_min when it sits exactly on a point radius
NUDGE = 1e-9


@dataclass
class DiscrepancyReport:
    radii: list
    sup_disc: list
    fitted_C: float
    fitted_alpha: float
    samples: int
    seed: int
    m: float = 1.0
    excluded: list = field(default_factory=list)

    def to_json(self) -> str:
        d = {"schema": "v1"}
        d.update(asdict(self))
        return json.dumps(d)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["R", "sup_disc"])
        for R, s in zip(self.radii, self.sup_disc):
            w.writerow([repr(float(R)), repr(float(s))])
        return buf.getvalue()


def sample_centers(P: PointSet, R: float, n_samples: int, seed: int) -> np.ndarray:
    """Window center followed by n_samples Halton points in the region where B(x,R) fits."""
    if n_samples < 0:
        raise LabError("n_samples must be >= 0")
    lo = P.window.lo + R
    hi = P.window.hi - R
    if np.any(hi < lo):
        raise LabError(f"window of {P.label!r} is too small for radius {R}")
    c = np.array(P.window.center)[None, :]
    if n_samples == 0:
        return c
    # the Halton sequence for a given seed is prefix-stable in n
    u = qmc.Halton(d=2, scramble=True, seed=seed).random(n_samples)
    return np.vstack([c, lo + u * (hi - lo)])


def discrepancy_sup(P: PointSet, m: float, R: float, n_samples: int, seed: int) -> float:
    """max over sampled centers x of |#(B(x,R) ∩ P) - m*pi*R^2|."""
    if R <= 0:
        raise LabError("R must be positive")
    xs = sample_centers(P, R, n_samples, seed)
    counts = count_in_balls(P, xs, R)
    return float(np.max(np.abs(counts - m * math.pi * R * R)))


def fit_loglog(x, y) -> tuple[float, float]:
    """OLS fit of log y = log C + alpha log x; returns (C, alpha)."""
    lx, ly = np.log(np.asarray(x, float)), np.log(np.asarray(y, float))
    A = np.column_stack([np.ones_like(lx), lx])
    (c0, a), *_ = np.linalg.lstsq(A, ly, rcond=None)
    return float(math.exp(c0)), float(a)


def fit_exponent(P: PointSet, m: float, radii, n_samples: int, seed: int) -> DiscrepancyReport:
    radii = [float(r) for r in radii]
    if len(radii) < 4:
        raise LabError("fit_exponent needs at least 4 radii")
    if any(b <= a for a, b in zip(radii, radii[1:])):
        raise LabError("radii must be strictly increasing")
    sups = [discrepancy_sup(P, m, R, n_samples, seed) for R in radii]
    keep = [i for i, s in enumerate(sups) if s > 0]
    excluded = [radii[i] for i in range(len(radii)) if i not in keep]
    if len(keep) < 2:
        raise LabError("discrepancy vanishes at (almost) all radii; exponent fit undefined")
    C, alpha = fit_loglog([radii[i] for i in keep], [sups[i] for i in keep])
    return DiscrepancyReport(radii, sups, C, alpha, n_samples, seed, m, excluded)


def _piece_integral(n: float, m: float, a: float, b: float) -> float:
    # closed form of the integral of pi*(n - m*pi*r^2)^2 / r over [a, b]
    return math.pi * (n * n * math.log(b / a)
                      - n * m * math.pi * (b * b - a * a)
                      + m * m * math.pi ** 2 * (b ** 4 - a ** 4) / 4.0)


def flux_lower_bound(P: PointSet, m: float, R: float, r_min: float, center=(0.0, 0.0)) -> float:
    """Integral over (r_min, R) of pi*(N(r) - m*pi*r^2)^2 / r, N(r) = #(closed B(center, r) ∩ P).

    For any field j with the prescribed divergence, Cauchy-Schwarz on each
    circle bounds half the Dirichlet energy of j on the annulus from below by
    this quantity.
    """
    if not 0 < r_min < R:
        raise LabError("need 0 < r_min < R")
    c = np.asarray(center, float)
    if not P.window.contains_ball(c, R):
        raise LabError(f"ball of radius {R} exits the window of {P.label!r}")
    if len(P):
        d = np.sort(np.hypot(*(P.points - c).T))
    else:
        d = np.zeros(0)
    if len(d) and np.any(np.abs(d - r_min) <= 1e-12 * max(1.0, r_min)):
        log.info("flux_lower_bound: r_min=%r coincides with a point radius; nudged by -%g", r_min, NUDGE)
        r_min = r_min - NUDGE
    n0 = int(np.searchsorted(d, r_min, side="right"))
    jumps = d[(d > r_min) & (d < R)]
    # group coincident radii so each piece has a single count
    breaks, counts = np.unique(jumps, return_counts=True)
    parts = []
    a, n = r_min, n0
    for b, k in zip(breaks.tolist(), counts.tolist()):
        parts.append(_piece_integral(n, m, a, b))
        a, n = b, n + k
    parts.append(_piece_integral(n, m, a, R))
    return math.fsum(parts)
