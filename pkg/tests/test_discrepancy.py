import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from coulomb_lab.discrepancy import (
    discrepancy_sup, fit_exponent, flux_lower_bound, sample_centers,
)
from coulomb_lab.errors import LabError
from coulomb_lab.pointsets import Box, PointSet, gen_named, gen_ring_counterexample


@pytest.fixture(scope="module")
def z2():
    return gen_named("Z2", Box.square(40))


def test_gauss_count_oracle(z2):
    # 317 lattice points in the closed disc of radius 10
    assert discrepancy_sup(z2, 1.0, 10.0, 0, 1) == pytest.approx(abs(317 - 100 * math.pi), abs=1e-9)
    assert abs(317 - 100 * math.pi) == pytest.approx(2.8407, abs=1e-4)
    assert discrepancy_sup(z2, 1.0, 10.0, 32, 3) >= 2.8407
    assert discrepancy_sup(z2, 0.0, 10.0, 16, 3) >= 317


def test_empty_set_zero():
    P = PointSet(np.zeros((0, 2)), None, Box.square(10))
    assert discrepancy_sup(P, 0.0, 3.0, 10, 0) == 0.0


def test_center_always_sampled(z2):
    xs = sample_centers(z2, 5.0, 7, 11)
    assert xs.shape == (8, 2) and np.allclose(xs[0], 0)
    assert np.all(np.abs(xs) <= 35 + 1e-12)


def test_window_too_small(z2):
    with pytest.raises(LabError):
        discrepancy_sup(z2, 1.0, 41.0, 4, 0)


@settings(max_examples=10, deadline=None)
@given(st.integers(1, 40), st.integers(1, 40), st.integers(0, 1000))
def test_more_samples_never_smaller(n1, extra, seed):
    P = gen_named("Z2", Box.square(30))
    a = discrepancy_sup(P, 1.0, 7.3, n1, seed)
    b = discrepancy_sup(P, 1.0, 7.3, n1 + extra, seed)
    assert b >= a


def test_fit_z2_exponent():
    P = gen_named("Z2", Box.square(160))
    rep = fit_exponent(P, 1.0, np.geomspace(8, 128, 6), 32, 1)
    assert 0.4 < rep.fitted_alpha < 0.9
    assert all(s >= 0 for s in rep.sup_disc)
    d = json.loads(rep.to_json())
    assert d["schema"] == "v1" and len(d["radii"]) == 6
    assert rep.to_csv().splitlines()[0] == "R,sup_disc"


def test_fit_Z_linear():
    P = gen_named("Z", Box.square(600))
    rep = fit_exponent(P, 0.0, np.geomspace(10, 500, 6), 0, 0)
    assert rep.fitted_alpha == pytest.approx(1.0, abs=0.1)


def test_fit_errors():
    P = PointSet(np.zeros((0, 2)), None, Box.square(100))
    with pytest.raises(LabError):
        fit_exponent(P, 0.0, [1, 2, 4, 8], 4, 0)
    with pytest.raises(LabError):
        fit_exponent(P, 0.0, [1, 2, 4], 4, 0)


def test_flux_empty_closed_form():
    P = PointSet(np.zeros((0, 2)), None, Box.square(2))
    assert flux_lower_bound(P, 1.0, 1.0, 1e-9) == pytest.approx(math.pi ** 3 / 4, rel=1e-12)
    assert flux_lower_bound(P, 0.0, 1.0, 1e-3) == 0.0


def test_flux_single_point_closed_form():
    # N(r) = 1 for r >= 0, m = 0: integral of pi / r
    P = PointSet(np.zeros((1, 2)), None, Box.square(5))
    assert flux_lower_bound(P, 0.0, 4.0, 0.5) == pytest.approx(math.pi * math.log(8.0), rel=1e-14)


def test_flux_matches_quadrature(z2):
    # independent oracle: fine trapezoid on the step function
    r = np.linspace(1.0, 9.0, 400001)
    d = np.sort(np.hypot(*z2.points.T))
    N = np.searchsorted(d, r, side="right")
    g = math.pi * (N - math.pi * r ** 2) ** 2 / r
    ref = float(np.sum((g[1:] + g[:-1]) / 2 * np.diff(r)))
    assert flux_lower_bound(z2, 1.0, 9.0, 1.0) == pytest.approx(ref, rel=2e-4)


def test_flux_nudge_on_point_radius(z2, caplog):
    with caplog.at_level("INFO"):
        v = flux_lower_bound(z2, 1.0, 5.0, 1.0)
    assert "nudged" in caplog.text
    assert math.isfinite(v)


@settings(max_examples=20, deadline=None)
@given(st.floats(1.5, 20), st.floats(0.1, 5))
def test_flux_monotone_in_R(R, dR):
    P = gen_named("Z2", Box.square(30))
    assert flux_lower_bound(P, 1.0, R + dR, 0.7) >= flux_lower_bound(P, 1.0, R, 0.7) - 1e-9


def test_background_uniqueness():
    P = gen_named("Z2", Box.square(70))
    for R in (20, 40, 60):
        good = flux_lower_bound(P, 1.0, R, 0.5) / R ** 2
        bad = flux_lower_bound(P, 1.1, R, 0.5) / R ** 2
        assert bad > 10 * good
    r = [flux_lower_bound(P, 0.9, R, 0.5) / R ** 2 for R in (20, 40, 60)]
    assert r[2] / r[0] > 5


def test_flux_ring_growth():
    P = gen_ring_counterexample(0.0, 0.3, 40)
    ks = np.array([4, 8, 16, 32])
    vals = [flux_lower_bound(P, 0.0, 4 * k + 2, 1.0) for k in ks]
    slope = np.polyfit(np.log(4 * ks + 2), np.log(vals), 1)[0]
    assert 2.2 < slope < 2.9
