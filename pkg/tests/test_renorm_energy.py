import json
import math

import numpy as np
import pytest

from coulomb_lab.discrepancy import flux_lower_bound
from coulomb_lab.errors import LabError
from coulomb_lab.fields import make_V1, make_Z2, monopole_field, zero_field
from coulomb_lab.pointsets import Box, gen_named, gen_ring_counterexample
from coulomb_lab.renorm_energy import (
    MASK_J, CutoffProfile, ball_energy, classify, cutoff_value, default_delta, energy_curve,
    flux_energy_curve, mask, window_energy,
)


def annulus_oracle(f, p, delta, eta=1e-5, n=4000, m=64):
    # independent route: 1/2 int_{eta<|x-p|<delta} |j|^2 + pi log(eta), log-spaced midpoint in r
    s = np.log(eta) + (np.arange(n) + 0.5) * (np.log(delta) - np.log(eta)) / n
    r = np.exp(s)
    ds = (np.log(delta) - np.log(eta)) / n
    th = 2 * np.pi * (np.arange(m) + 0.5) / m
    R, T = np.meshgrid(r, th, indexing="ij")
    X = np.asarray(p) + np.column_stack([(R * np.cos(T)).ravel(), (R * np.sin(T)).ravel()])
    j2 = np.einsum("ij,ij->i", f(X), f(X)).reshape(R.shape)
    return 0.5 * float(np.sum(j2 * (R * R) * ds * (2 * np.pi / m))) + math.pi * math.log(eta)


def test_cutoff_values():
    c = CutoffProfile(10.0)
    assert cutoff_value(c, [9.0, 0.0]) == 1.0
    assert cutoff_value(c, [0.0, 9.5]) == pytest.approx(0.5)
    assert cutoff_value(c, [10.0, 0.0]) == 0.0
    assert cutoff_value(c, [0.0, 0.0]) == 1.0
    cu = CutoffProfile(10.0, "cubic")
    assert cutoff_value(cu, [9.5, 0.0]) == pytest.approx(0.5)
    assert cutoff_value(cu, [9.0, 0.0]) == 1.0 and cutoff_value(cu, [10.0, 0]) == 0.0
    r = np.linspace(0, 12, 1001)
    for prof in (c, cu):
        v = cutoff_value(prof, np.column_stack([r, 0 * r]))
        assert np.all((v >= 0) & (v <= 1)) and np.all(np.diff(v) <= 0)
        assert np.max(np.abs(np.diff(v) / np.diff(r))) <= prof.grad_bound + 1e-9
    with pytest.raises(LabError):
        CutoffProfile(1.0)
    with pytest.raises(LabError):
        CutoffProfile(3.0, "sharp")


def test_mask_and_J():
    assert mask(0.3) == 1.0 and mask(1.0) == 0.0 and mask(0.75) == pytest.approx(0.5)
    t = np.linspace(0.5, 1.0, 200001)
    ref = np.trapezoid(mask(t) ** 2 / t, t) if hasattr(np, "trapezoid") else np.trapz(mask(t) ** 2 / t, t)
    assert MASK_J == pytest.approx(ref, abs=1e-9)


def test_ball_energy_examples():
    f = monopole_field((0, 0))
    assert ball_energy(f, (0, 0), 0.25) == pytest.approx(math.pi * math.log(0.25), abs=1e-14)
    assert ball_energy(f, (0, 0), 0.25) == pytest.approx(-4.355172180607204, abs=1e-12)
    assert ball_energy(f, (0, 0), 1.0) == pytest.approx(0.0, abs=1e-14)
    g = monopole_field((0, 0), const=(1.0, 2.0))
    want = math.pi * math.log(0.5) + 0.5 * math.pi * 0.25 * 5
    assert ball_energy(g, (0, 0), 0.5) == pytest.approx(want, rel=1e-13)
    assert want == pytest.approx(-0.21409068180998148, abs=1e-14)


def test_ball_energy_matches_annulus_limit():
    f = make_Z2(Box.square(3))
    got = ball_energy(f, (0, 0), 0.25)
    assert got == pytest.approx(annulus_oracle(f, (0, 0), 0.25), abs=2e-6)
    v = make_V1(Box.square(3))
    assert ball_energy(v, (1, 0), 0.2) == pytest.approx(annulus_oracle(v, (1, 0), 0.2), abs=2e-6)


def test_ball_energy_delta_regression():
    # pure monopole: the delta dependence is exactly the log ratio
    f = monopole_field((0, 0), 2.0)
    assert ball_energy(f, (0, 0), 0.3) - ball_energy(f, (0, 0), 0.1) == pytest.approx(4 * math.pi * math.log(3), rel=1e-13)


def test_ball_energy_errors():
    f = make_Z2(Box.square(3))
    with pytest.raises(LabError):
        ball_energy(f, (0, 0), 0.6)
    with pytest.raises(LabError):
        ball_energy(f, (0.5, 0), 0.1)
    with pytest.raises(LabError):
        ball_energy(f, (0, 0), 0.1, quad_n=4)
    with pytest.raises(LabError):
        ball_energy(zero_field(), (0, 0), 0.1)


def test_ball_energy_lower_bound():
    f = make_Z2(Box.square(3))
    for d in (0.05, 0.1, 0.2, 0.4):
        assert ball_energy(f, (1, -1), d) >= math.pi * math.log(d) - math.pi ** 2 * d * d


def test_zero_field_energy():
    assert window_energy(zero_field(), CutoffProfile(5.0), 0.25) == 0.0


def monopole_window_closed_form(R, c2):
    # pi [log(R-1) + R log(R/(R-1)) - 1] + 1/2 |c|^2 int chi
    area = math.pi * (R - 1) ** 2 + 2 * math.pi * (R / 2 - 1 / 3)
    return math.pi * (math.log(R - 1) + R * math.log(R / (R - 1)) - 1) + 0.5 * c2 * area


@pytest.mark.parametrize("R", [3.0, 6.5])
def test_window_energy_monopole_closed_form(R):
    f = monopole_field((0, 0), const=(0.3, -0.4))
    got = window_energy(f, CutoffProfile(R), 0.25, 0.25 / 16)
    assert got == pytest.approx(monopole_window_closed_form(R, 0.25), rel=2e-5)


def test_window_energy_delta_independent():
    f = make_V1(Box.square(12))
    a = window_energy(f, CutoffProfile(6.0), 0.25)
    b = window_energy(f, CutoffProfile(6.0), 0.15)
    assert a == pytest.approx(b, rel=1e-4)


def test_window_energy_mesh_convergence():
    f = make_V1(Box.square(12))
    c = CutoffProfile(8.0)
    W = [window_energy(f, c, 0.25, 0.25 / k) for k in (8, 16, 32)]
    assert abs(W[2] - W[1]) < 4 * abs(W[1] - W[0])


def test_window_energy_errors():
    f = make_V1(Box.square(12))
    with pytest.raises(LabError):
        window_energy(f, CutoffProfile(6.0), 0.25, 0.25 / 4)
    with pytest.raises(LabError):
        window_energy(f, CutoffProfile(6.0), 0.6)
    with pytest.raises(LabError):
        window_energy(f, CutoffProfile(20.0), 0.25)


def test_window_energy_thread_invariance(monkeypatch):
    f = make_V1(Box.square(12))
    c = CutoffProfile(5.0)
    monkeypatch.setenv("LAB_THREADS", "1")
    a = window_energy(f, c, 0.25, chunk_cells=5000)
    monkeypatch.setenv("LAB_THREADS", "4")
    b = window_energy(f, c, 0.25, chunk_cells=5000)
    assert a == b


def test_window_energy_above_flux_bound():
    f = make_V1(Box.square(25))
    P = gen_named("Z", Box.square(25))
    for R in (10.0, 20.0):
        W = window_energy(f, CutoffProfile(R), 0.25)
        assert W + 5 * R >= flux_lower_bound(P, 0.0, R - 1, 0.25)


def test_default_delta():
    assert default_delta(np.zeros((1, 2))) == 0.25
    assert default_delta(np.array([[0, 0], [0.4, 0]])) == pytest.approx(0.1)


def test_classify_rules():
    r = [10, 20, 40, 80]
    assert classify(r, [4.1, 4.5, 4.72, 4.83])[0] == "finite"
    assert classify(r, [6.0, 8.5, 11.5, 15.0])[0] == "infinite"
    assert classify(r, [6.0, 5.0, 7.0, 4.0])[0] == "inconclusive"
    assert classify(r[:2], [1.0, 1.0])[0] == "inconclusive"
    # thresholds are configurable
    assert classify(r, [4.1, 4.5, 4.72, 4.83], {"drift": 0.01})[0] == "inconclusive"
    assert classify(r, [4.1, 4.5, 4.72, 4.83], {"drift": 0.01, "exponent": 0.05})[0] == "infinite"


def test_energy_curve_fields_and_export():
    f = make_V1(Box.square(12))
    cur = energy_curve(f, [4.0, 6.0, 8.0])
    assert cur.normalized == [w / (math.pi * r * r) for w, r in zip(cur.W_values, cur.radii)]
    assert cur.delta == 0.25 and cur.h == 0.25 / 8
    assert cur.to_csv().splitlines()[0] == "R,W,W_normalized"
    d = json.loads(cur.to_json())
    assert d["schema"] == "v1" and d["thresholds"]["drift"] == 0.05
    with pytest.raises(LabError):
        energy_curve(f, [6.0, 4.0])
    assert energy_curve(f, [4.0, 6.0]).classification == "inconclusive"


def test_flux_curve_ring_infinite():
    P = gen_ring_counterexample(0.0, 0.3, 24)
    cur = flux_energy_curve(P, 0.0, [18.0, 34.0, 66.0, 82.0])
    assert cur.classification == "infinite"
