import math

import numpy as np
import pytest

from critwave.diagnostics import NLedger, energy, grad_sq_integral, pair_norm
from critwave.evolve import InitialDataSpec, IntegratorConfig, evolve_record, initial_state
from critwave.grid import GridError, RadialGrid, make_grid
from critwave.nonlinearity import Variant
from critwave.scatter import (ScatterError, decay_curve, extract_profile, profile_distance,
                              report_window, resize, restrict_pairs, scheme_error_estimate)

BUMP = InitialDataSpec("bump", 1.0, 1.0, velocity_amplitude=0.5)


def _run(data, variant, t_final, dr=1 / 64, cadence=0.5, R=None):
    g = make_grid(R or data.support_radius + t_final + 1, dr)
    L = NLedger(variant)
    rec = evolve_record(data, variant, IntegratorConfig.for_grid(g, record_cadence=cadence),
                        t_final, g, observers=[L])
    return rec, L


def test_zero_run():
    rec, L = _run(InitialDataSpec("bump", 0.0), Variant.MASSLESS, 6.0)
    p = extract_profile(rec, 4.0)
    assert not p.v0.samples.any() and not p.v1.samples.any()
    c = decay_curve(rec, p, L)
    assert not c.values.any() and not c.tail.any()


def test_linear_run_recovers_data():
    rec, L = _run(BUMP, Variant.LINEAR, 8.0)
    p = extract_profile(rec, 8.0, Variant.LINEAR)
    s0 = initial_state(BUMP, p.grid)
    assert np.max(np.abs(p.v0.samples - s0.u.samples)) <= 1e-8
    assert np.max(np.abs(p.v1.samples - s0.w.samples)) <= 1e-8
    # backward then forward is the identity to rounding
    assert pair_norm(p.state(), s0) <= 1e-10 * pair_norm(s0, s0.__class__.zero(p.grid))
    c = decay_curve(rec, p, L)
    assert np.all(c.values <= 1e-8)


def test_window_and_helpers():
    assert report_window(100.0, 80.0) == (50.0, 80.0)
    assert report_window(100.0, 40.0) == (20.0, 40.0)
    assert np.array_equal(restrict_pairs(np.array([1.0, 3.0, 5.0, 7.0, 9.0])), [2.0, 6.0])
    g, big = RadialGrid(0.1, 8), RadialGrid(0.1, 12)
    a = np.arange(8.0)
    assert np.array_equal(resize(a, big, g)[:8], a) and not resize(a, big, g)[8:].any()
    with pytest.raises(GridError):
        resize(np.ones(12), g, big)
    with pytest.raises(GridError):
        resize(a, RadialGrid(0.2, 8), g)


@pytest.fixture(scope="module")
def nonlinear():
    return _run(InitialDataSpec("bump", 1.66, 1.0), Variant.MASSLESS, 24.0, cadence=0.25)


def test_errors(nonlinear):
    rec, L = nonlinear
    with pytest.raises(ScatterError):
        extract_profile(rec, 30.0)
    with pytest.raises(ScatterError):
        extract_profile(rec, 3.1)          # no snapshot within a step
    with pytest.raises(ScatterError):
        extract_profile(rec, 10.0, Variant.MASSIVE_NO_CUBIC)
    p = extract_profile(rec, 10.0)
    other, _ = _run(InitialDataSpec("bump", 1.66, 1.0), Variant.MASSLESS, 4.0, dr=1 / 32)
    with pytest.raises(GridError):
        decay_curve(other, p, L)


def test_curve_invariants(nonlinear):
    rec, L = nonlinear
    E0 = energy(rec.state(0)).total
    p = extract_profile(rec, 20.0)
    c = decay_curve(rec, p, L)
    assert np.all(c.values >= 0)
    assert np.all(np.diff(c.tail) <= 0)
    assert c.value_at(20.0) <= 1e-10 * math.sqrt(E0)
    assert c.monotone_after(5.0)
    lo, hi = c.window
    sel = (c.times >= lo) & (c.times <= hi)
    assert np.all(c.values[sel] <= c.tail[sel] + 1e-2 * math.sqrt(E0))
    assert c.excess <= 1e-2 * math.sqrt(E0)


def test_profile_reach(nonlinear):
    rec, _ = nonlinear
    Ts = 10.0
    p = extract_profile(rec, Ts)
    r, g = p.grid.r, p.grid

    def outside(rho):
        m = r > rho
        u = np.where(m, p.v0.samples, 0.0)
        w = np.where(m, p.v1.samples, 0.0)
        return math.sqrt(grad_sq_integral(u, g) + float(np.dot(w * w, g.weights())))

    # the free wave through u(T*) reaches r0 + 2 T* at t = 0
    assert outside(1.0 + Ts + 2 * g.dr) > 1e-6
    assert outside(1.0 + 2 * Ts + 0.5) <= 1e-15


@pytest.mark.xfail(strict=True, reason="the Duhamel term carries N(s), supported in B_{r0+s}, "
                   "back by s: the profile reaches r0 + 2 T*, not r0 + T*")
def test_profile_support_literal(nonlinear):
    rec, _ = nonlinear
    p = extract_profile(rec, 10.0)
    idx = np.flatnonzero(np.abs(p.v0.samples) > 1e-12)
    assert p.grid.r[idx[-1]] <= 1.0 + 10.0 + 2 * p.grid.dr


def test_profiles_converge(nonlinear):
    rec, _ = nonlinear
    E0 = energy(rec.state(0)).total
    d1 = profile_distance(extract_profile(rec, 8.0), extract_profile(rec, 12.0))
    d2 = profile_distance(extract_profile(rec, 12.0), extract_profile(rec, 24.0))
    assert d2 < d1 and d2 <= 1e-2 * math.sqrt(E0)


def test_scheme_error_estimate():
    data = InitialDataSpec("bump", 1.66, 1.0)
    g = make_grid(8.0, 1 / 32)
    e = scheme_error_estimate(data, Variant.MASSLESS, g, [1.0, 2.0])
    coarse = evolve_record(data, Variant.MASSLESS, IntegratorConfig.for_grid(g, record_cadence=1.0), 2.0, g)
    assert e == scheme_error_estimate(data, Variant.MASSLESS, g, [1.0, 2.0], coarse=coarse)
    # second order once resolved: 0.142 -> 0.0436 from dr = 1/64 to 1/128
    e64 = scheme_error_estimate(data, Variant.MASSLESS, make_grid(8.0, 1 / 64), [1.0, 2.0])
    e128 = scheme_error_estimate(data, Variant.MASSLESS, make_grid(8.0, 1 / 128), [1.0, 2.0])
    assert e > e64 > 3 * e128 > 0
    z = scheme_error_estimate(InitialDataSpec("bump", 0.0), Variant.MASSLESS, g, [1.0])
    assert z == 0.0


def test_decays_well_above_threshold():
    # E0 = 10 * 2 pi: the headline claim puts no bound on the energy
    data = InitialDataSpec("bump", 2.443, 1.0)
    rec, L = _run(data, Variant.MASSLESS, 40.0, dr=1 / 128, R=44.0)
    E0 = energy(rec.state(0)).total
    assert E0 == pytest.approx(20 * math.pi, rel=1e-3)
    c = decay_curve(rec, extract_profile(rec, 40.0), L)
    assert c.monotone_after(10.0)
    assert c.value_at(30.0) <= 0.1 * c.value_at(5.0)
    assert c.excess <= 1e-2 * math.sqrt(E0)
