"""Acceptance criteria, each at its stated tolerance.

Every test records a PASS/FAIL line; the aggregated lines are printed in
the terminal summary under "acceptance criteria".
"""

import math
import time

import numpy as np
import pytest

from critwave import runner
from critwave.cli import bundled_config
from critwave.config import RunConfig, loads
from critwave.conformal import evolve_conformal, pullback, time_shift, transform_record
from critwave.evolve import InitialDataSpec, IntegratorConfig, evolve_record, hankel_propagate, initial_state
from critwave.grid import make_grid
from critwave.nonlinearity import Variant

pytestmark = pytest.mark.acceptance


def _checks(summary, suite):
    return next(s for s in summary.suites if s.name == suite).checks


def _check(summary, suite, prefix):
    return next(c for c in _checks(summary, suite) if c.name.startswith(prefix))


@pytest.fixture(scope="module")
def standard():
    cfg = loads(bundled_config("standard"))
    return runner.run(cfg, "verify", ["ledger", "annulus", "hyperboloid", "conformal"])


# -- 1 -----------------------------------------------------------------------

def test_criterion_1_linear_oracle(criteria):
    t0 = time.perf_counter()
    bump = InitialDataSpec("bump", 1.0, 1.0)
    errs = []
    for dr in (1 / 64, 1 / 128, 1 / 256):
        g = make_grid(8.0, dr)
        s0 = initial_state(bump, g)
        rec = evolve_record(bump, Variant.LINEAR, IntegratorConfig.for_grid(g), 1.0, g,
                            keep_record=False)
        h = hankel_propagate(s0.u, s0.w, 1.0).u.samples
        w = g.weights()
        errs.append(math.sqrt(np.sum(w * (rec.u[-1] - h) ** 2) / np.sum(w * h * h)))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    elapsed = time.perf_counter() - t0
    ok = errs[-1] <= 1e-3 and orders.min() >= 1.8 and elapsed <= 60
    criteria.record(1, ok, f"rel L2 error {errs[-1]:.3g} <= 1e-3, orders "
                           f"{', '.join(f'{o:.2f}' for o in orders)} >= 1.8, {elapsed:.1f} s")
    assert ok


# -- 2 -----------------------------------------------------------------------

def test_criterion_2_energy_and_support(criteria):
    cfg = RunConfig(data_amplitude=1.66, grid_R_max=22.0, grid_dr=1 / 256, t_final=20.0,
                    verify_energy_tol=2e-5)
    s = runner.run(cfg, "verify", ["energy", "support"])
    E0 = s.initial_energy.total
    drift = _check(s, "energy", "relative energy drift")
    growth = _check(s, "support", "support growth per step")
    ok = (2 * math.pi < E0 and abs(E0 - 10) <= 0.5 and drift.passed and growth.passed
          and s.runtime_s <= 120)
    criteria.record(2, ok, f"E0 = {E0:.4g}, drift {drift.value:.3g} <= 2e-5, support growth "
                           f"{growth.value:.4g} <= dt + dr = {growth.tolerance:.4g}, "
                           f"{s.runtime_s:.1f} s")
    assert ok


# -- 3 -----------------------------------------------------------------------

def test_criterion_3_nonlinearity_inequalities(criteria):
    res = runner.nonlinearity_suite(n=10_000)
    bad = {c.name: c.value for c in res.checks if c.value != 0}
    ok = res.passed and not bad
    criteria.record(3, ok, f"{len(res.checks)} randomized suites of 10^4 samples, "
                           f"violations {bad or 0}")
    assert ok


# -- 4 -----------------------------------------------------------------------

def _cross_error(dr):
    shift = time_shift(1.0)
    T_top = 1 / shift
    g = make_grid(42.0, dr)
    rec = evolve_record(InitialDataSpec("bump", 1.66, 1.0), Variant.MASSLESS,
                        IntegratorConfig.for_grid(g, record_cadence=2 * dr), 40.0, g)
    fields = transform_record(rec, [T_top, T_top / 2, T_top / 4], shift=shift, dR=dr / 9,
                              max_fill=1.0)
    del rec
    evolved = evolve_conformal(fields[0], T_top / 4 - 1e-12)
    worst = 0.0
    for f in fields[1:]:
        ev = min(evolved, key=lambda e: abs(e.T - f.T))
        assert abs(ev.T - f.T) < 1e-9
        t, _, _ = pullback(f.T, f.R, shift)
        sel = (np.arange(len(f.U)) < f.n_covered) & (t + shift <= 3 / f.T)
        worst = max(worst, float(np.max(np.abs(ev.U[sel] - f.U[sel]))))
    return worst


def test_criterion_4_conformal_identities(criteria):
    kel, dg = runner.kelvin_checks(n=10_000)
    e64, e128 = _cross_error(1 / 64), _cross_error(1 / 128)
    gain = e64 / e128
    ok = kel.passed and dg.passed and gain >= 3
    criteria.record(4, ok, f"Kelvin {kel.value:.2g} and dG {dg.value:.2g} <= 1e-12, cross agreement "
                           f"{e64:.3g} -> {e128:.3g} (x{gain:.2f} >= 3)")
    assert ok


# -- 5 -----------------------------------------------------------------------

def test_criterion_5_cone_ledger(standard, criteria):
    checks = _checks(standard, "conformal")
    bal = [c for c in checks if c.name.startswith(("E(T0) + Flux", "int PT - E_a"))]
    worst = max(c.value / (c.tolerance / 1e-3) for c in bal)
    ladder = _check(standard, "conformal", "E(T0) relative increase")
    flux = _check(standard, "conformal", "Flux(M_{T/2}^T)")
    ok = len(bal) >= 6 and all(c.passed for c in bal) and ladder.passed and flux.passed
    criteria.record(5, ok, f"{len(bal)} balance inequalities, worst excess {worst:.2g} E_a "
                           f"<= 1e-3 E_a; E(T0) worst rise {ladder.value:.2g}; "
                           f"flux halves worst rise {flux.value:.2g}")
    assert ok


@pytest.mark.xfail(strict=True, reason="e^{4U^2} >= 1 on the cone, so the ratio tends to the "
                                       "volume ratio 8 as T -> 0")
def test_criterion_5_exp_cone_ratio(standard, criteria):
    ratio = standard.cone["exp_ratios"][-1]
    ok = 1.5 <= ratio <= 2.5
    criteria.record(5, ok, f"int_K^T e^{{4U^2}} / int_K^{{T/2}} e^{{4U^2}} = {ratio:.4g} "
                           f"in [1.5, 2.5]")
    assert ok


# -- 6 -----------------------------------------------------------------------

def test_criterion_6_decay_exponents(standard, criteria):
    hyp = _check(standard, "hyperboloid", "dyadic L2 window slope")
    led = _check(standard, "ledger", "dyadic slope")
    ann = _check(standard, "annulus", "worst ratio")
    ok = hyp.value <= -1.5 and led.value <= -0.4 and ann.value <= 1.0
    criteria.record(6, ok, f"hyperboloid slope {hyp.value:.3g} <= -1.5, ledger slope "
                           f"{led.value:.3g} <= -0.4, annulus ratio {ann.value:.4g} <= 1")
    assert ok


# -- 7 -----------------------------------------------------------------------

def test_criterion_7_scattering(criteria):
    cfg = loads(bundled_config("scattering"))
    assert (cfg.t_final, cfg.grid_R_max, cfg.grid_dr, cfg.scatter_T_star) == (100.0, 110.0, 1 / 256,
                                                                               (40.0, 80.0))
    s = runner.run(cfg, "scatter", ["scatter"])
    E0 = s.initial_energy.total
    checks = _checks(s, "scatter")
    mono = [c for c in checks if c.name.startswith("non-increasing")]
    tail = [c for c in checks if c.name.startswith("value - tail")]
    dist = _check(s, "scatter", "profile distance")
    ok = (abs(E0 - 10) <= 0.5 and len(mono) == 2 and len(tail) == 2
          and all(c.passed for c in checks) and dist.value <= 1e-3 * math.sqrt(E0)
          and s.runtime_s <= 600)
    criteria.record(7, ok, f"E0 = {E0:.4g}, monotone after transient on both curves, "
                           f"excess over tail {max(c.value for c in tail):.3g} <= "
                           f"{tail[0].tolerance:.3g}, profile distance {dist.value:.3g} <= "
                           f"{1e-3 * math.sqrt(E0):.3g}, {s.runtime_s:.0f} s")
    assert ok


# -- 8 -----------------------------------------------------------------------

def test_criterion_8_small_data(criteria):
    base = loads(bundled_config("small_data"))
    ratios, ok = [], True
    for eps in (1e-2, 1e-3):
        s = runner.run(base.with_values(data_amplitude=eps), "verify", ["small_data", "ledger"])
        sd = {c.name: c for c in _checks(s, "small_data")}
        ok &= all(c.passed for c in sd.values()) and math.isfinite(s.ledger_total)
        ratios.append(sd["f_infinity / epsilon"].value)
    spread = max(ratios) / min(ratios)
    ok &= spread <= 2.0
    criteria.record(8, ok, f"f_inf/eps = {', '.join(f'{r:.4g}' for r in ratios)} "
                           f"(spread x{spread:.3g} <= 2), ledger finite, chain holds")
    assert ok


# -- 9 -----------------------------------------------------------------------

def test_criterion_9_sign_obstruction(criteria):
    def probe(variant):
        cfg = RunConfig(variant=variant, data_amplitude=2.2, grid_R_max=24.0, grid_dr=1 / 128,
                        t_final=20.0)
        return {c.name: c for c in _checks(runner.run(cfg, "verify", ["sign"]), "sign")}

    massive = probe("massive_no_cubic")["remainder changes sign on some slice"]
    massless = probe("massless")["min T P over slices"]
    ok = massive.passed and massive.value >= 1 and massless.passed
    criteria.record(9, ok, f"MassiveNoCubic changes sign on {massive.value:.0f} slice(s); "
                           f"Massless min T P = {massless.value:.3g} >= 0")
    assert ok
