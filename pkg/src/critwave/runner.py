"""Run orchestration: one physical evolution, the requested suites, the files.

Every check carries its measured value and tolerance.  Checks marked
``required=False`` are reported but do not decide the exit status.
"""

from __future__ import annotations

import itertools
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import _backend, config as cfgmod, io
from .conformal import (ConeLedger, CoverageError, HyperboloidSpec, HyperboloidWindows,
                        SliceCollector, cone_balance, cone_integrals, dg_conformality,
                        evolve_conformal, exp_cone_profile, kelvin_map, mantle_values, pullback,
                        remainder_sign_probe, time_shift)
from .config import SUITES, RunConfig
from .diagnostics import (AnnulusMonitor, EnergyBreakdown, NLedger, StrichartzMonitor,
                          TrudingerMoserMonitor, energy, n_l2, small_data_report)
from .evolve import InitialDataSpec, IntegratorConfig, evolve_record
from .grid import make_grid
from .nonlinearity import (Variant, check_pointwise_bound, eval_f, eval_N, eval_P)
from .scatter import decay_curve, extract_profile, profile_distance

COMMANDS = ("run", "verify", "conformal-check", "scatter", "sweep")
SEED = 20240611
N_SAMPLES = 10_000


@dataclass
class Check:
    name: str
    value: float
    tolerance: object
    relation: str
    passed: bool
    required: bool = True
    note: str = ""


def le(name, value, tol, required=True, note=""):
    return Check(name, float(value), tol, "<=", bool(value <= tol), required, note)


def ge(name, value, tol, required=True, note=""):
    return Check(name, float(value), tol, ">=", bool(value >= tol), required, note)


def within(name, value, lo, hi, required=True, note=""):
    return Check(name, float(value), [lo, hi], "in", bool(lo <= value <= hi), required, note)


def holds(name, ok, value=float("nan"), required=True, note=""):
    return Check(name, float(value), None, "true", bool(ok), required, note)


@dataclass
class SuiteResult:
    name: str
    checks: list

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks if c.required)


@dataclass
class RunSummary:
    command: str
    config: dict
    backend: str
    initial_energy: EnergyBreakdown
    final_energy: EnergyBreakdown
    energy_drift: float
    ledger_total: float
    ledger_slope: float
    balance: list = field(default_factory=list)
    cone: dict = field(default_factory=dict)
    decay: list = field(default_factory=list)
    suites: list = field(default_factory=list)
    runtime_s: float = 0.0

    @property
    def passed(self) -> bool:
        return all(s.passed for s in self.suites)


# -- streaming observers ---------------------------------------------------

class _Series:
    """Timeseries rows at the record cadence."""

    def __init__(self, variant, strichartz, thr):
        self.variant, self.strichartz, self.thr = variant, strichartz, thr
        self.rows = []
        self.energies = []

    def __call__(self, state):
        e = energy(state, self.variant)
        a = np.abs(state.u.samples) + np.abs(state.w.samples)
        idx = np.flatnonzero(a > self.thr)
        rad = 0.0 if len(idx) == 0 else float(state.grid.r[idx[-1]])
        self.energies.append(e)
        self.rows.append([state.t, e.kinetic, e.gradient, e.potential, e.total,
                          n_l2(state, self.variant), self.strichartz.f, rad])


class _FrontTracker:
    """Outer face of the outermost nonzero cell of u after every step.

    The velocity array runs one cell ahead of u inside a Verlet step, so
    only u is tracked.
    """

    def __init__(self):
        self.faces = []

    def __call__(self, state):
        nz = np.flatnonzero(state.u.samples != 0.0)
        self.faces.append(0.0 if len(nz) == 0 else (nz[-1] + 1) * state.grid.dr)


# -- suites that need no run -----------------------------------------------

def nonlinearity_suite(n=N_SAMPLES, seed=SEED) -> SuiteResult:
    rng = np.random.default_rng(seed)
    checks = []
    u = rng.uniform(-6, 6, n)
    bad = sum(not check_pointwise_bound(x).holds for x in u)
    checks.append(le("pointwise bound violations", bad, 0))
    N = np.abs(np.asarray(eval_N(u)))
    order = np.abs(u) ** 3 * np.expm1(u * u)
    checks.append(le("|N| <= |u|^3 (e^{u^2} - 1) violations",
                     int(np.sum(N > order * (1 + 1e-13))), 0))
    U = rng.uniform(-8, 8, n)
    Om = rng.uniform(0, 1, n)
    checks.append(le("P < 0 count", int(np.sum(np.asarray(eval_P(U, Om)) < 0)), 0))
    U = rng.uniform(-3, 3, n)
    V = rng.uniform(-3, 3, n)
    Om = rng.uniform(0, 1, n)
    f = np.asarray(eval_f(U, V, Om))
    checks.append(le("f(-U,-V) != f(U,V) count", int(np.sum(np.asarray(eval_f(-U, -V, Om)) != f)), 0))
    opp = U * V <= 0
    checks.append(le("f > 0 with U V <= 0 count", int(np.sum(f[opp] > 0)), 0))
    alpha = rng.uniform(0, 0.25, n)
    V = alpha * U
    tail = np.asarray(eval_f(U, V, Om)) - 0.25 * (U**6 - V**6)
    scale = 1e-13 * np.abs(U) ** 6 * np.exp(Om * U * U)
    checks.append(le("tail series > 0 with V = alpha U, alpha < 1/4 count",
                     int(np.sum(tail > scale)), 0))
    return SuiteResult("nonlinearity", checks)


def kelvin_checks(n=N_SAMPLES, seed=SEED):
    rng = np.random.default_rng(seed + 1)
    t = rng.uniform(0.05, 20, n)
    r = t * rng.uniform(0, 0.98, n)
    worst = 0.0
    for a, b in zip(t, r):
        p = kelvin_map(a, b)
        q = kelvin_map(p.T, p.R)
        worst = max(worst, abs(q.T - a) / a, abs(q.R - b) / a)
    x = rng.normal(size=(n, 3))
    y = rng.normal(size=(n, 3))
    conf = 0.0
    for xi, yi in zip(x, y):
        q = xi[0] ** 2 - xi[1] ** 2 - xi[2] ** 2
        if abs(q) < 1e-3 * float(np.dot(xi, xi)):
            continue
        lhs, rhs = dg_conformality(xi, yi)
        # rounding scale of <v, v> for v = y/q - 2 x <x,y>/q^2
        nx, ny = np.linalg.norm(xi), np.linalg.norm(yi)
        scale = (ny / abs(q) + 2 * nx * nx * ny / q**2) ** 2
        conf = max(conf, abs(lhs - rhs) / scale)
    return [le("Kelvin involution relative error", worst, 1e-12),
            le("dG conformality relative error", conf, 1e-12)]


# -- the run ---------------------------------------------------------------

@dataclass
class _Context:
    cfg: RunConfig
    variant: Variant
    grid: object
    icfg: IntegratorConfig
    data: InitialDataSpec
    shift: float
    rec: object = None
    series: object = None
    strichartz: object = None
    ledger: object = None
    tm: object = None
    annulus: object = None
    hyper: object = None
    front: object = None
    slices: object = None
    T_top: float = 0.0
    cross_T: tuple = ()
    sign_T: tuple = ()


def _needs(command, suites):
    s = set(suites)
    return {
        "conformal": command == "conformal-check" or "conformal" in s,
        "sign": "sign" in s,
        "scatter": command == "scatter" or "scatter" in s,
        "support": "support" in s,
    }


def _physical_run(cfg: RunConfig, command, suites, keep_record) -> _Context:
    variant = Variant.parse(cfg.variant)
    grid = make_grid(cfg.grid_R_max, cfg.grid_dr)
    icfg = IntegratorConfig.for_grid(grid, cfl=cfg.integrator_cfl,
                                     record_cadence=cfg.integrator_record_cadence)
    data = InitialDataSpec(cfg.data_family, cfg.data_amplitude, cfg.data_r0)
    ctx = _Context(cfg, variant, grid, icfg, data, time_shift(data.support_radius))
    need = _needs(command, suites)
    ctx.strichartz = StrichartzMonitor()
    ctx.ledger = NLedger(variant)
    ctx.tm = TrudingerMoserMonitor()
    ctx.series = _Series(variant, ctx.strichartz, icfg.support_threshold)
    obs = [ctx.strichartz, ctx.ledger, ctx.tm, ctx.series]
    d = cfg.conformal_d
    if cfg.t_final + ctx.shift > d:
        ctx.annulus = AnnulusMonitor(d, max(2 * d, ctx.shift), ctx.shift, variant)
        obs.append(ctx.annulus)
    ctx.hyper = HyperboloidWindows(HyperboloidSpec(cfg.conformal_T_cap, d), ctx.shift, variant)
    obs.append(ctx.hyper)
    if need["support"]:
        ctx.front = _FrontTracker()
        obs.append((ctx.front, 1))
    ctx.T_top = 1.0 / ctx.shift
    T_list = []
    if need["conformal"]:
        ctx.cross_T = (ctx.T_top / 2, ctx.T_top / 4)
        T_list += [ctx.T_top, *ctx.cross_T]
    if need["sign"]:
        ctx.sign_T = tuple(ctx.T_top / 2**k for k in range(4))
        T_list += list(ctx.sign_T)
    collector = None
    if T_list:
        T_list = sorted(set(T_list), reverse=True)
        collector = SliceCollector(T_list, shift=ctx.shift, dR=cfg.grid_dr * cfg.conformal_T_cap**2,
                                   t_trust=cfg.conformal_t_trust, max_fill=1.0)
        obs.append((collector, 1))
    ctx.rec = evolve_record(data, variant, icfg, cfg.t_final, grid, observers=obs,
                            keep_record=keep_record, fingerprint=cfgmod.dumps(cfg))
    if collector is not None:
        ctx.slices = {f.T: f for f in collector.fields(skip_uncovered=True)}
    return ctx


def _drift(energies):
    """|E(t_final) - E(0)| / E(0)."""
    E0 = energies[0].total
    dev = abs(energies[-1].total - E0)
    return dev / E0 if E0 > 0 else dev


def _excursion(energies):
    """max_t |E(t) - E(0)| / E(0), the O(dt^2) oscillation of the discrete energy."""
    E0 = energies[0].total
    dev = max(abs(e.total - E0) for e in energies)
    return dev / E0 if E0 > 0 else dev


# -- suites on a run ---------------------------------------------------------

def energy_suite(ctx) -> SuiteResult:
    es = ctx.series.energies
    return SuiteResult("energy", [
        le("relative energy drift", _drift(es), ctx.cfg.verify_energy_tol),
        le("largest relative excursion", _excursion(es), ctx.cfg.verify_energy_tol, required=False),
    ])


def support_suite(ctx) -> SuiteResult:
    faces = np.asarray(ctx.front.faces)
    growth = float(np.max(np.diff(faces), initial=0.0))
    dt, dr = abs(ctx.icfg.dt), ctx.grid.dr
    return SuiteResult("support", [
        le("support growth per step", growth, dt + dr),
        le("cells gained per step", growth / dr, 1.0 + 1e-9, required=False),
    ])


def ledger_suite(ctx) -> SuiteResult:
    L = ctx.ledger
    checks = [holds("ledger total finite", math.isfinite(L.total), L.total)]
    wins = [w for w in L.windows(1.0, ctx.shift) if w.complete]
    if L.total == 0:
        checks.append(holds("dyadic slope", True, note="N vanishes identically"))
    elif len(wins) < 2:
        checks.append(ge("complete dyadic windows", len(wins), 2))
    else:
        checks.append(le("dyadic slope of ||N|| windows", L.dyadic_slope(1.0, ctx.shift), -0.4))
    return SuiteResult("ledger", checks)


def annulus_suite(ctx) -> SuiteResult:
    if ctx.annulus is None or not ctx.annulus.times:
        return SuiteResult("annulus", [holds("run reaches the annulus window", False)])
    rep = ctx.annulus.report()
    return SuiteResult("annulus", [
        le("worst ratio after calibration", rep.worst_ratio, 1.0),
        le("first-line slack", rep.first_line_worst, 1.0 + 1e-12),
    ])


def hyperboloid_suite(ctx) -> SuiteResult:
    try:
        rep = ctx.hyper.report()
    except ValueError as e:
        return SuiteResult("hyperboloid", [holds("windows available", False, note=str(e))])
    if not np.any(rep.values > 0):
        return SuiteResult("hyperboloid", [holds("window slope", True, note="N vanishes in D")])
    return SuiteResult("hyperboloid", [
        ge("complete windows", len(rep.values), 2),
        le("dyadic L2 window slope", rep.slope, -1.5),
    ])


def small_data_suite(ctx) -> SuiteResult:
    eps = ctx.cfg.data_amplitude
    rep = small_data_report(eps, ctx.strichartz, ctx.ledger, ctx.tm.sup)
    return SuiteResult("small_data", [
        holds("f_infinity finite", math.isfinite(rep.f_infinity), rep.f_infinity),
        holds("ledger total finite", math.isfinite(rep.n_l1l2_total), rep.n_l1l2_total),
        le("chain: ||N||_{L1 L2} minus surrogate bound", rep.n_l1l2_total - rep.chain_rhs, 0.0),
        holds("f_infinity / epsilon", True, rep.ratio, required=False),
    ])


def _conformal_pipeline(ctx):
    cfg = ctx.cfg
    if ctx.T_top not in ctx.slices:
        raise CoverageError("top slice is not covered by the run")
    top = ctx.slices[ctx.T_top]
    fill = 1 - top.n_covered / len(top.U)
    if fill > 0.1:
        raise CoverageError(f"top slice: {fill:.1%} of nodes lie beyond t_trust or t_final")
    return evolve_conformal(top, cfg.conformal_T_end)


def conformal_suite(ctx, out=None) -> tuple[SuiteResult, list, dict]:
    checks = kelvin_checks()
    cfg = ctx.cfg
    if ctx.variant is not Variant.MASSLESS:
        checks.append(holds("conformal evolution needs the massless variant", False))
        return SuiteResult("conformal", checks), [], {}
    try:
        fields = _conformal_pipeline(ctx)
    except CoverageError as e:
        checks.append(holds("top slice covered", False, note=str(e)))
        return SuiteResult("conformal", checks), [], {}
    lg = ConeLedger(fields)
    ladder = [ctx.T_top / 2**k for k in range(1, 12) if ctx.T_top / 2**k >= cfg.conformal_T_end - 1e-12]
    balances = [cone_balance(fields, T0, ledger=lg) for T0 in ladder]
    for b in balances:
        checks.append(le(f"E(T0) + Flux/sqrt2 - E_a, T0 = {b.T0:.6g}",
                         (b.E_T0 + b.flux / math.sqrt(2)) - b.E_a, 1e-3 * b.E_a))
        checks.append(le(f"int PT - E_a, T0 = {b.T0:.6g}", b.pt_integral - b.E_a, 1e-3 * b.E_a))
    Es = [lg.energy_at(T) for T in [ctx.T_top] + ladder]
    checks.append(le("E(T0) relative increase along the ladder", _worst_rise(Es), 1e-3))
    # the ladder starts at T2 = T_top / 2: the top piece carries the primary
    # pulse crossing the mantle, where the flux still grows
    halves = [math.sqrt(2) * lg.flux_dY(T / 2, T) for T in ladder[:-1]]
    checks.append(le("Flux(M_{T/2}^T) relative increase as T decreases", _worst_rise(halves), 1e-3))
    cone = {}
    T2 = ctx.T_top / 2
    ci = cone_integrals(fields, T2, ladder_levels=max(1, len(ladder) - 1))
    checks.append(holds("I+ and I- stable under slice halving", ci.stable,
                        max(abs(ci.I_plus - ci.I_plus_half), abs(ci.I_minus - ci.I_minus_half))))
    small = ci.vbar_T <= cfg.conformal_T_cap / 4
    checks.append(holds("4|Vbar| <= log^{1/2}(1/T) for T <= T_cap/4",
                        bool(np.all(ci.vbar_checkpoint[small])),
                        float(np.max(4 * np.abs(ci.vbar[small]), initial=0.0))))
    checks.append(le("int e^{4U^2} / T increase along the ladder",
                     max(np.diff(ci.exp_over_T), default=0.0), 0.0))
    if len(ci.exp_ratios):
        checks.append(within("int_{K^T} e^{4U^2} / int_{K^{T/2}} e^{4U^2}", ci.exp_ratios[-1],
                             1.5, 2.5, required=False,
                             note="the integrand is >= 1, so the ratio tends to 8 (cone volume)"))
    worst = 0.0
    for T in ctx.cross_T:
        if T not in ctx.slices:
            continue
        tf = ctx.slices[T]
        ev = min(fields, key=lambda f: abs(f.T - T))
        if abs(ev.T - T) > 1e-9:
            continue
        t, _, _ = pullback(T, tf.R, ctx.shift)
        sel = np.arange(len(tf.U)) < tf.n_covered
        sel &= (t + ctx.shift) <= 3.0 / T
        n = min(len(ev.U), len(tf.U))
        sel = sel[:n]
        if sel.any():
            worst = max(worst, float(np.max(np.abs(ev.U[:n][sel] - tf.U[:n][sel]))))
    checks.append(le("evolved vs transformed max |dU|", worst, cfg.conformal_agree_tol))
    cone = {"T2": ci.T2, "T_min": ci.T_min, "I_plus": ci.I_plus, "I_minus": ci.I_minus,
            "I_plus_half": ci.I_plus_half, "I_minus_half": ci.I_minus_half,
            "exp_ladder_T": ci.exp_ladder_T, "exp_ladder": ci.exp_ladder,
            "exp_ratios": ci.exp_ratios, "flux_halves": halves,
            "energy_ladder": Es, "cross_agreement": worst}
    if out is not None:
        _write_conformal_csv(out, lg, fields)
    return SuiteResult("conformal", checks), [asdict(b) for b in balances], cone


def _worst_rise(seq):
    """max_k (a_{k+1} - a_k) / a_k, 0 for a non-increasing (or empty) sequence."""
    a = np.asarray(seq, dtype=np.float64)
    if len(a) < 2:
        return 0.0
    return float(np.max((a[1:] - a[:-1]) / np.maximum(np.abs(a[:-1]), 1e-300)))


def _write_conformal_csv(out, lg, fields):
    Ts = lg.T
    fl = math.sqrt(2) * np.array([lg.flux_dY(T, Ts[0]) for T in Ts])
    pt = np.array([lg.pt(T, Ts[0]) for T in Ts])
    mv = [mantle_values(f) for f in lg.fields]
    _, ex = exp_cone_profile(fields)
    rows = [[T, E, F, P, V, dV, X] for T, E, F, P, (V, dV), X in zip(Ts, lg.E, fl, pt, mv, ex)]
    io.write_csv(Path(out) / "conformal.csv", io.CONFORMAL_COLUMNS, rows)


def sign_suite(ctx) -> SuiteResult:
    fields = [ctx.slices[T] for T in ctx.sign_T if T in ctx.slices]
    fields = [f for f in fields if f.n_covered >= 4]
    if len(fields) < 2:
        return SuiteResult("sign", [holds("slices covered", False)])
    probe = remainder_sign_probe(fields, ctx.variant)
    if ctx.variant is Variant.MASSLESS:
        return SuiteResult("sign", [ge("min T P over slices", float(np.min(probe.slice_min)), 0.0)])
    return SuiteResult("sign", [
        holds("remainder changes sign on some slice", probe.changes_sign,
              float(len(probe.sign_change_slices)), required=False),
        holds("remainder negative somewhere", probe.negative_anywhere,
              float(np.min(probe.slice_min)), required=False),
    ])


def scatter_suite(ctx) -> tuple[SuiteResult, list, dict]:
    cfg = ctx.cfg
    if ctx.variant not in (Variant.MASSLESS, Variant.LINEAR):
        return SuiteResult("scatter", [holds("variant supports scattering", False)]), [], {}
    times = ctx.rec.times
    T_stars = cfg.scatter_T_star or tuple(
        float(times[np.argmin(np.abs(times - f * cfg.t_final))]) for f in (0.4, 0.8))
    sqE = math.sqrt(max(ctx.series.energies[0].total, 0.0))
    checks, decay, curves = [], [], {}
    profiles = []
    for Ts in T_stars:
        p = extract_profile(ctx.rec, Ts, ctx.variant)
        c = decay_curve(ctx.rec, p, ctx.ledger)
        profiles.append(p)
        curves[Ts] = c
        t_tr = min(10.0, 0.25 * Ts)
        checks.append(le(f"value at T_star = {Ts:g}", c.value_at(p.T_star), 1e-10 * max(sqE, 1.0)))
        ex = c.excess
        if math.isfinite(ex):
            checks.append(le(f"value - tail on [{c.window[0]:g}, {c.window[1]:g}]", ex, 1e-2 * sqE))
        checks.append(holds(f"non-increasing on [{t_tr:g}, {Ts:g}]", c.monotone_after(t_tr),
                            float(np.max(np.diff(c.values[(c.times >= t_tr) & (c.times <= Ts)]),
                                         initial=0.0))))
        decay.append({"T_star": Ts, "max_value": float(np.max(c.values)),
                      "excess": ex, "window": list(c.window)})
    for a, b in zip(profiles, profiles[1:]):
        checks.append(le(f"profile distance T_star {a.T_star:g} vs {b.T_star:g}",
                         profile_distance(a, b), 1e-3 * sqE))
    return SuiteResult("scatter", checks), decay, curves


# -- entry points ------------------------------------------------------------

def default_suites(command, cfg: RunConfig, requested=None):
    if requested:
        suites = list(requested)
    elif cfg.verify_suites:
        suites = list(cfg.verify_suites)
    elif command == "verify":
        suites = list(SUITES)
    else:
        suites = []
    if command == "conformal-check" and "conformal" not in suites:
        suites.append("conformal")
    if command == "scatter" and "scatter" not in suites:
        suites.append("scatter")
    bad = [s for s in suites if s not in SUITES]
    if bad:
        raise cfgmod.ConfigError(f"unknown suites {bad}")
    return suites


def run(cfg: RunConfig, command: str = "run", suites=None, out=None,
        write_record: bool = False) -> RunSummary:
    """Execute one configuration and write its files into ``out``."""
    if command not in COMMANDS or command == "sweep":
        raise ValueError(f"run() handles {COMMANDS[:-1]}, got {command!r}")
    t0 = time.perf_counter()
    suites = default_suites(command, cfg, suites)
    if out is not None:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        cfgmod.dump(cfg, out / "config.cfg")
    need = _needs(command, suites)
    keep = need["scatter"] or write_record
    ctx = _physical_run(cfg, command, suites, keep)
    results, balance, cone, decay, curves = [], [], {}, [], {}
    for s in suites:
        if s == "nonlinearity":
            results.append(nonlinearity_suite())
        elif s == "energy":
            results.append(energy_suite(ctx))
        elif s == "support":
            results.append(support_suite(ctx))
        elif s == "ledger":
            results.append(ledger_suite(ctx))
        elif s == "annulus":
            results.append(annulus_suite(ctx))
        elif s == "hyperboloid":
            results.append(hyperboloid_suite(ctx))
        elif s == "small_data":
            results.append(small_data_suite(ctx))
        elif s == "sign":
            results.append(sign_suite(ctx))
        elif s == "conformal":
            r, balance, cone = conformal_suite(ctx, out)
            results.append(r)
        elif s == "scatter":
            r, decay, curves = scatter_suite(ctx)
            results.append(r)
    es = ctx.series.energies
    L = ctx.ledger
    wins = [w for w in L.windows(1.0, ctx.shift) if w.complete]
    summary = RunSummary(command, _config_dict(cfg), _backend.BACKEND, es[0], es[-1], _drift(es),
                         L.total, L.dyadic_slope(1.0, ctx.shift) if len(wins) >= 2 else float("nan"),
                         balance, cone, decay, results)
    summary.runtime_s = time.perf_counter() - t0
    if out is not None:
        _write_timeseries(out, ctx, curves)
        io.write_json(out / "summary.json", summary_dict(summary))
        if write_record:
            io.write_record(out / "record.bin", ctx.rec)
    return summary


def _config_dict(cfg):
    return {k: v for k, v in (line.split(" = ", 1) for line in cfgmod.dumps(cfg).splitlines())}


def _write_timeseries(out, ctx, curves):
    c = curves[max(curves)] if curves else None
    rows = []
    for r in ctx.series.rows:
        t = r[0]
        if c is not None:
            i = int(np.argmin(np.abs(c.times - t)))
            hit = abs(c.times[i] - t) <= 1e-9
            rows.append(r + [c.values[i] if hit else float("nan"), c.tail[i] if hit else float("nan")])
        else:
            rows.append(r + [float("nan"), float("nan")])
    io.write_csv(Path(out) / "timeseries.csv", io.TIMESERIES_COLUMNS, rows)


def summary_dict(s: RunSummary) -> dict:
    d = asdict(s)
    d["passed"] = s.passed
    for suite, res in zip(d["suites"], s.suites):
        suite["passed"] = res.passed
    return d


# -- sweeps ------------------------------------------------------------------

def parse_sweep(items):
    axes = []
    for item in items:
        if "=" not in item:
            raise cfgmod.ConfigError(f"--sweep expects KEY=v1,v2,..., got {item!r}")
        k, vs = item.split("=", 1)
        vals = [v.strip() for v in vs.split(",") if v.strip()]
        if not vals:
            raise cfgmod.ConfigError(f"--sweep {k}: no values")
        axes.append((k.strip(), vals))
    return axes


def sweep_points(cfg: RunConfig, axes):
    """Cartesian product of the axes as (label, config) pairs."""
    keys = [k for k, _ in axes]
    out = []
    for combo in itertools.product(*(v for _, v in axes)):
        c = cfg
        for k, v in zip(keys, combo):
            c = cfgmod.override(c, k, v)
        label = "__".join(f"{k}={v}" for k, v in zip(keys, combo)) or "base"
        out.append((label, c))
    return out


def _sweep_one(args):
    label, cfg_text, out, suites = args
    cfg = cfgmod.loads(cfg_text)
    s = run(cfg, "verify" if suites else "run", suites or None, out)
    return label, s.passed, s.energy_drift, s.ledger_total


def sweep(cfg: RunConfig, axes, out, suites=None, workers: int = 1):
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    jobs = [(label, cfgmod.dumps(c), str(out / label), suites)
            for label, c in sweep_points(cfg, axes)]
    if workers <= 1:
        results = [_sweep_one(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_sweep_one, jobs))
    io.write_csv(out / "sweep.csv", ("index", "passed", "energy_drift", "ledger_total"),
                 [[i, float(p), d, t] for i, (_, p, d, t) in enumerate(results)])
    io.write_json(out / "sweep.json", [{"label": l, "passed": p, "energy_drift": d,
                                         "ledger_total": t} for l, p, d, t in results])
    return results


def output_root(arg_out, cfg: RunConfig):
    if arg_out:
        return Path(arg_out)
    env = os.environ.get("CRITWAVE_OUT")
    return Path(env) / cfg.output_dir if env else Path(cfg.output_dir)
