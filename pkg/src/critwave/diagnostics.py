"""Physical-frame functionals: energies, norms, monitors and ledgers.

The monitors are streaming accumulators fed one WaveState at a time, so
a long run never has to keep its full history in memory.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import GridError, RadialField, RadialGrid, SpacetimeRecord, WaveState
from .nonlinearity import (DEFAULT_POLICY, SaturationError, SeriesPolicy, Variant,
                           eval_N, eval_potential_density)


@dataclass(frozen=True)
class EnergyBreakdown:
    kinetic: float
    gradient: float
    potential: float
    total: float

    @classmethod
    def of(cls, kinetic, gradient, potential):
        return cls(kinetic, gradient, potential, kinetic + gradient + potential)


def _check_grid(a: RadialGrid, b: RadialGrid):
    if a != b:
        raise GridError(f"grid mismatch: {a} vs {b}")


def grad_sq_integral(u: np.ndarray, grid: RadialGrid) -> float:
    """int |u_r|^2 dx with one-sided differences on the Laplacian's faces."""
    d = np.diff(np.append(u, 0.0)) / grid.dr
    return float(np.dot(d * d, grid.r_faces)) * 2.0 * np.pi * grid.dr


def _integral(vals, grid):
    return float(np.dot(vals, grid.weights()))


def energy(state: WaveState, variant=Variant.MASSLESS, policy: SeriesPolicy = DEFAULT_POLICY,
           mass_term: bool = False) -> EnergyBreakdown:
    g = state.grid
    u, w = state.u.samples, state.w.samples
    kin = 0.5 * _integral(w * w, g)
    grad = 0.5 * grad_sq_integral(u, g)
    dens = np.asarray(eval_potential_density(u, variant, policy))
    if mass_term:
        dens = dens + u * u
    return EnergyBreakdown.of(kin, grad, 0.5 * _integral(dens, g))


def pair_norm(a: WaveState, b: WaveState) -> float:
    """Hdot^1 x L^2 distance of two states."""
    _check_grid(a.grid, b.grid)
    du = a.u.samples - b.u.samples
    dw = a.w.samples - b.w.samples
    return math.sqrt(grad_sq_integral(du, a.grid) + _integral(dw * dw, a.grid))


def data_norm(state: WaveState) -> float:
    """H^1 x L^2 norm of (u, w)."""
    u, w, g = state.u.samples, state.w.samples, state.grid
    return math.sqrt(_integral(u * u, g) + grad_sq_integral(u, g) + _integral(w * w, g))


def support_radius(f: RadialField, threshold: float = 1e-12) -> float:
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    idx = np.flatnonzero(np.abs(f.samples) > threshold)
    return 0.0 if len(idx) == 0 else float(f.grid.r[idx[-1]])


def lp_integral(f: RadialField, p: float) -> float:
    return _integral(np.abs(f.samples) ** p, f.grid)


def trudinger_moser(u: RadialField, alpha: float = 4.0 * math.pi) -> float:
    """int (e^{alpha u^2} - 1) dx; expm1 keeps small amplitudes exact."""
    x = alpha * u.samples**2
    if np.any(x > 700.0):
        raise SaturationError("Trudinger-Moser exponent above 700")
    return _integral(np.expm1(x), u.grid)


def n_l2(state: WaveState, variant=Variant.MASSLESS, policy=DEFAULT_POLICY) -> float:
    n = np.asarray(eval_N(state.u.samples, variant, policy))
    return math.sqrt(_integral(n * n, state.grid))


def trapz_window(t, y, a, b) -> float:
    """Integral over [a, b] of the piecewise-linear interpolant of (t, y)."""
    t = np.asarray(t, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    a, b = max(a, t[0]), min(b, t[-1])
    if b <= a:
        return 0.0
    inner = (t > a) & (t < b)
    ts = np.concatenate(([a], t[inner], [b]))
    ys = np.concatenate(([np.interp(a, t, y)], y[inner], [np.interp(b, t, y)]))
    return float(np.trapezoid(ys, ts))


def fit_slope(n, values) -> float:
    """Least-squares slope of log2(values) against n."""
    n = np.asarray(n, dtype=np.float64)
    v = np.asarray(values, dtype=np.float64)
    keep = v > 0
    if keep.sum() < 2:
        return float("nan")
    return float(np.polyfit(n[keep], np.log2(v[keep]), 1)[0])


class StrichartzMonitor:
    """f(T) = ||u||_{L^{40/9}_t L^20_x} + ||u||_{L^5_t L^10_x} on [0, T)."""

    P1, Q1 = 40.0 / 9.0, 20.0
    P2, Q2 = 5.0, 10.0

    def __init__(self):
        self.times: list[float] = []
        self.values: list[float] = []
        self._acc1 = 0.0
        self._acc2 = 0.0
        self._last = None

    def _integrands(self, state):
        g = state.grid
        a = np.abs(state.u.samples)
        i20 = _integral(a**self.Q1, g)
        i10 = _integral(a**self.Q2, g)
        return i20 ** (self.P1 / self.Q1), i10 ** (self.P2 / self.Q2)

    def update(self, state: WaveState) -> "StrichartzMonitor":
        q1, q2 = self._integrands(state)
        if self._last is not None:
            t0, p1, p2 = self._last
            if state.t <= t0:
                raise ValueError("snapshots must arrive in time order")
            h = state.t - t0
            self._acc1 += 0.5 * h * (p1 + q1)
            self._acc2 += 0.5 * h * (p2 + q2)
        self._last = (state.t, q1, q2)
        self.times.append(state.t)
        self.values.append(self.f)
        return self

    __call__ = update

    @property
    def f(self) -> float:
        return self._acc1 ** (1.0 / self.P1) + self._acc2 ** (1.0 / self.P2)

    @property
    def f_infinity(self) -> float:
        return max(self.values, default=0.0)


def strichartz_update(monitor: StrichartzMonitor, state: WaveState) -> StrichartzMonitor:
    return monitor.update(state)


@dataclass
class DyadicWindow:
    n: int
    start: float
    end: float
    value: float
    complete: bool


class NLedger:
    """||N(u(t))||_{L^2} per snapshot with cumulative time integral."""

    def __init__(self, variant=Variant.MASSLESS, policy: SeriesPolicy = DEFAULT_POLICY):
        self.variant = Variant.parse(variant)
        self.policy = policy
        self.times: list[float] = []
        self.norms: list[float] = []
        self.cumulative: list[float] = []

    def update(self, state: WaveState) -> "NLedger":
        v = n_l2(state, self.variant, self.policy)
        if self.times:
            if state.t <= self.times[-1]:
                raise ValueError("snapshots must arrive in time order")
            c = self.cumulative[-1] + 0.5 * (state.t - self.times[-1]) * (v + self.norms[-1])
        else:
            c = 0.0
        self.times.append(state.t)
        self.norms.append(v)
        self.cumulative.append(c)
        return self

    __call__ = update

    @property
    def total(self) -> float:
        return self.cumulative[-1] if self.cumulative else 0.0

    def tail(self, t: float) -> float:
        """int_t^{t_final} ||N|| ds."""
        if not self.times:
            return 0.0
        return self.total - float(np.interp(t, self.times, self.cumulative))

    def windows(self, t0: float = 1.0, offset: float = 0.0) -> list[DyadicWindow]:
        """Sums over I_n = [t0 2^n, t0 2^{n+1}) in shifted time t + offset."""
        if not self.times:
            return []
        ts = np.asarray(self.times) + offset
        out = []
        n = 0
        while t0 * 2**n < ts[-1]:
            a, b = t0 * 2**n, t0 * 2 ** (n + 1)
            out.append(DyadicWindow(n, a, b, trapz_window(ts, self.norms, a, b), b <= ts[-1] + 1e-12))
            n += 1
        return out

    def dyadic_slope(self, t0: float = 1.0, offset: float = 0.0) -> float:
        ws = [w for w in self.windows(t0, offset) if w.complete]
        return fit_slope([w.n for w in ws], [w.value for w in ws])


def n_ledger_update(ledger: NLedger, state: WaveState, variant=None) -> NLedger:
    if variant is not None and Variant.parse(variant) is not ledger.variant:
        raise ValueError("ledger was created for another variant")
    return ledger.update(state)


@dataclass
class AnnulusReport:
    d: float
    times: np.ndarray
    maxima: np.ndarray
    shapes: np.ndarray
    C: float
    ratios: np.ndarray
    worst_ratio: float
    first_line_holds: bool
    first_line_worst: float


class AnnulusMonitor:
    """max |u| on t - d <= r <= t against C E^{1/2} log^{1/2}(t/(t-d)).

    ``shift`` converts run time to the time of the cone picture, t' = t + shift.
    """

    def __init__(self, d: float, t_from: float, shift: float = 0.0,
                 variant=Variant.MASSLESS):
        if d <= 0:
            raise ValueError("d must be positive")
        if t_from <= d:
            raise ValueError(f"empty annulus: t_from = {t_from} <= d = {d}")
        self.d, self.t_from, self.shift = d, t_from, shift
        self.variant = Variant.parse(variant)
        self.times, self.maxima, self.shapes, self.slack = [], [], [], []

    def update(self, state: WaveState) -> "AnnulusMonitor":
        tp = state.t + self.shift
        if tp < self.t_from:
            return self
        g = state.grid
        u = state.u.samples
        r = g.r
        band = (r >= tp - self.d) & (r <= tp)
        if not np.any(band):
            raise ValueError("annulus contains no grid nodes")
        au = np.abs(u)
        m = float(np.max(au[band]))
        E = energy(state, self.variant).total
        shape = math.sqrt(max(E, 0.0)) * math.sqrt(math.log(tp / (tp - self.d)))
        # |u(r)| <= int_r^infty |u_r| dr, summed from the node outward
        jumps = np.abs(np.diff(np.append(u, 0.0)))
        outward = np.cumsum(jumps[::-1])[::-1]
        ratio = au[band] / np.maximum(outward[band], 1e-300)
        self.slack.append(float(np.max(np.where(au[band] > 0, ratio, 0.0))))
        self.times.append(tp)
        self.maxima.append(m)
        self.shapes.append(shape)
        return self

    __call__ = update

    def report(self) -> AnnulusReport:
        t = np.asarray(self.times)
        mx = np.asarray(self.maxima)
        sh = np.asarray(self.shapes)
        if len(t) == 0:
            raise ValueError("no snapshots at or after t_from")
        C = mx[0] / sh[0] if sh[0] > 0 else 0.0
        ratios = np.where(C * sh > 0, mx / np.where(C * sh > 0, C * sh, 1.0), 0.0)
        worst = float(np.max(ratios[1:])) if len(ratios) > 1 else 0.0
        fl = float(max(self.slack, default=0.0))
        return AnnulusReport(self.d, t, mx, sh, float(C), ratios, worst,
                             fl <= 1.0 + 1e-12, fl)


def annulus_bound_check(record: SpacetimeRecord, d: float, t_from: float,
                        shift: float = 0.0, variant=Variant.MASSLESS) -> AnnulusReport:
    if record.t_final + shift < t_from:
        raise ValueError("record ends before t_from")
    mon = AnnulusMonitor(d, t_from, shift, variant)
    for i in range(len(record)):
        mon.update(record.state(i))
    return mon.report()


@dataclass(frozen=True)
class SmallDataReport:
    epsilon: float
    f_infinity: float
    ratio: float
    n_l1l2_total: float
    tm_sup: float
    chain_rhs: float
    chain_holds: bool


class TrudingerMoserMonitor:
    def __init__(self):
        self.sup = 0.0

    def update(self, state: WaveState):
        self.sup = max(self.sup, trudinger_moser(state.u))
        return self

    __call__ = update


def small_data_report(epsilon: float, monitor: StrichartzMonitor, ledger: NLedger,
                      tm_sup: float) -> SmallDataReport:
    """Chain: ||N||_{L^1 L^2} <= C_TM f^{40/9} + e f^5.

    The Hoelder step needs sup_t ||e^{u^2} - 1||_{L^{18/5}}, which is at most
    (sup_t int (e^{4 pi u^2} - 1))^{5/18}; that measured value stands in for C_TM.
    """
    f = monitor.f_infinity
    rhs = tm_sup ** (5.0 / 18.0) * f ** (40.0 / 9.0) + math.e * f**5
    total = ledger.total
    return SmallDataReport(epsilon, f, f / epsilon if epsilon > 0 else float("nan"),
                           total, tm_sup, rhs, total <= rhs)
