"""Scattering profiles and the decay of u - v.

The profile (v0, v1) is the free wave whose evolution passes through the
nonlinear state at T_star.  Running the reversible linear integrator
backward from that state gives it directly; in exact arithmetic this is
the Duhamel formula with the tail integral cut at T_star.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .diagnostics import NLedger, pair_norm
from .evolve import IntegratorConfig, evolve_record, _Stepper
from .grid import GridError, RadialField, RadialGrid, SpacetimeRecord, WaveState
from .nonlinearity import Variant


class ScatterError(ValueError):
    """Bad extraction request (T_star outside the record, wrong variant)."""


@dataclass(frozen=True)
class ScatteringProfile:
    v0: RadialField
    v1: RadialField
    T_star: float

    @property
    def grid(self) -> RadialGrid:
        return self.v0.grid

    def state(self) -> WaveState:
        return WaveState(0.0, self.v0, self.v1)

    def on(self, grid: RadialGrid) -> WaveState:
        """The profile as t = 0 data on another grid with the same dr."""
        return WaveState.from_arrays(grid, 0.0, *(resize(f.samples, grid, self.grid)
                                                   for f in (self.v0, self.v1)))


def resize(a: np.ndarray, grid: RadialGrid, src: RadialGrid) -> np.ndarray:
    """Zero-pad or cut a cell array onto a grid of equal spacing."""
    if not math.isclose(grid.dr, src.dr, rel_tol=1e-14):
        raise GridError(f"spacing mismatch: {grid.dr} vs {src.dr}")
    n = grid.n_cells
    if n >= len(a):
        return np.concatenate((a, np.zeros(n - len(a))))
    if np.any(a[n:] != 0.0):
        raise GridError("cutting would drop nonzero cells")
    return a[:n]


def profile_distance(a: ScatteringProfile, b: ScatteringProfile) -> float:
    g = a.grid if a.grid.n_cells >= b.grid.n_cells else b.grid
    return pair_norm(a.on(g), b.on(g))


def _snapshot(rec: SpacetimeRecord, T_star: float) -> WaveState:
    tol = abs(rec.dt_step) * (1 + 1e-9)
    if not (rec.t_start - tol <= T_star <= rec.t_final + tol):
        raise ScatterError(f"T_star = {T_star} outside the record [{rec.t_start}, {rec.t_final}]")
    i = int(np.argmin(np.abs(rec.times - T_star)))
    if abs(rec.times[i] - T_star) > tol:
        raise ScatterError(f"no snapshot within one step of T_star = {T_star}")
    return rec.state(i)


def _radius(state: WaveState, thr: float) -> float:
    a = np.abs(state.u.samples) + np.abs(state.w.samples)
    idx = np.flatnonzero(a > thr)
    return 0.0 if len(idx) == 0 else float(state.grid.r_faces[idx[-1]])


def extended_grid(rec: SpacetimeRecord, state: WaveState, thr: float = 1e-12) -> RadialGrid:
    """Grid large enough for the free wave through ``state`` on [0, t_final]."""
    reach = _radius(state, thr) + max(state.t, rec.t_final - state.t) + 4 * rec.grid.dr
    n = max(rec.grid.n_cells, int(math.ceil(reach / rec.grid.dr)))
    return RadialGrid(rec.grid.dr, n)


def extract_profile(rec: SpacetimeRecord, T_star: float, variant=Variant.MASSLESS, *,
                    backend=None) -> ScatteringProfile:
    """Free data at t = 0 whose linear evolution meets u at T_star.

    The profile lives on an extended grid: the free wave through u(T_star)
    reaches r0 + 2 T_star at t = 0, well past the record's own R_max.
    """
    variant = Variant.parse(variant)
    if variant not in (Variant.MASSLESS, Variant.LINEAR):
        raise ScatterError(f"profiles are defined for Massless (or Linear) runs, not {variant.name}")
    snap = _snapshot(rec, T_star)
    grid = extended_grid(rec, snap)
    start = WaveState.from_arrays(grid, snap.t, resize(snap.u.samples, grid, rec.grid),
                                  resize(snap.w.samples, grid, rec.grid))
    cfg = IntegratorConfig(-abs(rec.dt_step), abs(rec.dt_step) / grid.dr)
    st = _Stepper(start, Variant.LINEAR, cfg, backend=backend)
    st.advance(int(round(snap.t / abs(rec.dt_step))))
    if st.boundary_hit():
        raise ScatterError("backward propagation reached the extended boundary")
    return ScatteringProfile(RadialField(grid, st.u.copy()), RadialField(grid, st.w.copy()),
                             float(snap.t))


@dataclass(frozen=True)
class DecayCurve:
    times: np.ndarray
    values: np.ndarray
    tail: np.ndarray
    T_star: float
    window: tuple[float, float]
    scheme_error: float

    @property
    def excess(self) -> float:
        """max over the window of value - tail - scheme_error."""
        lo, hi = self.window
        sel = (self.times >= lo - 1e-9) & (self.times <= hi + 1e-9)
        if not sel.any():
            return float("nan")
        return float(np.max(self.values[sel] - self.tail[sel]) - self.scheme_error)

    def monotone_after(self, t0: float, tol: float = 0.0) -> bool:
        """Non-increasing on [t0, T_star] up to ``tol`` per step."""
        sel = (self.times >= t0 - 1e-9) & (self.times <= self.T_star + 1e-9)
        return bool(np.all(np.diff(self.values[sel]) <= tol))

    def value_at(self, t: float) -> float:
        return float(np.interp(t, self.times, self.values))


def report_window(t_final: float, T_star: float) -> tuple[float, float]:
    """[t_final/2, T_star], falling back to [T_star/2, T_star] when that is empty."""
    lo = 0.5 * t_final
    return (lo, T_star) if lo < T_star else (0.5 * T_star, T_star)


def decay_curve(rec: SpacetimeRecord, profile: ScatteringProfile, ledger: NLedger, *,
                scheme_error: float = 0.0, backend=None) -> DecayCurve:
    """||(u - v, u_t - v_t)|| at every snapshot, v the free wave from the profile."""
    if not math.isclose(profile.grid.dr, rec.grid.dr, rel_tol=1e-14):
        raise GridError("profile and record use different dr")
    if profile.grid.n_cells < rec.grid.n_cells:
        raise GridError("profile grid is smaller than the record grid")
    if rec.t_start != 0.0:
        raise ScatterError("decay_curve needs a record starting at t = 0")
    grid = profile.grid
    dt = abs(rec.dt_step)
    cfg = IntegratorConfig(dt, dt / grid.dr)
    st = _Stepper(profile.state(), Variant.LINEAR, cfg, backend=backend)
    vals = np.empty(len(rec))
    for i, t in enumerate(rec.times):
        st.advance(int(round(t / dt)) - st.nstep)
        u = rec.state(i)
        padded = WaveState.from_arrays(grid, t, resize(u.u.samples, grid, rec.grid),
                                       resize(u.w.samples, grid, rec.grid))
        vals[i] = pair_norm(padded, st.state())
    tail = np.array([ledger.tail(t) for t in rec.times])
    return DecayCurve(np.array(rec.times), vals, tail, profile.T_star,
                      report_window(rec.t_final, profile.T_star), scheme_error)


def restrict_pairs(a: np.ndarray) -> np.ndarray:
    """Average fine cells (2j, 2j+1) onto coarse cell j."""
    n = len(a) // 2
    return 0.5 * (a[0:2 * n:2] + a[1:2 * n:2])


def scheme_error_estimate(data, variant, grid: RadialGrid, times, *, coarse=None,
                          cfl: float = 0.5, backend=None) -> float:
    """max over ``times`` of the pair-norm gap between runs at dr and dr/2.

    The fine run is restricted onto the coarse cells by pair averaging.
    ``coarse`` may be the already computed dr run (a SpacetimeRecord whose
    snapshots include ``times``).
    """
    times = np.asarray(sorted(times), dtype=np.float64)
    t_end = float(times[-1])
    fine = RadialGrid(grid.dr / 2, 2 * grid.n_cells)
    runs = []
    for g in (grid, fine):
        if g is grid and coarse is not None:
            runs.append({t: (coarse.u[i], coarse.w[i]) for t in times
                         for i in [coarse.index_near(t, tol=abs(coarse.dt_step))]})
            continue
        cfg = IntegratorConfig.for_grid(g, cfl=cfl, record_cadence=t_end)
        want = {int(round(t / cfg.dt)): t for t in times}
        hits = {}

        def grab(state, hits=hits, want=want, dt=cfg.dt):
            k = int(round(state.t / dt))
            if k in want:
                hits[want[k]] = (state.u.samples.copy(), state.w.samples.copy())

        k_obs = max(1, math.gcd(*want.keys()))
        evolve_record(data, variant, cfg, t_end, g, observers=[grab], observe_every=k_obs,
                      keep_record=False, backend=backend, check_margin=False)
        runs.append(hits)
    worst = 0.0
    for t in times:
        uc, wc = runs[0][t]
        uf, wf = runs[1][t]
        a = WaveState.from_arrays(grid, t, uc, wc)
        b = WaveState.from_arrays(grid, t, restrict_pairs(uf), restrict_pairs(wf))
        worst = max(worst, pair_norm(a, b))
    return worst
