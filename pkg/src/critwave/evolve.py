"""Time integration of u_tt - Lap u + N(u) = 0 on a radial grid.

Velocity Verlet (kick, drift, kick) with dt = cfl * dr.  Work is restricted
to the cells that can be nonzero: zero data stays exactly zero beyond the
front, and the front moves at most one cell per step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Iterable

import numpy as np
from scipy.special import j0

from ._backend import get_backend
from .grid import RadialField, RadialGrid, SpacetimeRecord, WaveState
from .nonlinearity import DEFAULT_POLICY, SaturationError, SeriesPolicy, Variant


class SolverAbort(RuntimeError):
    """Evolution stopped; carries the failing step and time."""

    def __init__(self, msg, step=None, t=None):
        super().__init__(f"{msg} (step {step}, t = {t})" if step is not None else msg)
        self.step = step
        self.t = t


class BoundaryReached(SolverAbort):
    pass


@dataclass(frozen=True)
class IntegratorConfig:
    dt: float
    cfl: float = 0.5
    record_cadence: float = 1.0
    support_threshold: float = 1e-12
    policy: SeriesPolicy = DEFAULT_POLICY

    def __post_init__(self):
        if not (0 < self.cfl <= 0.9):
            raise ValueError(f"cfl must lie in (0, 0.9], got {self.cfl}")
        if not (math.isfinite(self.dt) and self.dt != 0):
            raise ValueError("dt must be finite and nonzero")
        if not (self.record_cadence > 0 and self.support_threshold > 0):
            raise ValueError("record_cadence and support_threshold must be positive")

    @classmethod
    def for_grid(cls, grid: RadialGrid, cfl: float = 0.5, record_cadence: float = 1.0,
                 support_threshold: float = 1e-12, policy: SeriesPolicy = DEFAULT_POLICY):
        return cls(cfl * grid.dr, cfl, record_cadence, support_threshold, policy)

    def check_grid(self, grid: RadialGrid):
        if not math.isclose(abs(self.dt), self.cfl * grid.dr, rel_tol=1e-12):
            raise ValueError(f"dt = {self.dt} does not equal cfl*dr = {self.cfl * grid.dr}")

    def reversed(self) -> "IntegratorConfig":
        return replace(self, dt=-self.dt)

    @property
    def steps_per_record(self) -> int:
        return max(1, int(round(self.record_cadence / abs(self.dt))))


@dataclass(frozen=True)
class InitialDataSpec:
    family: str = "bump"
    amplitude: float = 1.0
    r0: float = 1.0
    mass_term: bool = False
    velocity_amplitude: float = 0.0
    samples: tuple | None = None

    def __post_init__(self):
        if self.family not in ("bump", "gaussian_truncated", "custom_samples"):
            raise ValueError(f"unknown initial-data family {self.family!r}")
        if not (math.isfinite(self.amplitude) and self.r0 > 0):
            raise ValueError("amplitude must be finite and r0 positive")
        if self.family == "custom_samples" and self.samples is None:
            raise ValueError("custom_samples needs samples=(u0, u1)")

    @property
    def support_radius(self) -> float:
        """Radius of supp(u0, u1); for custom samples r0 is taken as the bound."""
        if self.family == "gaussian_truncated":
            return GAUSS_CUT * self.r0
        return self.r0


GAUSS_CUT = 6.0


def bump_profile(r, amplitude=1.0, r0=1.0):
    """amplitude * exp(1 - 1/(1 - (r/r0)^2)) inside r0, zero outside."""
    r = np.asarray(r, dtype=np.float64)
    s = (r / r0) ** 2
    out = np.zeros_like(r)
    inside = s < 1.0
    out[inside] = amplitude * np.exp(1.0 - 1.0 / (1.0 - s[inside]))
    return out


def gaussian_profile(r, amplitude=1.0, r0=1.0):
    r = np.asarray(r, dtype=np.float64)
    return np.where(r < GAUSS_CUT * r0, amplitude * np.exp(-((r / r0) ** 2)), 0.0)


def initial_state(data: InitialDataSpec, grid: RadialGrid) -> WaveState:
    r = grid.r
    if data.family == "bump":
        u0 = bump_profile(r, data.amplitude, data.r0)
        u1 = bump_profile(r, data.velocity_amplitude, data.r0)
    elif data.family == "gaussian_truncated":
        u0 = gaussian_profile(r, data.amplitude, data.r0)
        u1 = gaussian_profile(r, data.velocity_amplitude, data.r0)
    else:
        u0, u1 = (np.asarray(s, dtype=np.float64) for s in data.samples)
    return WaveState.from_arrays(grid, 0.0, u0, u1)


def laplacian_radial(f: RadialField) -> RadialField:
    """Conservative (1/r)(r f_r)_r, zero inner flux, f_n = 0 outside."""
    g = f.grid
    u = f.samples
    j = np.arange(g.n_cells, dtype=np.float64)
    up = np.append(u[1:], 0.0)
    um = np.concatenate(([0.0], u[:-1]))
    return RadialField(g, ((j + 1.0) * (up - u) - j * (u - um)) / ((j + 0.5) * g.dr**2))


def _mass(variant: Variant, mass_term: bool) -> float:
    if not mass_term:
        return 0.0
    if variant is not Variant.LINEAR:
        raise ValueError("mass_term applies to the Linear variant only "
                         "(MassiveNoCubic already carries its mass in N)")
    return 1.0


def _front(u, w, m):
    nz = np.flatnonzero((u[:m] != 0.0) | (w[:m] != 0.0))
    return -1 if len(nz) == 0 else int(nz[-1])


class _Stepper:
    """Mutable (u, w) arrays advanced in chunks by a kernel backend."""

    def __init__(self, state: WaveState, variant, cfg: IntegratorConfig,
                 mass_term=False, backend=None):
        self.grid = state.grid
        cfg.check_grid(self.grid)
        self.variant = Variant.parse(variant)
        self.cfg = cfg
        self.mass = _mass(self.variant, mass_term)
        self.u = np.array(state.u.samples, dtype=np.float64)
        self.w = np.array(state.w.samples, dtype=np.float64)
        self.t0 = state.t
        self.nstep = 0
        self.kern = get_backend(backend)
        self.coeffs = cfg.policy.coefficients(2, cfg.policy.switch_threshold**2)
        self.front = _front(self.u, self.w, self.grid.n_cells)

    @property
    def t(self):
        return self.t0 + self.nstep * self.cfg.dt

    def advance(self, k: int):
        if k <= 0:
            return
        n = self.grid.n_cells
        m = min(n, self.front + k + 2) if self.front >= 0 else 0
        if m > 0:
            st = self.kern.verlet_run(self.u, self.w, self.grid.dr, self.cfg.dt, int(k), int(m),
                                      self.variant.code, self.mass,
                                      self.cfg.policy.switch_threshold, self.coeffs)
            if st:
                raise SaturationError(f"nonlinearity saturated within steps "
                                      f"{self.nstep + 1}..{self.nstep + k}, t <= {self.t + k * self.cfg.dt}")
            if not (np.all(np.isfinite(self.u[:m])) and np.all(np.isfinite(self.w[:m]))):
                raise SolverAbort("non-finite values", self.nstep + k, self.t + k * self.cfg.dt)
            self.front = _front(self.u, self.w, m)
        self.nstep += k

    def state(self) -> WaveState:
        return WaveState.from_arrays(self.grid, self.t, self.u, self.w)

    def boundary_hit(self) -> bool:
        thr = self.cfg.support_threshold
        return abs(self.u[-1]) > thr


def step(state: WaveState, variant, cfg: IntegratorConfig, mass_term=False,
         backend=None) -> WaveState:
    s = _Stepper(state, variant, cfg, mass_term, backend)
    s.advance(1)
    return s.state()


def evolve_state(state: WaveState, variant, cfg: IntegratorConfig, nsteps: int,
                 mass_term=False, backend=None) -> WaveState:
    s = _Stepper(state, variant, cfg, mass_term, backend)
    s.advance(nsteps)
    return s.state()


def evolve_record(data: InitialDataSpec | WaveState, variant, cfg: IntegratorConfig,
                  t_final: float, grid: RadialGrid | None = None, *,
                  observers: Iterable[Callable[[WaveState], None]] = (),
                  observe_every: int | None = None, keep_record: bool = True,
                  backend=None, fingerprint: str = "",
                  check_margin: bool = True) -> SpacetimeRecord:
    """Run to t_final, storing a snapshot every record_cadence.

    Observers get a WaveState every ``observe_every`` steps (default: at the
    record cadence) plus the initial and final states.  An entry may also
    be an ``(observer, every)`` pair with its own step cadence.  With
    ``keep_record=False`` only the initial and final snapshots are kept.
    """
    if isinstance(data, WaveState):
        state0 = data
        grid = state0.grid
        radius = _state_radius(state0, cfg.support_threshold)
        mass_term = False
    else:
        if grid is None:
            raise ValueError("evolve_record needs a grid for InitialDataSpec input")
        state0 = initial_state(data, grid)
        radius = data.support_radius
        mass_term = data.mass_term
    if t_final < 0:
        raise ValueError("t_final must be >= 0")
    if check_margin and grid.R_max < radius + t_final + 2 * grid.dr - 1e-12:
        raise ValueError(f"R_max = {grid.R_max} < r0 + t_final + 2 dr = "
                         f"{radius + t_final + 2 * grid.dr}")
    if cfg.dt < 0:
        raise ValueError("evolve_record runs forward; use evolve_state for negative dt")
    stepper = _Stepper(state0, variant, cfg, mass_term, backend)
    nsteps = int(round((t_final - state0.t) / cfg.dt))
    k_rec = cfg.steps_per_record
    k_obs = observe_every or k_rec
    rec_steps = sorted(set(range(0, nsteps + 1, k_rec)) | {nsteps}) if keep_record else [0, nsteps]
    rec_steps = sorted(set(rec_steps))
    n = grid.n_cells
    U = np.zeros((len(rec_steps), n))
    W = np.zeros((len(rec_steps), n))
    times = np.zeros(len(rec_steps))
    obs = [o if isinstance(o, tuple) else (o, k_obs) for o in observers]
    cadences = {max(1, int(k)) for _, k in obs}
    events = set(rec_steps) | {nsteps}
    for k in cadences:
        events |= set(range(0, nsteps + 1, k))
    events = sorted(events)
    ri = 0
    for ev in events:
        stepper.advance(ev - stepper.nstep)
        if stepper.boundary_hit():
            raise BoundaryReached("support reached the outer boundary", stepper.nstep, stepper.t)
        if ri < len(rec_steps) and rec_steps[ri] == ev:
            U[ri] = stepper.u
            W[ri] = stepper.w
            times[ri] = stepper.t
            ri += 1
        due = [o for o, k in obs if ev % max(1, int(k)) == 0 or ev == nsteps]
        if due:
            st = stepper.state()
            for o in due:
                o(st)
    return SpacetimeRecord(grid, k_rec * cfg.dt, times, U, W, fingerprint, cfg.dt)


def _state_radius(state, thr):
    idx = np.flatnonzero((np.abs(state.u.samples) > thr) | (np.abs(state.w.samples) > thr))
    return 0.0 if len(idx) == 0 else float(state.grid.r[idx[-1]])


# -- Hankel oracle ---------------------------------------------------------

def _even_fit(h, g):
    """c0, c2 of c0 + c2 x^2 + c4 x^4 through the first three midpoints."""
    x = (np.arange(3) + 0.5) * h
    A = np.vstack([np.ones(3), x**2, x**4]).T
    c = np.linalg.solve(A, np.asarray(g[:3], dtype=np.float64))
    return c[0], c[1]


def _bessel_sum(x_out, x_in, vals, chunk=512):
    """sum_i J0(x_out * x_in_i) vals_i, chunked to bound memory."""
    out = np.empty(len(x_out))
    for s in range(0, len(x_out), chunk):
        out[s:s + chunk] = j0(np.outer(x_out[s:s + chunk], x_in)) @ vals
    return out


def _midpoint_hankel(x_out, h, x_in, g):
    """Midpoint rule for int_0^inf J0(x_out s) g(s) s ds plus the
    Euler-Maclaurin correction for the s ds weight at the origin."""
    out = _bessel_sum(x_out, x_in, g * x_in) * h
    g0, g2 = _even_fit(h, g)
    out += -h**2 / 24.0 * g0 + 7.0 * h**4 / 5760.0 * (6.0 * g2 - 1.5 * g0 * x_out**2)
    return out


def hankel_propagate(u0: RadialField, u1: RadialField, t: float, *,
                     rho_refine: int = 4, rho_cut: float = 0.5) -> WaveState:
    """Free radial wave propagation by order-zero Hankel quadrature.

    u^(rho, t) = cos(rho t) u0^ + sin(rho t)/rho u1^.  Frequencies are
    midpoints with spacing pi / (rho_refine * R_max) up to rho_cut * pi/dr.
    """
    if t < 0:
        raise ValueError("hankel_propagate needs t >= 0")
    g = u0.grid
    if u1.grid != g:
        raise ValueError("grid mismatch")
    r, dr = g.r, g.dr
    drho = np.pi / (rho_refine * g.R_max)
    m = int(round(rho_cut * np.pi / dr / drho))
    rho = (np.arange(m) + 0.5) * drho
    F0 = _midpoint_hankel(rho, dr, r, u0.samples)
    F1 = _midpoint_hankel(rho, dr, r, u1.samples)
    c, s = np.cos(rho * t), np.sin(rho * t)
    Fu = c * F0 + s / rho * F1
    Fw = -rho * s * F0 + c * F1
    u = _midpoint_hankel(r, drho, rho, Fu)
    w = _midpoint_hankel(r, drho, rho, Fw)
    return WaveState.from_arrays(g, t, u, w)
