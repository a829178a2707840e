"""Kelvin inversion of Minkowski space and the cone functionals.

Coordinates: T = t/(t^2 - r^2), R = r/(t^2 - r^2), Omega = T^2 - R^2 and
U = Omega^{-1/2} u.  The physical run is shifted in time by ``shift`` so
that its data sit inside the backward cone of the point t' = 1/2; with
shift = r0 + 1/2 the transformed solution is supported in T + R <= 2.
Slices live on the staggered grid R_i = (i + 1/2) dR.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._backend import get_backend
from .diagnostics import fit_slope, trapz_window
from .grid import SpacetimeRecord, WaveState
from .nonlinearity import (DEFAULT_POLICY, SaturationError, SeriesPolicy, Variant,
                           conformal_potential, conformal_remainder, eval_N, eval_P,
                           exp_tail)

APEX = 0.5


class CoverageError(ValueError):
    pass


def time_shift(r_support: float) -> float:
    """Shift placing supp(u0, u1) in the backward cone of t' = 1/2."""
    return r_support + APEX


# -- the inversion ---------------------------------------------------------

@dataclass(frozen=True)
class ConformalPoint:
    T: float
    R: float
    Omega: float


def kelvin_map(t: float, r: float) -> ConformalPoint:
    if not (math.isfinite(t) and math.isfinite(r)) or r < 0 or t <= r:
        raise ValueError(f"(t, r) = ({t}, {r}) is not strictly inside the forward cone")
    q = (t - r) * (t + r)
    return ConformalPoint(t / q, r / q, 1.0 / q)


def minkowski(x, y) -> float:
    return x[0] * y[0] - x[1] * y[1] - x[2] * y[2]


def dg_conformality(x, y):
    """<dG_x y, dG_x y> from the explicit differential, and <x,x>^-2 <y,y>."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    q = minkowski(x, x)
    scale = float(np.dot(x, x))
    if scale == 0 or abs(q) <= 1e-14 * scale:
        raise ValueError("x is null")
    v = y / q - 2.0 * x * minkowski(x, y) / q**2
    return float(minkowski(v, v)), float(minkowski(y, y) / q**2)


def pullback(T, R, shift: float = 0.0):
    """Run time t and radius r of conformal points (T, R), R < T."""
    T = np.asarray(T, dtype=np.float64)
    R = np.asarray(R, dtype=np.float64)
    Om = (T - R) * (T + R)
    return T / Om - shift, R / Om, Om


# -- record interpolation --------------------------------------------------

def _lagrange4(xi):
    """Cubic Lagrange weights and derivative weights on nodes -1, 0, 1, 2."""
    a, b, c = xi + 1.0, xi - 1.0, xi - 2.0
    w = np.stack([-xi * b * c / 6.0, a * b * c / 2.0, -a * xi * c / 2.0, a * xi * b / 6.0])
    dw = np.stack([
        -(3 * xi**2 - 6 * xi + 2) / 6.0,
        (3 * xi**2 - 4 * xi - 1) / 2.0,
        -(3 * xi**2 - 2 * xi - 2) / 2.0,
        (3 * xi**2 - 1) / 6.0,
    ])
    return w, dw


class RecordSampler:
    """Evaluate u, u_t, u_r of a record at scattered (t, r).

    ``hermite``: cubic Hermite in time using the stored w = u_t, cubic
    Lagrange in r with the even reflection at the origin.
    ``bilinear``: linear in both, derivatives from the stored w and
    centred differences.
    """

    def __init__(self, rec: SpacetimeRecord, method: str = "hermite"):
        if method not in ("hermite", "bilinear"):
            raise ValueError(f"unknown interpolation {method!r}")
        self.rec = rec
        self.method = method

    def covered(self, t):
        return t <= self.rec.t_final + 1e-12

    def __call__(self, t, r):
        rec = self.rec
        t = np.asarray(t, dtype=np.float64)
        r = np.asarray(r, dtype=np.float64)
        if np.any(t < rec.t_start - 1e-12) or np.any(t > rec.t_final + 1e-12):
            raise CoverageError("pullback outside the record's time range")
        if np.any(r > rec.grid.R_max):
            raise CoverageError("pullback outside the record's grid")
        times = rec.times
        k = np.clip(np.searchsorted(times, t, side="right") - 1, 0, len(times) - 2)
        h = times[k + 1] - times[k]
        s = (t - times[k]) / h
        if self.method == "bilinear":
            return _bilinear(rec.u, rec.w, k, s, r, rec.grid.dr)
        return _hermite(rec.u, rec.w, k, s, h, r, rec.grid.dr)


def _gather(arr, k, idx):
    n = arr.shape[1]
    idx = np.where(idx < 0, -idx - 1, idx)
    return np.where(idx < n, arr[k, np.minimum(idx, n - 1)], 0.0)


def _hermite(U, W, k, s, h, r, dr):
    """Hermite in time between rows k and k+1, cubic Lagrange in r."""
    x = r / dr - 0.5
    j = np.floor(x).astype(np.int64)
    wts, dwts = _lagrange4(x - j)
    vals = {}
    for name, arr in (("u", U), ("w", W)):
        for tag, kk in ((0, k), (1, k + 1)):
            g = [_gather(arr, kk, j + m - 1) for m in range(4)]
            vals[name, tag] = sum(wts[m] * g[m] for m in range(4))
            vals[name + "r", tag] = sum(dwts[m] * g[m] for m in range(4)) / dr
    s2, s3 = s * s, s * s * s
    h00, h10, h01, h11 = 2 * s3 - 3 * s2 + 1, s3 - 2 * s2 + s, -2 * s3 + 3 * s2, s3 - s2
    d00, d10, d01, d11 = 6 * s2 - 6 * s, 3 * s2 - 4 * s + 1, -6 * s2 + 6 * s, 3 * s2 - 2 * s

    def herm(a, b, c00, c10, c01, c11):
        return c00 * vals[a, 0] + c10 * h * vals[b, 0] + c01 * vals[a, 1] + c11 * h * vals[b, 1]

    u = herm("u", "w", h00, h10, h01, h11)
    ut = herm("u", "w", d00, d10, d01, d11) / h
    ur = herm("ur", "wr", h00, h10, h01, h11)
    return u, ut, ur


def _bilinear(U, W, k, s, r, dr):
    x = r / dr - 0.5
    j = np.floor(x).astype(np.int64)
    xi = x - j

    def lin(arr, kk, off=0):
        return (1 - xi) * _gather(arr, kk, j + off) + xi * _gather(arr, kk, j + 1 + off)

    def both(arr, off=0):
        return (1 - s) * lin(arr, k, off) + s * lin(arr, k + 1, off)

    return both(U), both(W), (both(U, 1) - both(U, -1)) / (2 * dr)


# -- conformal slices ------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ConformalField:
    """U and U_T at R_i = (i + 1/2) dR, i < len(U), all R_i < T."""

    T: float
    dR: float
    U: np.ndarray
    U_T: np.ndarray
    provenance: str = "transformed"
    n_covered: int = -1

    def __post_init__(self):
        if self.provenance not in ("transformed", "directly_evolved"):
            raise ValueError("provenance must be 'transformed' or 'directly_evolved'")
        if len(self.U) != len(self.U_T) or len(self.U) < 3:
            raise ValueError("need matching U, U_T with at least 3 nodes")
        if not (np.all(np.isfinite(self.U)) and np.all(np.isfinite(self.U_T))):
            raise ValueError("conformal samples must be finite")
        if (len(self.U) - 0.5) * self.dR >= self.T:
            raise ValueError("slice nodes must lie inside R < T")
        if self.n_covered < 0:
            object.__setattr__(self, "n_covered", len(self.U))

    @property
    def R(self):
        return (np.arange(len(self.U)) + 0.5) * self.dR

    @property
    def Omega(self):
        R = self.R
        return (self.T - R) * (self.T + R)

    @property
    def U_R(self):
        return radial_derivative(self.U, self.dR)


def nodes_inside(T: float, dR: float) -> int:
    """Number of nodes (i + 1/2) dR < T."""
    n = int(math.ceil(T / dR - 0.5))
    while n > 0 and (n - 0.5) * dR >= T:
        n -= 1
    return n


def radial_derivative(U, dR):
    """Centred differences, even reflection at 0, one-sided at the end."""
    U = np.asarray(U)
    d = np.empty_like(U)
    d[1:-1] = (U[2:] - U[:-2]) / (2 * dR)
    d[0] = (U[1] - U[0]) / (2 * dR)
    d[-1] = (3 * U[-1] - 4 * U[-2] + U[-3]) / (2 * dR)
    return d


def _poly_extend(R_fit, vals, R_new, deg=3):
    c = np.polyfit(R_fit, vals, deg)
    return np.polyval(c, R_new)


def transform_record(rec: SpacetimeRecord, T_slices, *, shift: float, dR: float | None = None,
                     T_cap: float = 1.0 / 3.0, interp: str = "hermite",
                     max_fill: float = 0.1, fill_nodes: int = 24) -> list[ConformalField]:
    """Pull the record back onto conformal slices, U = Omega^{-1/2} u.

    Points near the mantle pull back to t -> infinity.  Nodes beyond the
    record's final time are filled by cubic extrapolation in R from the
    last ``fill_nodes`` covered nodes (U is smooth across the mantle), as
    long as the uncovered part is at most ``max_fill`` of the slice.
    """
    if dR is None:
        dR = rec.grid.dr * T_cap**2
    sampler = RecordSampler(rec, interp)
    out = []
    for T in T_slices:
        T, R, t, r, Om = _slice_points(float(T), dR, shift, rec.t_start)
        nc = int(np.count_nonzero(sampler.covered(t)))
        u, ut, ur = sampler(t[:nc], r[:nc])
        out.append(_assemble(T, dR, R, Om, u, ut, ur, max_fill, fill_nodes))
    return out


def _slice_points(T, dR, shift, t_start):
    if T <= 0:
        raise CoverageError("slice time must be positive")
    if 1.0 / T - shift < t_start - 1e-12:
        raise CoverageError(f"slice T = {T} starts before the record (needs T <= 1/shift)")
    n = nodes_inside(T, dR)
    if n < 4:
        raise CoverageError(f"slice T = {T} has fewer than 4 nodes")
    R = (np.arange(n) + 0.5) * dR
    t, r, Om = pullback(T, R, shift)
    return T, R, t, r, Om


def _assemble(T, dR, R, Om, u, ut, ur, max_fill, fill_nodes, deg=3):
    """U = Omega^{-1/2} u and its T-derivative; extrapolate the uncovered rim."""
    n, nc = len(R), len(u)
    if nc < n and (n - nc > max_fill * n or nc < fill_nodes):
        raise CoverageError(f"slice T = {T}: {n - nc} of {n} nodes pull back past t_final")
    U = np.zeros(n)
    UT = np.zeros(n)
    Rc, Oc = R[:nc], Om[:nc]
    sq = np.sqrt(Oc)
    U[:nc] = u / sq
    UT[:nc] = -T * u / (Oc * sq) + (-(T * T + Rc * Rc) * ut - 2 * T * Rc * ur) / (Oc * Oc * sq)
    if nc < n:
        sl = slice(max(nc - max(fill_nodes, 2 * (n - nc)), 0), nc)
        U[nc:] = _poly_extend(R[sl], U[sl], R[nc:], deg)
        UT[nc:] = _poly_extend(R[sl], UT[sl], R[nc:], deg)
    return ConformalField(T, dR, U, UT, "transformed", nc)


class SliceCollector:
    """Observer that transforms a run onto conformal slices as it goes.

    Call it with every integrator step (observe_every=1): each pullback
    point is sampled by Hermite interpolation between the two steps that
    bracket it, so U_T carries O(dt^3) instead of O(dt_rec^3) error.

    Late-time errors are amplified by Omega^{-5/2} in U_T, so points that
    pull back beyond ``t_trust`` are discarded and refilled by a
    least-squares polynomial of degree ``fill_degree`` fitted over a
    window twice as wide as the gap.
    """

    def __init__(self, T_slices, *, shift: float, dR: float, t_trust: float = np.inf,
                 max_fill: float = 0.1, fill_nodes: int = 24, fill_degree: int = 2):
        self.shift, self.dR, self.t_trust = shift, dR, t_trust
        self.max_fill, self.fill_nodes, self.fill_degree = max_fill, fill_nodes, fill_degree
        self.slices = [_slice_points(float(T), dR, shift, 0.0) for T in T_slices]
        t_all = np.concatenate([p[2] for p in self.slices])
        r_all = np.concatenate([p[3] for p in self.slices])
        self._order = np.argsort(t_all, kind="stable")
        self._t = t_all[self._order]
        self._r = r_all[self._order]
        self._vals = np.full((3, len(t_all)), np.nan)
        self._next = 0
        self._prev = None

    def __call__(self, state: WaveState):
        u, w = state.u.samples, state.w.samples
        if self._prev is None:
            self._buf = np.empty((2, 2, len(u)))
            self._buf[0, 0], self._buf[1, 0] = u, w
            self._prev = state.t
            hi = int(np.searchsorted(self._t, state.t + 1e-12, side="right"))
            if hi and self._t[0] < state.t - 1e-12:
                raise CoverageError("pullback before the first observed state")
            if hi:
                k = np.zeros(hi, dtype=np.int64)
                self._buf[:, 1] = self._buf[:, 0]
                vals = _hermite(self._buf[0], self._buf[1], k, np.zeros(hi), 1.0,
                                self._r[:hi], state.grid.dr)
                for i in range(3):
                    self._vals[i, :hi] = vals[i]
                self._next = hi
            return self
        t0, t1 = self._prev, state.t
        self._buf[0, 1], self._buf[1, 1] = u, w
        lo = self._next
        hi = int(np.searchsorted(self._t, t1, side="right"))
        if hi > lo:
            tq, rq = self._t[lo:hi], self._r[lo:hi]
            k = np.zeros(hi - lo, dtype=np.int64)
            h = t1 - t0
            vals = _hermite(self._buf[0], self._buf[1], k, (tq - t0) / h, h, rq, state.grid.dr)
            for i in range(3):
                self._vals[i, lo:hi] = vals[i]
            self._next = hi
        self._buf[:, 0] = self._buf[:, 1]
        self._prev = t1
        return self

    def fields(self, skip_uncovered: bool = False) -> list[ConformalField]:
        """Assembled slices; with ``skip_uncovered`` slices too sparse to fill are left out."""
        vals = np.empty_like(self._vals)
        vals[:, self._order] = self._vals
        out, off = [], 0
        for T, R, t, r, Om in self.slices:
            n = len(R)
            seg = vals[:, off:off + n]
            off += n
            ok = np.isfinite(seg[0]) & np.isfinite(seg[1]) & (t <= self.t_trust)
            nc = int(np.count_nonzero(ok))
            u, ut, ur = (seg[i, :nc] for i in range(3))
            try:
                out.append(_assemble(T, self.dR, R, Om, u, ut, ur, self.max_fill,
                                     self.fill_nodes, self.fill_degree))
            except CoverageError:
                if not skip_uncovered:
                    raise
        return out


def _smooth_step(s):
    """1 for s <= 0, 0 for s >= 1, C-infinity in between."""
    s = np.clip(s, 0.0, 1.0)

    def psi(x):
        return np.where(x > 0, np.exp(-1.0 / np.where(x > 0, x, 1.0)), 0.0)

    a, b = psi(1.0 - s), psi(s)
    return a / (a + b)


def extend_past_mantle(f: ConformalField, n_total: int, width: float, fit_nodes: int = 24):
    """Arrays of length n_total continuing U, U_T smoothly beyond R = T."""
    n = len(f.U)
    R_all = (np.arange(n_total) + 0.5) * f.dR
    U = np.zeros(n_total)
    UT = np.zeros(n_total)
    U[:n], UT[:n] = f.U, f.U_T
    k = min(fit_nodes, n)
    R_fit = R_all[n - k:n]
    R_new = R_all[n:]
    taper = _smooth_step((R_new - f.T) / width)
    U[n:] = _poly_extend(R_fit, f.U[n - k:], R_new) * taper
    UT[n:] = _poly_extend(R_fit, f.U_T[n - k:], R_new) * taper
    return U, UT


def evolve_conformal(init: ConformalField, T_end: float, *, cfl: float = 0.5,
                     store_every: int = 1, ext_width: float | None = None,
                     policy: SeriesPolicy = DEFAULT_POLICY, backend=None) -> list[ConformalField]:
    """Integrate U_TT - Lap U + U^5 S_2(Omega U^2) = 0 toward smaller T.

    The mantle is an outflow characteristic for decreasing T, so the grid
    simply extends past it with a smooth continuation of the data and an
    outer Dirichlet wall the interior never sees.
    """
    if not (0 < T_end < init.T):
        raise ValueError("need 0 < T_end < T_start")
    if not (0 < cfl <= 0.9):
        raise ValueError(f"CFL {cfl} outside (0, 0.9]")
    dR = init.dR
    T0 = init.T
    width = ext_width if ext_width is not None else 0.25 * T0
    n_total = nodes_inside(T0 + width, dR) + 8
    U, W = extend_past_mantle(init, n_total, width)
    dT = -cfl * dR
    nsteps = int(round((T0 - T_end) / (cfl * dR)))
    kern = get_backend(backend)
    coeffs = policy.coefficients(2)
    slices = [init if init.provenance == "directly_evolved"
              else ConformalField(T0, dR, init.U.copy(), init.U_T.copy(), "directly_evolved", len(init.U))]
    done = 0
    while done < nsteps:
        k = min(store_every, nsteps - done)
        Tk = T0 + done * dT
        st = kern.conformal_run(U, W, dR, Tk, dT, k, policy.switch_threshold, coeffs)
        done += k
        T = T0 + done * dT
        if st:
            raise SaturationError(f"conformal nonlinearity saturated before T = {T}")
        if not (np.all(np.isfinite(U)) and np.all(np.isfinite(W))):
            raise FloatingPointError(f"non-finite conformal field at T = {T}")
        n = nodes_inside(T, dR)
        # velocity with respect to increasing T is the stored W
        slices.append(ConformalField(T, dR, U[:n].copy(), W[:n].copy(), "directly_evolved", n))
    return slices


# -- densities and quadrature ---------------------------------------------

def ball_integral(vals, dR: float, T: float) -> float:
    """int_{|X| < T} f dX from nodal values with R_i < T.

    Full cells use the midpoint rule; the cut cell [k dR, T] takes the
    linear interpolant of the two nearest inside nodes at its centre.
    """
    vals = np.asarray(vals, dtype=np.float64)
    n = len(vals)
    k = min(int(T / dR), n)
    R = (np.arange(k) + 0.5) * dR
    total = float(np.dot(vals[:k], R)) * 2.0 * np.pi * dR
    a = k * dR
    if T > a and n >= 2:
        Rc = 0.5 * (a + T)
        i1 = min(n - 1, k)
        i0 = i1 - 1
        R0, R1 = (i0 + 0.5) * dR, (i1 + 0.5) * dR
        fc = vals[i0] + (vals[i1] - vals[i0]) * (Rc - R0) / (R1 - R0)
        total += fc * np.pi * (T * T - a * a)
    return total


def energy_density(f: ConformalField, variant=Variant.MASSLESS, policy=DEFAULT_POLICY):
    """e = 1/2 (U_T^2 + U_R^2 + Omega^{-3} G(Omega U^2))."""
    variant = Variant.parse(variant)
    UR = f.U_R
    Om = f.Omega
    pot = np.asarray(conformal_potential(f.U, Om, policy))
    if variant in (Variant.MASSIVE_NO_CUBIC, Variant.FULL_EXPONENTIAL):
        pot = pot + f.U**2 / Om**2
    if variant is Variant.FULL_EXPONENTIAL:
        pot = pot + 0.5 * f.U**4 / Om
    return 0.5 * (f.U_T**2 + UR**2 + pot)


def momentum_density(f: ConformalField):
    return f.U_T * f.U_R


def scaled_energy(f: ConformalField, policy=DEFAULT_POLICY) -> float:
    return ball_integral(energy_density(f, Variant.MASSLESS, policy), f.dR, f.T)


def mantle_values(f: ConformalField):
    """V(T) = U(T, R=T) and V'(T) = (U_T + U_R)(T, T), linear extrapolation."""
    n = len(f.U)
    R1, R0 = (n - 0.5) * f.dR, (n - 1.5) * f.dR
    s = (f.T - R1) / (R1 - R0)
    U = f.U
    D = f.U_T + f.U_R
    V = U[-1] + s * (U[-1] - U[-2])
    Vp = D[-1] + s * (D[-1] - D[-2])
    return float(V), float(Vp)


def _sorted(fields):
    fs = sorted(fields, key=lambda f: f.T, reverse=True)
    if len(fs) < 2:
        raise CoverageError("need at least two slices")
    return fs


def _trapz_T(Ts, vals, lo, hi):
    Ts = np.asarray(Ts)[::-1]
    vals = np.asarray(vals)[::-1]
    return trapz_window(Ts, vals, lo, hi)


@dataclass(frozen=True)
class ConformalBalance:
    T0: float
    E_T0: float
    flux: float
    pt_integral: float
    E_a: float
    T_top: float
    flux_verbatim: float
    flux_verbatim_vacuum_subtracted: float
    residual: float
    tolerance: float = 1e-3

    @property
    def energy_inequality(self) -> bool:
        return self.E_T0 + self.flux / math.sqrt(2.0) <= self.E_a * (1 + self.tolerance)

    @property
    def pt_inequality(self) -> bool:
        return self.pt_integral <= self.E_a * (1 + self.tolerance)

    @property
    def nonnegative(self) -> bool:
        return min(self.E_T0, self.flux, self.pt_integral, self.E_a) >= 0


class ConeLedger:
    """Per-slice quantities shared by cone_balance and cone_integrals."""

    def __init__(self, fields, policy=DEFAULT_POLICY):
        self.fields = _sorted(fields)
        self.T = np.array([f.T for f in self.fields])
        self.E = np.empty(len(self.fields))
        self.PB = np.empty(len(self.fields))
        self.flux_dens = np.empty(len(self.fields))
        self.V = np.empty(len(self.fields))
        for i, f in enumerate(self.fields):
            e = energy_density(f, Variant.MASSLESS, policy)
            self.E[i] = ball_integral(e, f.dR, f.T)
            P = eval_P(f.U, np.maximum(f.Omega, 0.0), policy)
            self.PB[i] = ball_integral(P, f.dR, f.T)
            V, Vp = mantle_values(f)
            self.V[i] = V
            # e + U_T U_R on the mantle, where Omega = 0
            self.flux_dens[i] = 0.5 * (Vp * Vp + V**6 / 6.0) * 2.0 * np.pi * f.T

    def energy_at(self, T0):
        if T0 < self.T[-1] - 1e-12 or T0 > self.T[0] + 1e-12:
            raise CoverageError(f"T0 = {T0} outside slice range [{self.T[-1]}, {self.T[0]}]")
        return float(np.interp(T0, self.T[::-1], self.E[::-1]))

    def flux_dY(self, lo, hi):
        return _trapz_T(self.T, self.flux_dens, lo, hi)

    def pt(self, lo, hi):
        return _trapz_T(self.T, self.T * self.PB, lo, hi)


def cone_balance(fields, T0: float, *, tolerance: float = 1e-3,
                 policy: SeriesPolicy = DEFAULT_POLICY, ledger: ConeLedger | None = None
                 ) -> ConformalBalance:
    """E(T0) + Flux/sqrt(2) = E_a - int_K P T on the slices between T0 and the top.

    Flux is reported with the surface measure of the mantle, so the
    dY-measure integral of 1/2 (V'^2 + V^6/6) is multiplied by sqrt(2).
    The verbatim flux integrand 1/2 (Omega^3 |grad V|^2 + e^{Omega V^2}
    - Omega^2 V^4 / 2) is 1/2 on the mantle; its integral and its
    vacuum-subtracted version are reported alongside.
    """
    lg = ledger or ConeLedger(fields, policy)
    T_top = float(lg.T[0])
    E_a = float(lg.E[0])
    E0 = lg.energy_at(T0)
    flux = math.sqrt(2.0) * lg.flux_dY(T0, T_top)
    pt = lg.pt(T0, T_top)
    verbatim = 0.5 * math.sqrt(2.0) * math.pi * (T_top**2 - T0**2)
    residual = E0 + flux / math.sqrt(2.0) + pt - E_a
    return ConformalBalance(T0, E0, flux, pt, E_a, T_top, verbatim, 0.0, residual, tolerance)


@dataclass
class ConeIntegralsReport:
    T2: float
    T_min: float
    I_plus: float
    I_minus: float
    I_plus_half: float
    I_minus_half: float
    vbar_T: np.ndarray
    vbar: np.ndarray
    vbar_checkpoint: np.ndarray
    exp_ladder_T: np.ndarray
    exp_ladder: np.ndarray
    exp_ratios: np.ndarray
    exp_over_T: np.ndarray

    @property
    def stable(self) -> bool:
        return all(abs(a - b) <= 1e-2 * max(abs(a), 1e-300)
                   for a, b in ((self.I_plus, self.I_plus_half), (self.I_minus, self.I_minus_half)))


def _weighted_slice(f, sign, policy):
    R = f.R
    e = energy_density(f, Variant.MASSLESS, policy)
    m = momentum_density(f)
    V, _ = mantle_values(f)
    integrand = (1 + sign * R / f.T) * (e + sign * m) + (f.U - V) ** 2 / (2 * f.T**2)
    return ball_integral(integrand, f.dR, f.T) / f.T


def _exp_cone(Ts, B, T, T_min_vol):
    """int_{K^T} e^{4U^2} = exact cone volume + int (e^{4U^2} - 1)."""
    lo = Ts[-1]
    excess = _trapz_T(Ts, B, lo, T)
    cap = B[-1] * lo / 3.0       # apex cap, scaled like the cone volume
    return math.pi * T**3 / 3.0 + excess + cap


def _exp_excess(fs):
    B = np.empty(len(fs))
    for i, f in enumerate(fs):
        x = 4.0 * f.U**2
        if np.any(x > 700):
            raise SaturationError("e^{4U^2} exponent above 700")
        B[i] = ball_integral(np.expm1(x), f.dR, f.T)
    return B


def exp_cone_profile(fields):
    """T and int_{K^T} e^{4U^2} dX dT for every slice T."""
    fs = _sorted(fields)
    Ts = np.array([f.T for f in fs])
    B = _exp_excess(fs)
    return Ts, np.array([_exp_cone(Ts, B, T, Ts[-1]) for T in Ts])


def cone_integrals(fields, T2: float, spec: "HyperboloidSpec | None" = None, *,
                   ladder_levels: int = 4, policy: SeriesPolicy = DEFAULT_POLICY
                   ) -> ConeIntegralsReport:
    fs = [f for f in _sorted(fields) if f.T <= T2 + 1e-12]
    if len(fs) < 3:
        raise CoverageError(f"fewer than three slices below T2 = {T2}")
    Ts = np.array([f.T for f in fs])
    res = {}
    for sign in (1, -1):
        vals = np.array([_weighted_slice(f, sign, policy) for f in fs])
        res[sign] = _trapz_T(Ts, vals, Ts[-1], Ts[0])
        res[sign, "half"] = _trapz_T(Ts[::2], vals[::2], Ts[::2][-1], Ts[0])
    V = np.array([mantle_values(f)[0] for f in fs])
    safe_T = np.minimum(Ts, 1.0 - 1e-15)
    check = np.where(Ts < 1, 4 * np.abs(V) <= np.sqrt(np.log(1.0 / safe_T)), False)
    B = _exp_excess(fs)
    ladder_T = np.array([T2 / 2**k for k in range(ladder_levels + 1) if T2 / 2**k >= Ts[-1] - 1e-12])
    ladder = np.array([_exp_cone(Ts, B, T, Ts[-1]) for T in ladder_T])
    ratios = ladder[:-1] / ladder[1:] if len(ladder) > 1 else np.array([])
    return ConeIntegralsReport(T2, float(Ts[-1]), res[1], res[-1], res[1, "half"], res[-1, "half"],
                               Ts, V, check, ladder_T, ladder, ratios, ladder / ladder_T)


# -- hyperboloid region ----------------------------------------------------

@dataclass(frozen=True)
class HyperboloidSpec:
    T_cap: float
    d: float
    t1: float | None = None
    t2: float | None = None

    def __post_init__(self):
        if not self.T_cap > 0:
            raise ValueError("T_cap must be positive")
        if not self.d > 1.0 / (2.0 * self.T_cap):
            raise ValueError(f"need d > 1/(2 T_cap) = {1 / (2 * self.T_cap)}")

    @property
    def t0(self) -> float:
        return 1.0 / self.T_cap


def in_hyperboloid(tp, r, T_cap):
    """(t', r) lies in D = Phi^{-1}(K^{T_cap})."""
    tp = np.asarray(tp, dtype=np.float64)
    r = np.asarray(r, dtype=np.float64)
    q = (tp - r) * (tp + r)
    return (tp > r) & (T_cap * q >= tp) & (tp - r >= 1.0 / (2.0 * T_cap))


@dataclass
class HyperboloidReport:
    t0: float
    windows: list
    values: np.ndarray
    slope: float


class HyperboloidWindows:
    """Streaming int_{D at time t} |N|^2 dx, windowed dyadically in t'."""

    def __init__(self, spec: HyperboloidSpec, shift: float = 0.0, variant=Variant.MASSLESS,
                 policy: SeriesPolicy = DEFAULT_POLICY):
        self.spec, self.shift = spec, shift
        self.variant = Variant.parse(variant)
        self.policy = policy
        self.times, self.values = [], []

    def update(self, state: WaveState):
        tp = state.t + self.shift
        g = state.grid
        mask = in_hyperboloid(tp, g.r, self.spec.T_cap)
        if np.any(mask):
            n = np.asarray(eval_N(state.u.samples[mask], self.variant, self.policy))
            q = float(np.dot(n * n, g.weights()[mask]))
        else:
            q = 0.0
        self.times.append(tp)
        self.values.append(q)
        return self

    __call__ = update

    def window(self, a, b):
        return trapz_window(self.times, self.values, a, b)

    def report(self) -> HyperboloidReport:
        t0 = self.spec.t0
        if not self.times or self.times[-1] < 2 * t0:
            raise ValueError("empty windows: record ends before 2 t0")
        wins = []
        n = 0
        while t0 * 2 ** (n + 1) <= self.times[-1] + 1e-9:
            a, b = t0 * 2**n, t0 * 2 ** (n + 1)
            wins.append((n, a, b, self.window(a, b)))
            n += 1
        vals = np.array([w[3] for w in wins])
        return HyperboloidReport(t0, wins, vals, fit_slope([w[0] for w in wins], vals))


def hyperboloid_n_decay(rec: SpacetimeRecord, spec: HyperboloidSpec, shift: float = 0.0,
                        variant=Variant.MASSLESS) -> HyperboloidReport:
    if rec.t_start + shift > spec.t0 + 1e-12:
        raise CoverageError("record must start before the hyperboloid apex")
    acc = HyperboloidWindows(spec, shift, variant)
    for i in range(len(rec)):
        acc.update(rec.state(i))
    return acc.report()


def conformal_window_integral(fields, t1: float, t2: float, T_cap: float,
                              policy: SeriesPolicy = DEFAULT_POLICY) -> float:
    """The physical window integral of |N|^2 written on conformal slices.

    |N|^2 dx dt = Omega^5 U^10 S_2^2 Omega^{-3} dX dT over the image of
    D cap {t1 <= t' <= t2}.
    """
    fs = _sorted(fields)
    Ts, vals = [], []
    for f in fs:
        Om = f.Omega
        R = f.R
        tp = f.T / Om
        mask = (f.T <= T_cap + 1e-12) & (tp >= t1) & (tp <= t2)
        x = Om * f.U**2
        g = Om**2 * f.U**10 * np.asarray(exp_tail(x, 2, policy)) ** 2
        Ts.append(f.T)
        vals.append(float(np.dot(np.where(mask, g, 0.0), R)) * 2 * np.pi * f.dR)
    Ts = np.array(Ts)
    return _trapz_T(Ts, np.array(vals), Ts[-1], Ts[0])


# -- remainder sign probe --------------------------------------------------

@dataclass
class SignProbe:
    variant: Variant
    T: np.ndarray
    slice_min: np.ndarray
    slice_max: np.ndarray

    @property
    def sign_change_slices(self) -> np.ndarray:
        return self.T[(self.slice_min < 0) & (self.slice_max > 0)]

    @property
    def changes_sign(self) -> bool:
        return len(self.sign_change_slices) > 0

    @property
    def negative_anywhere(self) -> bool:
        return bool(np.any(self.slice_min < 0))


def remainder_sign_probe(fields, variant, policy: SeriesPolicy = DEFAULT_POLICY) -> SignProbe:
    """Extrema of T P_variant(U, Omega) on each slice.

    Only nodes that carry data (not the extrapolated rim of a transformed
    slice) and lie strictly inside the cone are probed.
    """
    variant = Variant.parse(variant)
    Ts, lo, hi = [], [], []
    for f in _sorted(fields):
        Om = f.Omega[:f.n_covered]
        inside = Om > 0
        U = f.U[:f.n_covered][inside]
        TP = f.T * np.asarray(conformal_remainder(U, Om[inside], variant, policy))
        Ts.append(f.T)
        lo.append(float(np.min(TP)))
        hi.append(float(np.max(TP)))
    return SignProbe(variant, np.array(Ts), np.array(lo), np.array(hi))


def measured_energy_law(fields, variant=Variant.MASSLESS, policy=DEFAULT_POLICY):
    """Finite-difference d_T e - div m against T P on consecutive slices.

    Returns (T, R, measured, predicted) for the middle slice of each
    triple, on nodes shared by all three slices.
    """
    fs = _sorted(fields)
    out = []
    for a, b, c in zip(fs[:-2], fs[1:-1], fs[2:]):
        n = min(len(a.U), len(b.U), len(c.U)) - 2
        if n < 3:
            continue
        ea = energy_density(a, variant, policy)[:n]
        ec = energy_density(c, variant, policy)[:n]
        dedT = (ea - ec) / (a.T - c.T)
        m = momentum_density(b)
        R = b.R
        Rm = R * m
        div = np.empty(n)
        div[1:] = (Rm[2:n + 1] - Rm[: n - 1]) / (2 * b.dR * R[1:n])
        div[0] = (Rm[1] - Rm[0]) / (2 * b.dR * R[0])
        pred = b.T * np.asarray(conformal_remainder(b.U[:n], b.Omega[:n], variant, policy))
        out.append((b.T, R[:n], dedT - div, pred))
    return out
