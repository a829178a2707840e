"""numpy fallback with the same entry points as the compiled kernels."""

import numpy as np

SAT = 700.0


def _horner(x, c):
    s = np.full_like(x, c[-1])
    for ck in c[-2::-1]:
        s = s * x + ck
    return s


def _lap(u, m, n, dr):
    j = np.arange(m, dtype=np.float64)
    uj = u[:m]
    up = np.empty(m)
    up[: m - 1] = u[1:m]
    up[m - 1] = u[m] if m < n else 0.0
    um = np.empty(m)
    um[0] = 0.0
    um[1:] = u[: m - 1]
    return ((j + 1.0) * (up - uj) - j * (uj - um)) / ((j + 0.5) * (dr * dr))


def _nonlin(u, code, thr, c):
    if code == 0:
        return np.zeros_like(u), False
    x = u * u
    if x.size and np.max(x) > SAT:
        return None, True
    if code == 2:
        return u * np.exp(x), False
    small = np.abs(u) <= thr
    v = np.empty_like(u)
    v[small] = u[small] * x[small] * x[small] * _horner(x[small], c)
    big = ~small
    v[big] = u[big] * (np.expm1(x[big]) - x[big])
    if code == 3:
        v = v + u
    return v, False


def _accel(u, m, n, dr, code, mass, thr, c):
    nl, sat = _nonlin(u[:m], code, thr, c)
    if sat:
        return None
    return _lap(u, m, n, dr) - nl - mass * u[:m]


def verlet_run(u, w, dr, dt, nsteps, m, code, mass, thr, coeffs):
    n = u.shape[0]
    m = min(int(m), n)
    if m == 0:
        return 0
    hdt = 0.5 * dt
    a = _accel(u, m, n, dr, code, mass, thr, coeffs)
    if a is None:
        return 1
    uv, wv = u[:m], w[:m]
    for _ in range(int(nsteps)):
        wv += hdt * a
        uv += dt * wv
        a = _accel(u, m, n, dr, code, mass, thr, coeffs)
        if a is None:
            return 1
        wv += hdt * a
    return 0


def _accel_conf(U, R, dR, T, thr, c):
    n = U.shape[0]
    Om = T * T - R * R
    U2 = U * U
    x = Om * U2
    if np.max(x) > SAT:
        return None
    small = np.abs(x) <= thr
    s2 = np.empty_like(U)
    s2[small] = _horner(x[small], c)
    xb = x[~small]
    s2[~small] = (np.expm1(xb) - xb) / (xb * xb)
    return _lap(U, n, n, dR) - U * U2 * U2 * s2


def conformal_run(U, W, dR, T0, dT, nsteps, thr, coeffs):
    n = U.shape[0]
    R = (np.arange(n) + 0.5) * dR
    hdt = 0.5 * dT
    a = _accel_conf(U, R, dR, T0, thr, coeffs)
    if a is None:
        return 1
    for s in range(int(nsteps)):
        W += hdt * a
        U += dT * W
        a = _accel_conf(U, R, dR, T0 + (s + 1) * dT, thr, coeffs)
        if a is None:
            return 1
        W += hdt * a
    return 0
