# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled velocity-Verlet loops (physical and conformal frame).

Same arithmetic as critwave._purepy; status codes: 0 ok, 1 saturation.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, expm1, fabs

cnp.import_array()

cdef double SAT = 700.0


cdef inline double _horner(double x, const double[::1] c) noexcept nogil:
    cdef Py_ssize_t k = c.shape[0] - 1
    cdef double s = c[k]
    while k > 0:
        k -= 1
        s = s * x + c[k]
    return s


cdef inline int _nonlin(double u, int code, double thr, const double[::1] c,
                        double* out) noexcept nogil:
    cdef double x = u * u
    cdef double v
    if code == 0:
        out[0] = 0.0
        return 0
    if x > SAT:
        return 1
    if code == 2:
        out[0] = u * exp(x)
        return 0
    if fabs(u) <= thr:
        v = u * x * x * _horner(x, c)
    else:
        v = u * (expm1(x) - x)
    if code == 3:
        v = v + u
    out[0] = v
    return 0


cdef int _accel(const double[::1] u, double[::1] a, Py_ssize_t m, Py_ssize_t n,
                double dr, int code, double mass, double thr,
                const double[::1] c) noexcept nogil:
    cdef Py_ssize_t j
    cdef double up, um, uj, lap, nl = 0.0
    cdef double h2 = dr * dr
    for j in range(m):
        uj = u[j]
        up = u[j + 1] if j + 1 < n else 0.0
        um = u[j - 1] if j > 0 else 0.0
        lap = ((j + 1.0) * (up - uj) - j * (uj - um)) / ((j + 0.5) * h2)
        if _nonlin(uj, code, thr, c, &nl):
            return 1
        a[j] = lap - nl - mass * uj
    return 0


cdef int _verlet(double[::1] u, double[::1] w, double[::1] a, double dr, double dt,
                 long nsteps, Py_ssize_t m, Py_ssize_t n, int code, double mass,
                 double thr, const double[::1] c) noexcept nogil:
    cdef Py_ssize_t j
    cdef long s
    cdef double hdt = 0.5 * dt
    if _accel(u, a, m, n, dr, code, mass, thr, c):
        return 1
    for s in range(nsteps):
        for j in range(m):
            w[j] = w[j] + hdt * a[j]
            u[j] = u[j] + dt * w[j]
        if _accel(u, a, m, n, dr, code, mass, thr, c):
            return 1
        for j in range(m):
            w[j] = w[j] + hdt * a[j]
    return 0


def verlet_run(double[::1] u, double[::1] w, double dr, double dt, long nsteps,
               Py_ssize_t m, int code, double mass, double thr, const double[::1] coeffs):
    """Advance (u, w) in place by nsteps on the first m cells."""
    cdef Py_ssize_t n = u.shape[0]
    cdef int st
    if m > n:
        m = n
    cdef double[::1] a = np.zeros(n)
    with nogil:
        st = _verlet(u, w, a, dr, dt, nsteps, m, n, code, mass, thr, coeffs)
    return st


cdef int _accel_conf(const double[::1] U, double[::1] a, Py_ssize_t n, double dR,
                     double T, double thr, const double[::1] c) noexcept nogil:
    cdef Py_ssize_t j
    cdef double up, um, uj, lap, R, Om, x, U2, g
    cdef double h2 = dR * dR
    for j in range(n):
        uj = U[j]
        up = U[j + 1] if j + 1 < n else 0.0
        um = U[j - 1] if j > 0 else 0.0
        lap = ((j + 1.0) * (up - uj) - j * (uj - um)) / ((j + 0.5) * h2)
        R = (j + 0.5) * dR
        Om = T * T - R * R
        U2 = uj * uj
        x = Om * U2
        if x > SAT:
            return 1
        if fabs(x) <= thr:
            g = uj * U2 * U2 * _horner(x, c)
        else:
            g = uj * U2 * U2 * ((expm1(x) - x) / (x * x))
        a[j] = lap - g
    return 0


cdef int _verlet_conf(double[::1] U, double[::1] W, double[::1] a, double dR,
                      double T0, double dT, long nsteps, double thr,
                      const double[::1] c) noexcept nogil:
    cdef Py_ssize_t n = U.shape[0]
    cdef Py_ssize_t j
    cdef long s
    cdef double hdt = 0.5 * dT
    if _accel_conf(U, a, n, dR, T0, thr, c):
        return 1
    for s in range(nsteps):
        for j in range(n):
            W[j] = W[j] + hdt * a[j]
            U[j] = U[j] + dT * W[j]
        if _accel_conf(U, a, n, dR, T0 + (s + 1) * dT, thr, c):
            return 1
        for j in range(n):
            W[j] = W[j] + hdt * a[j]
    return 0


def conformal_run(double[::1] U, double[::1] W, double dR, double T0, double dT,
                  long nsteps, double thr, const double[::1] coeffs):
    """Verlet for U_TT - Lap U + U^5 S_2(Omega U^2) = 0, Omega = T^2 - R^2."""
    cdef int st
    cdef double[::1] a = np.zeros(U.shape[0])
    with nogil:
        st = _verlet_conf(U, W, a, dR, T0, dT, nsteps, thr, coeffs)
    return st
