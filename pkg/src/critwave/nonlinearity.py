"""Cancellation-safe evaluation of the nonlinearity and related series.

Everything is built on the exponential tails

    S_m(x) = sum_{k>=0} x^k / (k+m)!  = (e^x - sum_{k<m} x^k/k!) / x^m

summed by Horner below the switch threshold and through expm1 above it.
All functions accept scalars or numpy arrays.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

SATURATION_EXPONENT = 700.0


class SaturationError(FloatingPointError):
    """Raised when an exponent would leave the double precision range."""


class Variant(enum.Enum):
    MASSLESS = "Massless"
    FULL_EXPONENTIAL = "FullExponential"
    MASSIVE_NO_CUBIC = "MassiveNoCubic"
    LINEAR = "Linear"

    @property
    def code(self) -> int:
        return _CODES[self]

    @classmethod
    def parse(cls, s) -> "Variant":
        if isinstance(s, cls):
            return s
        key = str(s).strip().lower().replace("_", "").replace("-", "")
        for v in cls:
            if v.value.lower() == key or v.name.lower().replace("_", "") == key:
                return v
        raise ValueError(f"unknown variant {s!r}")


_CODES = {
    Variant.LINEAR: 0,
    Variant.MASSLESS: 1,
    Variant.FULL_EXPONENTIAL: 2,
    Variant.MASSIVE_NO_CUBIC: 3,
}


@dataclass(frozen=True)
class SeriesPolicy:
    switch_threshold: float = 0.5
    taylor_terms: int = 30

    def __post_init__(self):
        if not (0 < self.switch_threshold <= 1):
            raise ValueError("switch_threshold must lie in (0, 1]")
        if int(self.taylor_terms) != self.taylor_terms or self.taylor_terms < 10:
            raise ValueError("taylor_terms must be an integer >= 10")

    def coefficients(self, m: int, x_max: float | None = None) -> np.ndarray:
        """Series coefficients of S_m, trimmed to what |x| <= x_max needs.

        ``taylor_terms`` is a cap; terms below 1e-18 relative are dropped,
        which halves the cost of the hot loops without changing results.
        """
        x_max = self.switch_threshold if x_max is None else x_max
        return tail_coefficients(m, _terms_needed(m, x_max, self.taylor_terms))


DEFAULT_POLICY = SeriesPolicy()


def _terms_needed(m, x_max, cap):
    lead = 1.0 / math.factorial(m)
    for k in range(1, cap):
        if x_max**k / math.factorial(k + m) < 1e-18 * lead:
            return k
    return cap


def tail_coefficients(m: int, terms: int) -> np.ndarray:
    return np.array([1.0 / math.factorial(k + m) for k in range(terms)])


def _horner(x, coeffs):
    s = np.full_like(x, coeffs[-1])
    for c in coeffs[-2::-1]:
        s = s * x + c
    return s


def _as_array(x):
    a = np.asarray(x, dtype=np.float64)
    return a, a.ndim == 0


def _out(a, scalar):
    return float(a) if scalar else a


def _check_exponent(x):
    if np.any(x > SATURATION_EXPONENT):
        raise SaturationError(f"exponent {np.max(x):.6g} exceeds {SATURATION_EXPONENT:g}")


def exp_tail(x, m: int, policy: SeriesPolicy = DEFAULT_POLICY, small=None):
    """S_m(x) for m in {1, 2, 3}.

    ``small`` selects the series path per entry; by default |x| <= threshold.
    """
    x, scalar = _as_array(x)
    _check_exponent(x)
    if small is None:
        small = np.abs(x) <= policy.switch_threshold
    small = np.broadcast_to(small, x.shape)
    out = np.empty_like(x)
    if np.any(small):
        out[small] = _horner(x[small], policy.coefficients(m))
    big = ~small
    if np.any(big):
        xb = x[big]
        em = np.expm1(xb)
        if m == 1:
            out[big] = em / xb
        elif m == 2:
            out[big] = (em - xb) / xb**2
        elif m == 3:
            out[big] = (em - xb - 0.5 * xb * xb) / xb**3
        else:
            raise ValueError("m must be 1, 2 or 3")
    return _out(out, scalar)


def _massless_N(u, policy):
    x = u * u
    _check_exponent(x)
    small = np.abs(u) <= policy.switch_threshold
    out = np.empty_like(u)
    if np.any(small):
        us, xs = u[small], x[small]
        out[small] = us * xs * xs * _horner(xs, policy.coefficients(2, policy.switch_threshold**2))
    big = ~small
    if np.any(big):
        ub, xb = u[big], x[big]
        out[big] = ub * (np.expm1(xb) - xb)
    return out


def eval_N(u, variant: Variant = Variant.MASSLESS, policy: SeriesPolicy = DEFAULT_POLICY):
    u, scalar = _as_array(u)
    variant = Variant.parse(variant)
    if variant is Variant.LINEAR:
        out = np.zeros_like(u)
    elif variant is Variant.FULL_EXPONENTIAL:
        x = u * u
        _check_exponent(x)
        out = u * np.exp(x)
    else:
        out = _massless_N(u, policy)
        if variant is Variant.MASSIVE_NO_CUBIC:
            out = out + u
    return _out(out, scalar)


def eval_potential_density(u, variant: Variant = Variant.MASSLESS,
                           policy: SeriesPolicy = DEFAULT_POLICY):
    """Density G with N = G'/2, so the energy carries 1/2 * integral of G."""
    u, scalar = _as_array(u)
    variant = Variant.parse(variant)
    x = u * u
    if variant is Variant.LINEAR:
        return _out(np.zeros_like(u), scalar)
    if variant is Variant.FULL_EXPONENTIAL:
        _check_exponent(x)
        return _out(np.expm1(x), scalar)
    small = np.abs(u) <= policy.switch_threshold
    out = x**3 * exp_tail(x, 3, policy, small=small)
    if variant is Variant.MASSIVE_NO_CUBIC:
        out = out + x
    return _out(out, scalar)


def conformal_nonlinearity(U, Omega, policy: SeriesPolicy = DEFAULT_POLICY):
    """Omega^-2 U (e^{Omega U^2} - 1 - Omega U^2) = U^5 S_2(Omega U^2).

    Analytic in Omega, so it is also used outside the cone where Omega < 0.
    """
    U, scalar = _as_array(U)
    Omega = np.broadcast_to(np.asarray(Omega, dtype=np.float64), U.shape)
    x = Omega * U * U
    s2 = exp_tail(x, 2, policy)
    U2 = U * U
    return _out(U * U2 * U2 * s2, scalar)


def conformal_potential(U, Omega, policy: SeriesPolicy = DEFAULT_POLICY):
    """Omega^-3 F(Omega U^2) with F(x) = e^x - 1 - x - x^2/2, i.e. U^6 S_3."""
    U, scalar = _as_array(U)
    x = np.asarray(Omega, dtype=np.float64) * U * U
    U2 = U * U
    return _out(U2**3 * exp_tail(x, 3, policy), scalar)


def eval_P(U, Omega, policy: SeriesPolicy = DEFAULT_POLICY):
    """Remainder P = U^8 sum_k (k+1) (Omega U^2)^k / (k+4)!  (>= 0)."""
    U, scalar = _as_array(U)
    Omega = np.broadcast_to(np.asarray(Omega, dtype=np.float64), U.shape)
    if np.any(Omega < 0):
        raise ValueError("eval_P needs Omega >= 0")
    U2 = U * U
    x = Omega * U2
    _check_exponent(x)
    small = x <= policy.switch_threshold
    out = np.empty_like(U)
    if np.any(small):
        xs = x[small]
        c = np.array([(k + 1) / math.factorial(k + 4) for k in range(policy.taylor_terms)])
        out[small] = (U2[small] * U2[small]) ** 2 * _horner(xs, c)
    big = ~small
    if np.any(big):
        xb, ob = x[big], Omega[big]
        em = np.expm1(xb)
        out[big] = (xb * (em - xb) - 3.0 * (em - xb - 0.5 * xb * xb)) / ob**4
    return _out(out, scalar)


def conformal_remainder(U, Omega, variant: Variant = Variant.MASSLESS,
                        policy: SeriesPolicy = DEFAULT_POLICY):
    """Source P_v in d_T e - div m = T P_v for each variant.

    A mass term u adds -2 Omega^-3 U^2, a cubic term u^3 adds
    -Omega^-2 U^4 / 2. Only the massless remainder has a sign.
    """
    variant = Variant.parse(variant)
    U, scalar = _as_array(U)
    Omega = np.broadcast_to(np.asarray(Omega, dtype=np.float64), U.shape)
    if variant is Variant.LINEAR:
        return _out(np.zeros_like(U), scalar)
    out = np.asarray(eval_P(U, Omega, policy), dtype=np.float64)
    if variant in (Variant.MASSIVE_NO_CUBIC, Variant.FULL_EXPONENTIAL):
        out = out - 2.0 * U * U / Omega**3
    if variant is Variant.FULL_EXPONENTIAL:
        out = out - 0.5 * U**4 / Omega**2
    return _out(out, scalar)


def eval_f(U, Vbar, Omega, policy: SeriesPolicy = DEFAULT_POLICY):
    """Comparison function of the weighted cone estimate.

    f = 3/2 sum_{k>=3} Omega^{k-3} (U^{2k} - V^{2k})/k!
        - 1/2 U (U - V) sum_{k>=2} Omega^{k-2} U^{2k}/k!

    summed as one series sum_j Omega^{j-3} b_j / j! with
    b_j = (3-j)/2 U^{2j} - 3/2 V^{2j} + j/2 U^{2j-1} V.
    For U V <= 0 every summand is <= 0, so the sign survives rounding.
    The series is scaled by M = max(|U|, |V|) and summed until the terms
    stop contributing; ``policy.taylor_terms`` is only the minimum length.
    """
    U, su = _as_array(U)
    V, sv = _as_array(Vbar)
    O, so = _as_array(Omega)
    U, V, O = np.broadcast_arrays(U, V, O)
    scalar = su and sv and so
    if np.any((O < 0) | (O > 1)):
        raise ValueError("eval_f needs Omega in [0, 1]")
    M = np.maximum(np.abs(U), np.abs(V))
    x = O * M * M
    _check_exponent(x)
    safe = np.where(M > 0, M, 1.0)
    a = U / safe
    b = V / safe
    M6 = M**6
    # j = 3 term, then ratio updates: term_j = M^6 x^{j-3} / j!
    term = M6 / 6.0
    a2, b2 = a * a, b * b
    a_pow = a2 * a2 * a2          # a^{2j}
    b_pow = b2 * b2 * b2
    a_odd = a2 * a2 * a           # a^{2j-1}
    total = np.zeros_like(U)
    j = 3
    n_max = max(policy.taylor_terms, int(np.max(x, initial=0.0) * 2.0) + 60)
    for _ in range(n_max):
        bj = (3 - j) * 0.5 * a_pow - 1.5 * b_pow + 0.5 * j * a_odd * b
        contrib = term * bj
        total = total + contrib
        if j >= 3 + policy.taylor_terms and np.all(np.abs(contrib) <= 1e-18 * np.abs(total)):
            break
        j += 1
        term = term * x / j
        a_pow = a_pow * a2
        b_pow = b_pow * b2
        a_odd = a_odd * a2
    total = np.where(M > 0, total, 0.0)
    return _out(total, scalar)


@dataclass(frozen=True)
class PointwiseBound:
    lhs: float
    rhs: float
    holds: bool

    def __iter__(self):
        return iter((self.lhs, self.rhs, self.holds))


def check_pointwise_bound(u: float, policy: SeriesPolicy = DEFAULT_POLICY) -> PointwiseBound:
    """|N(u)| against |u|^{40/9}(e^{u^2}-1) for |u| >= 1 and e|u|^5 below."""
    u = float(u)
    lhs = abs(eval_N(u, Variant.MASSLESS, policy))
    au = abs(u)
    if au >= 1.0:
        rhs = au ** (40.0 / 9.0) * math.expm1(u * u)
    else:
        rhs = math.e * au**5
    return PointwiseBound(lhs, rhs, lhs <= rhs)
