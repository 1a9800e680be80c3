"""Bessel functions J_m of order m = (d-2)/2 and the remainder kernel K.

J is evaluated by its power series in extended precision for r <= 20 and by
the Hankel asymptotic expansion beyond, with as many correction terms as
keep decreasing (at least three).  For half-integer orders the Hankel
expansion terminates, so J has a closed form and K vanishes identically.
"""
from __future__ import annotations

import math

import numpy as np

SERIES_MAX_R = 20.0
_MAX_SERIES_TERMS = 120
_MAX_HANKEL_TERMS = 60


def bessel_order(d: int) -> float:
    return (d - 2) / 2.0


def _is_half_integer(m: float) -> bool:
    return abs(2 * m - round(2 * m)) < 1e-15 and round(2 * m) % 2 != 0


def bessel_series(m: float, r) -> np.ndarray:
    """sum_k (-1)^k (r/2)^{2k+m} / (k! Gamma(k+m+1)), summed in long double."""
    x = np.atleast_1d(np.asarray(r, dtype=np.longdouble))
    half = x / 2
    sq = half * half
    term = np.ones_like(x) / np.longdouble(math.gamma(m + 1))
    total = term.copy()
    for k in range(1, _MAX_SERIES_TERMS):
        term = -term * sq / (np.longdouble(k) * np.longdouble(k + m))
        total += term
        if np.all(np.abs(term) <= np.finfo(np.longdouble).eps * np.abs(total)):
            break
    with np.errstate(divide="ignore"):
        out = total * half**m
    return out.astype(np.float64)


def _hankel_coeffs(m: float) -> list[float]:
    """a_k(m) = prod_{j=1..k} (4m^2 - (2j-1)^2) / (k! 8^k)."""
    mu = 4 * m * m
    coeffs, a = [1.0], 1.0
    for k in range(1, _MAX_HANKEL_TERMS):
        a *= (mu - (2 * k - 1) ** 2) / (k * 8.0)
        coeffs.append(a)
    return coeffs


def bessel_asymptotic(m: float, r) -> np.ndarray:
    """Hankel expansion sqrt(2/(pi r)) (P cos chi - Q sin chi), chi = r - m pi/2 - pi/4."""
    x = np.atleast_1d(np.asarray(r, dtype=np.float64))
    coeffs = _hankel_coeffs(m)
    P = np.zeros_like(x)
    Q = np.zeros_like(x)
    prev = np.full_like(x, np.inf)
    active = np.ones(x.shape, dtype=bool)
    for k, a in enumerate(coeffs):
        term = a / x**k
        mag = np.abs(term)
        # stop each point once terms stop shrinking, but never before 3 corrections
        if k > 3:
            active &= mag < prev
        if not active.any() or a == 0.0:
            break
        sign = (-1) ** (k // 2)
        if k % 2 == 0:
            P += np.where(active, sign * term, 0.0)
        else:
            Q += np.where(active, sign * term, 0.0)
        prev = np.where(active, mag, prev)
    chi = x - m * np.pi / 2 - np.pi / 4
    return np.sqrt(2.0 / (np.pi * x)) * (P * np.cos(chi) - Q * np.sin(chi))


def leading_term(m: float, r) -> np.ndarray:
    x = np.asarray(r, dtype=np.float64)
    with np.errstate(divide="ignore"):
        return np.sqrt(2.0 / (np.pi * x)) * np.cos(x - m * np.pi / 2 - np.pi / 4)


def bessel_j(m: float, r) -> np.ndarray:
    x = np.asarray(r, dtype=np.float64)
    if _is_half_integer(m) and m < 0:
        # J_{-1/2}(r) = sqrt(2/(pi r)) cos r exactly
        return leading_term(m, x)
    flat = np.atleast_1d(x).ravel()
    out = np.empty_like(flat)
    small = flat <= SERIES_MAX_R
    if small.any():
        out[small] = bessel_series(m, flat[small])
    if (~small).any():
        out[~small] = bessel_asymptotic(m, flat[~small])
    return out.reshape(x.shape) if x.ndim else out[0]


def bessel_kernel(d: int, r):
    """(J(r), K(r)) with J = J_{(d-2)/2} and K = J - sqrt(2/(pi r)) cos(r - pi m/2 - pi/4)."""
    m = bessel_order(d)
    x = np.asarray(r, dtype=np.float64)
    if np.any(x < 0):
        raise ValueError("r must be nonnegative")
    J = bessel_j(m, x)
    if _is_half_integer(m) and m < 0:
        return J, np.zeros_like(J)
    with np.errstate(invalid="ignore"):
        K = J - leading_term(m, x)
    return J, K


def sqrt_weighted_j(d: int, z) -> np.ndarray:
    """sqrt(z) J(z), finite at z = 0 for every d >= 1."""
    m = bessel_order(d)
    z = np.asarray(z, dtype=np.float64)
    if _is_half_integer(m) and m < 0:
        return np.sqrt(2.0 / np.pi) * np.cos(z)
    with np.errstate(invalid="ignore"):
        return np.where(z > 0, np.sqrt(z) * bessel_j(m, np.maximum(z, 1e-300)), 0.0)


def sqrt_weighted_k(d: int, z) -> np.ndarray:
    """sqrt(z) K(z) = sqrt(z) J(z) - sqrt(2/pi) cos(z - phi), finite at z = 0."""
    m = bessel_order(d)
    z = np.asarray(z, dtype=np.float64)
    if _is_half_integer(m) and m < 0:
        return np.zeros_like(z)
    phase = m * np.pi / 2 + np.pi / 4
    return sqrt_weighted_j(d, z) - np.sqrt(2.0 / np.pi) * np.cos(z - phase)


def radial_limit(d: int, r) -> np.ndarray:
    """lim_{rho -> 0} rho^{-m} J_m(4 pi r rho) = (2 pi r)^m / Gamma(m + 1)."""
    m = bessel_order(d)
    return (2 * np.pi * np.asarray(r, dtype=np.float64)) ** m / math.gamma(m + 1)
