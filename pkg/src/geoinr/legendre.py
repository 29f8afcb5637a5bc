"""Normalized associated Legendre functions.

Everything here uses the geodesy normalization

    N_l^m * P_l^m(x),   N_l^m = sqrt((2l+1)/(4*pi) * (l-m)!/(l+m)!)

without the Condon-Shortley phase, so that degree/order (0, 0) equals
1/(2*sqrt(pi)) and all diagonal terms P~_m^m are positive.

Two evaluation paths are provided. :func:`assoc_legendre` folds the
normalization into a three-term recurrence and never forms a factorial,
which keeps every value in range far beyond degree 200.
:func:`assoc_legendre_naive` is the textbook factorial closed form; it is
retained for the encoder benchmark and for low-degree cross-checks. In
single precision (its default) the factorials overflow near degree 30,
which is exactly the failure mode the stable recurrence exists to avoid.
"""

from __future__ import annotations

import math

import numpy as np


def _check_domain(l: int, m: int) -> None:
    if l < 0 or m < 0 or m > l:
        raise ValueError(f"require 0 <= m <= l, got l={l!r}, m={m!r}")


def assoc_legendre(l: int, m: int, x: float) -> float:
    """Normalized P~_l^m(x) via the normalization-folded recurrence.

    Finite for all l up to (at least) 200; raises on m > l or |x| > 1.
    """
    _check_domain(l, m)
    if abs(x) > 1.0:
        raise ValueError(f"argument must lie in [-1, 1], got {x!r}")
    table = normalized_legendre_table(l, np.asarray(float(x)))
    return float(table[l, m])


def normalized_legendre_table(lmax: int, x: np.ndarray) -> np.ndarray:
    """All normalized P~_l^m(x) for 0 <= m <= l <= lmax.

    Returns an array of shape (lmax+1, lmax+1) + x.shape with entry [l, m];
    entries with m > l are zero. The recurrences are

        P~_m^m     = sqrt((2m+1)/(2m)) * s * P~_{m-1}^{m-1},  s = sqrt(1-x^2)
        P~_{m+1}^m = a_{m+1,m} * x * P~_m^m
        P~_l^m     = a_{l,m} * x * P~_{l-1}^m - b_{l,m} * P~_{l-2}^m

    with a_{l,m} = sqrt((4l^2-1)/(l^2-m^2)) and
    b_{l,m} = sqrt((2l+1)((l-1)^2-m^2) / ((2l-3)(l^2-m^2))).
    """
    if lmax < 0:
        raise ValueError(f"maximum degree must be nonnegative, got {lmax!r}")
    x = np.asarray(x, dtype=float)
    out = np.zeros((lmax + 1, lmax + 1) + x.shape)
    s = np.sqrt(np.maximum(0.0, 1.0 - x * x))
    pmm = np.full_like(x, 1.0 / math.sqrt(4.0 * math.pi))
    for m in range(lmax + 1):
        if m > 0:
            pmm = pmm * s * math.sqrt((2.0 * m + 1.0) / (2.0 * m))
        out[m, m] = pmm
        p_prev, p_cur = np.zeros_like(x), pmm
        for l in range(m + 1, lmax + 1):
            a = math.sqrt((4.0 * l * l - 1.0) / (l * l - m * m))
            if l == m + 1:
                val = a * x * p_cur
            else:
                b = math.sqrt(
                    (2.0 * l + 1.0) * ((l - 1.0) ** 2 - m * m)
                    / ((2.0 * l - 3.0) * (l * l - m * m))
                )
                val = a * x * p_cur - b * p_prev
            out[l, m] = val
            p_prev, p_cur = p_cur, val
    return out


def assoc_legendre_naive(l: int, m: int, x, dtype=np.float32):
    """Factorial closed form of the normalized P~_l^m, in a fixed precision.

    Evaluates

        sqrt((2l+1)/(4*pi) * (l-m)!/(l+m)!)
        * 2^-l * (1-x^2)^(m/2)
        * sum_k (-1)^k (2l-2k)! / (k! (l-k)! (l-m-2k)!) * x^(l-m-2k)

    with every factorial cast to ``dtype`` before use. In the default
    float32 the factorials overflow around degree 30 and the result goes
    non-finite; float64 pushes the failure out past degree 150 and serves
    as a low-degree reference. Overflow is deliberate - do not guard it.
    """
    _check_domain(l, m)
    x = np.asarray(x, dtype=dtype)
    one = dtype(1.0)
    with np.errstate(over="ignore", invalid="ignore"):
        norm = np.sqrt(
            dtype(2 * l + 1)
            / (dtype(4) * dtype(math.pi))
            * dtype(math.factorial(l - m))
            / dtype(math.factorial(l + m))
        )
        total = np.zeros_like(x)
        for k in range((l - m) // 2 + 1):
            coeff = (
                dtype((-1.0) ** k)
                * dtype(math.factorial(2 * l - 2 * k))
                / (
                    dtype(math.factorial(k))
                    * dtype(math.factorial(l - k))
                    * dtype(math.factorial(l - m - 2 * k))
                )
            )
            total = total + coeff * x ** dtype(l - m - 2 * k)
        prefactor = dtype(2.0) ** dtype(-l) * (one - x * x) ** (dtype(m) / dtype(2))
        result = norm * prefactor * total
    if result.ndim == 0:
        return dtype(result)
    return result
