"""Chi-square independence testing built on the regularized incomplete
gamma function.

The survival probability of a chi-square statistic with ``df`` degrees of
freedom is Q(df/2, x/2), the regularized upper incomplete gamma function,
computed here by the classic series / continued-fraction pair to double
precision (absolute tolerance well below 1e-10).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

_MAX_ITER = 500
_EPS = 1e-15
_TINY = 1e-300


def _gamma_p_series(a: float, x: float) -> float:
    """Lower regularized gamma P(a, x) by series; converges for x < a + 1."""
    term = 1.0 / a
    total = term
    denom = a
    for _ in range(_MAX_ITER):
        denom += 1.0
        term *= x / denom
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))

def _gamma_q_contfrac(a: float, x: float) -> float:
    """Upper regularized gamma Q(a, x) by Lentz's continued fraction;
    converges for x >= a + 1."""
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER + 1):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return h * math.exp(-x + a * math.log(x) - math.lgamma(a))


def regularized_gamma_q(a: float, x: float) -> float:
    """Upper regularized incomplete gamma Q(a, x) = 1 - P(a, x)."""
    if a <= 0:
        raise ValueError("shape parameter must be positive")
    if x < 0:
        raise ValueError("x must be non-negative")
    if x == 0.0:
        return 1.0
    if x < a + 1.0:
        return max(0.0, min(1.0, 1.0 - _gamma_p_series(a, x)))
    return max(0.0, min(1.0, _gamma_q_contfrac(a, x)))


def regularized_gamma_p(a: float, x: float) -> float:
    """Lower regularized incomplete gamma P(a, x)."""
    if x == 0.0:
        return 0.0
    if x < a + 1.0:
        return max(0.0, min(1.0, _gamma_p_series(a, x)))
    return max(0.0, min(1.0, 1.0 - _gamma_q_contfrac(a, x)))


def chi2_sf(x: float, df: int = 1) -> float:
    """P(chi-square with ``df`` degrees of freedom >= x)."""
    if df <= 0:
        raise ValueError("degrees of freedom must be positive")
    if x <= 0:
        return 1.0
    return regularized_gamma_q(df / 2.0, x / 2.0)


@dataclass(frozen=True)
class Chi2Result:
    statistic: float
    p_value: float
    degenerate: bool  # a margin was constant; p defined as 1


def chi_square_2x2(a: int, b: int, c: int, d: int) -> Chi2Result:
    """Pearson chi-square (no continuity correction) for the 2x2 table
    [[a, b], [c, d]]; one degree of freedom.

    A zero row or column margin makes the test undefined; the result is
    then flagged degenerate with statistic 0 and p = 1.
    """
    if min(a, b, c, d) < 0:
        raise ValueError("cell counts must be non-negative")
    n = a + b + c + d
    row1, row2 = a + b, c + d
    col1, col2 = a + c, b + d
    if n == 0 or 0 in (row1, row2, col1, col2):
        return Chi2Result(statistic=0.0, p_value=1.0, degenerate=True)
    stat = n * (a * d - b * c) ** 2 / (row1 * row2 * col1 * col2)
    return Chi2Result(statistic=float(stat), p_value=chi2_sf(float(stat), 1),
                      degenerate=False)


def chi_square_columns(x, y) -> Chi2Result:
    """Chi-square for a binary feature column against the binary outcome.

    Non-binary codes are collapsed to zero / non-zero before tabulating.
    """
    import numpy as np

    xb = np.asarray(x) != 0
    yb = np.asarray(y) != 0
    a = int(np.sum(xb & yb))
    b = int(np.sum(xb & ~yb))
    c = int(np.sum(~xb & yb))
    d = int(np.sum(~xb & ~yb))
    return chi_square_2x2(a, b, c, d)
