"""Quantiles of the F distribution.

The inverse CDF is expressed through the inverse regularized incomplete
beta function: if ``X ~ F(d1, d2)`` then ``d1 X / (d1 X + d2)`` follows
``Beta(d1/2, d2/2)``.
"""

import numpy as np
from scipy import special


def f_ppf(q, dfn, dfd):
    """Return the ``q`` quantile of ``F(dfn, dfd)``.

    Both the beta quantile ``b`` and its complement ``1 - b`` are obtained
    from separate inverse-beta calls, so the ratio ``b / (1 - b)`` keeps full
    relative accuracy in the upper tail that tests care about.
    """
    q = float(q)
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"q must lie in [0, 1], got {q}")
    if dfn <= 0 or dfd <= 0:
        raise ValueError("degrees of freedom must be positive")
    if q == 0.0:
        return 0.0
    if q == 1.0:
        return np.inf
    a, b = 0.5 * dfn, 0.5 * dfd
    if q <= 0.5:
        x = special.betaincinv(a, b, q)
        comp = 1.0 - x
    else:
        comp = special.betaincinv(b, a, 1.0 - q)
        x = 1.0 - comp
    return float(dfd / dfn * x / comp)


def f_sf(x, dfn, dfd):
    """Survival function ``P(F > x)`` of ``F(dfn, dfd)``."""
    if x <= 0:
        return 1.0
    z = dfd / (dfd + dfn * x)
    return float(special.betainc(0.5 * dfd, 0.5 * dfn, z))


def ar_threshold(alpha, n, m, df_convention="m_then_nm"):
    """Critical value of the Anderson-Rubin test at level ``alpha``.

    ``m_then_nm`` uses ``F(m, n - m)``, the exact null law of the statistic
    under Gaussian errors. ``nm_then_m`` swaps the degrees of freedom.
    """
    if df_convention == "m_then_nm":
        return f_ppf(1.0 - alpha, m, n - m)
    if df_convention == "nm_then_m":
        return f_ppf(1.0 - alpha, n - m, m)
    raise ValueError(f"unknown df_convention {df_convention!r}")
