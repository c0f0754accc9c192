"""Group-comparison statistics: absolute standardized differences, Welch t, Pearson chi-square.

Test statistics and degrees of freedom are computed here; tail probabilities
come from scipy's Student-t and chi-square survival functions.
"""
from __future__ import annotations

import math
from typing import Sequence

from scipy import stats as _dist

IMBALANCE_THRESHOLD = 10.0


class UndefinedStatistic(ValueError):
    """The statistic has a zero denominator for these inputs."""


def asd_binary(p1: float, p2: float) -> float:
    """Absolute standardized difference of two proportions, in percent."""
    for p in (p1, p2):
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"proportion {p} outside [0, 1]")
    var = (p1 * (1 - p1) + p2 * (1 - p2)) / 2
    if var <= 0.0:
        if p1 == p2:
            raise UndefinedStatistic("both proportions are 0 or both are 1")
        raise UndefinedStatistic("zero pooled variance")
    return abs(p1 - p2) / math.sqrt(var) * 100.0


def asd_continuous(m1: float, s1: float, m2: float, s2: float) -> float:
    """Absolute standardized difference of two means, in percent."""
    if s1 < 0 or s2 < 0:
        raise ValueError("standard deviations must be non-negative")
    if s1 == 0 and s2 == 0:
        raise UndefinedStatistic("both standard deviations are zero")
    return abs(m1 - m2) / math.sqrt((s1 * s1 + s2 * s2) / 2) * 100.0


def welch_t_test(m1, s1, n1, m2, s2, n2, *, equal_var: bool = False) -> tuple[float, float, float]:
    """Two-sided two-sample t test from summary statistics.

    Returns ``(t, df, p)``. With ``equal_var=True`` the pooled-variance form
    (df = n1 + n2 - 2) is used instead of Welch-Satterthwaite.
    """
    if n1 < 2 or n2 < 2:
        raise ValueError("each group needs at least two observations")
    if s1 < 0 or s2 < 0:
        raise ValueError("standard deviations must be non-negative")
    if s1 == 0 and s2 == 0:
        raise UndefinedStatistic("both groups have zero variance")
    v1, v2 = s1 * s1 / n1, s2 * s2 / n2
    if equal_var:
        df = n1 + n2 - 2
        pooled = ((n1 - 1) * s1 * s1 + (n2 - 1) * s2 * s2) / df
        se = math.sqrt(pooled * (1 / n1 + 1 / n2))
    else:
        se = math.sqrt(v1 + v2)
        df = (v1 + v2) ** 2 / (v1 * v1 / (n1 - 1) + v2 * v2 / (n2 - 1))
    t = (m1 - m2) / se
    p = float(2.0 * _dist.t.sf(abs(t), df))
    return t, float(df), min(p, 1.0)


def chi_square_test(table: Sequence[Sequence[float]]) -> tuple[float, int, float]:
    """Pearson chi-square test of independence on an r x c table of counts."""
    rows = [list(map(float, r)) for r in table]
    if len(rows) < 2 or any(len(r) != len(rows[0]) for r in rows) or len(rows[0]) < 2:
        raise ValueError("need a rectangular table with at least 2 rows and 2 columns")
    if any(x < 0 for r in rows for x in r):
        raise ValueError("counts must be non-negative")
    row_sums = [sum(r) for r in rows]
    col_sums = [sum(c) for c in zip(*rows)]
    if any(s == 0 for s in row_sums) or any(s == 0 for s in col_sums):
        raise UndefinedStatistic("table has an all-zero row or column")
    total = sum(row_sums)
    chi2 = 0.0
    for r, rs in zip(rows, row_sums):
        for x, cs in zip(r, col_sums):
            expected = rs * cs / total
            chi2 += (x - expected) ** 2 / expected
    df = (len(rows) - 1) * (len(col_sums) - 1)
    return chi2, df, float(_dist.chi2.sf(chi2, df))


def format_p(p: float | None) -> str:
    """Four significant digits, floored at ``<0.0001``."""
    if p is None or (isinstance(p, float) and math.isnan(p)):
        return "NA"
    if p < 0.0001:
        return "<0.0001"
    return f"{p:.4g}"
