"""Confidence intervals and allowances used across the estimators."""

from __future__ import annotations

import math

import numpy as np
from scipy import special
from scipy import stats as _st

__all__ = ["LEVEL", "clopper_pearson", "normal_ci", "ks_allowance", "THREE_SIGMA_P"]

LEVEL = 0.99
# two-sided tail probability of a 3-sigma normal deviation
THREE_SIGMA_P = 2.0 * _st.norm.sf(3.0)


def clopper_pearson(k, n, level: float = LEVEL):
    """Exact binomial interval for ``k`` successes in ``n`` trials (vectorised)."""
    k = np.asarray(k, dtype=float)
    n = np.asarray(n, dtype=float)
    tail = 0.5 * (1.0 - level)
    with np.errstate(invalid="ignore"):
        lo = np.where(k > 0, _st.beta.ppf(tail, k, n - k + 1), 0.0)
        hi = np.where(k < n, _st.beta.ppf(1.0 - tail, k + 1, n - k), 1.0)
    return lo, hi


def normal_ci(mean: float, se: float, level: float = LEVEL) -> tuple[float, float]:
    z = float(_st.norm.ppf(0.5 + 0.5 * level))
    return mean - z * se, mean + z * se


def ks_allowance(n: int, m: int) -> float:
    """Two-sample Kolmogorov-Smirnov distance exceeded with 3-sigma probability."""
    return float(special.kolmogi(THREE_SIGMA_P)) * math.sqrt((n + m) / (n * m))
