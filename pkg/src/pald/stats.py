"""Correlation and hypothesis-testing toolbox.

Conventions pinned here (and relied on by downstream reports):
  - Spearman uses average ranks for ties and a Student-t approximation for
    significance at the 5% level.
  - Wilcoxon drops zero differences, enumerates the exact null for n <= 12
    and uses a tie-corrected normal approximation with continuity correction
    above.
  - Anderson-Darling is the both-parameters-estimated case with the
    small-sample correction A*^2 = A^2 (1 + 0.75/n + 2.25/n^2) against the
    published 5% critical value 0.752.
  - Bonferroni rejects on p <= alpha/m (inclusive).
Student and normal CDFs come from scipy.special (regularized incomplete
beta / erf), accurate well below 1e-10 absolute error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import betainc, log_ndtr, ndtr

AD_CRITICAL_5PCT = 0.752  # case 3 (mean and variance estimated), 5% level


def _student_sf_two_sided(t: float, df: int) -> float:
    """Two-sided tail probability of Student's t."""
    if df < 1:
        raise ValueError("df must be >= 1")
    if math.isinf(t):
        return 0.0
    return float(betainc(df / 2.0, 0.5, df / (df + t * t)))


def rank_average(x) -> np.ndarray:
    """Ranks 1..n with ties replaced by their average rank."""
    x = np.asarray(x, dtype=np.float64)
    order = np.argsort(x, kind="stable")
    ranks = np.empty(x.size, dtype=np.float64)
    sx = x[order]
    base = np.arange(1, x.size + 1, dtype=np.float64)
    i = 0
    while i < x.size:
        j = i
        while j + 1 < x.size and sx[j + 1] == sx[i]:
            j += 1
        ranks[order[i : j + 1]] = base[i : j + 1].mean()
        i = j + 1
    return ranks


def pearson(x, y) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.size != y.size or x.size < 3:
        raise ValueError("pearson needs two equal-length vectors, n >= 3")
    xc = x - x.mean()
    yc = y - y.mean()
    vx = float(xc @ xc)
    vy = float(yc @ yc)
    if vx == 0.0 or vy == 0.0:
        raise ValueError("degenerate variance in pearson input")
    return float(xc @ yc) / math.sqrt(vx * vy)


def spearman(x, y) -> float:
    """Rank correlation: pearson of average ranks."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.size != y.size or x.size < 3:
        raise ValueError("spearman needs two equal-length vectors, n >= 3")
    rx = rank_average(x)
    ry = rank_average(y)
    if np.all(rx == rx[0]) or np.all(ry == ry[0]):
        raise ValueError("all-tied vector has no rank correlation")
    return pearson(rx, ry)


@dataclass(frozen=True)
class CorrelationTest:
    statistic: float
    p_value: float
    significant: bool


def spearman_test(x, y, alpha: float = 0.05) -> CorrelationTest:
    """Spearman rho with t-approximation significance at level alpha."""
    rho = spearman(x, y)
    n = np.asarray(x).size
    if abs(rho) >= 1.0:
        p = 0.0
    else:
        t = rho * math.sqrt((n - 2) / (1.0 - rho * rho))
        p = _student_sf_two_sided(t, n - 2)
    return CorrelationTest(statistic=rho, p_value=p, significant=p < alpha)


def paired_t(x, y) -> tuple[float, float]:
    """Classic paired t-test; returns (t, two-sided p)."""
    d = np.asarray(x, dtype=np.float64) - np.asarray(y, dtype=np.float64)
    n = d.size
    if n < 2:
        raise ValueError("paired_t needs n >= 2 pairs")
    sd = d.std(ddof=1)
    if sd == 0.0:
        raise ValueError("zero-variance differences in paired_t")
    t = d.mean() / (sd / math.sqrt(n))
    return float(t), _student_sf_two_sided(t, n - 1)


def wilcoxon_signed_rank(x, y) -> tuple[float, float]:
    """Signed-rank test on paired data; returns (W = min(W+, W-), two-sided p).

    Zero differences are dropped.  Exact sign-assignment enumeration for
    n <= 12 nonzero pairs; otherwise normal approximation with tie-corrected
    variance and continuity correction.
    """
    d = np.asarray(x, dtype=np.float64) - np.asarray(y, dtype=np.float64)
    d = d[d != 0.0]
    n = d.size
    if n < 1:
        raise ValueError("all differences are zero")
    ranks = rank_average(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    w_minus = float(ranks[d < 0].sum())
    w = min(w_plus, w_minus)
    if n <= 12:
        masks = (np.arange(2 ** n)[:, None] >> np.arange(n)) & 1
        w_all = masks @ ranks
        p_low = np.mean(w_all <= w_plus)
        p_high = np.mean(w_all >= w_plus)
        p = min(1.0, 2.0 * min(p_low, p_high))
    else:
        mu = n * (n + 1) / 4.0
        _, counts = np.unique(ranks, return_counts=True)
        tie_term = float(np.sum(counts ** 3 - counts)) / 48.0
        sigma = math.sqrt(n * (n + 1) * (2 * n + 1) / 24.0 - tie_term)
        z = (w - mu + 0.5) / sigma  # w <= mu, so the correction moves toward 0
        p = min(1.0, 2.0 * float(ndtr(z)))
    return w, p


def anderson_darling_normality(x, alpha: float = 0.05) -> tuple[float, bool]:
    """Case-3 Anderson-Darling normality test; returns (A*^2, reject at 5%)."""
    x = np.asarray(x, dtype=np.float64)
    n = x.size
    if n < 8:
        raise ValueError("anderson_darling needs n >= 8")
    sd = x.std(ddof=1)
    if sd == 0.0:
        raise ValueError("degenerate sample")
    y = np.sort((x - x.mean()) / sd)
    i = np.arange(1, n + 1, dtype=np.float64)
    log_cdf = log_ndtr(y)
    log_sf = log_ndtr(-y)
    a2 = -n - np.mean((2 * i - 1) * (log_cdf + log_sf[::-1]))
    a2_star = a2 * (1.0 + 0.75 / n + 2.25 / (n * n))
    if alpha != 0.05:
        raise ValueError("only the tabulated 5% level is supported")
    return float(a2_star), bool(a2_star > AD_CRITICAL_5PCT)


def fdr_bh(p_values, q: float = 0.05) -> np.ndarray:
    """Benjamini-Hochberg step-up; returns a boolean rejection mask."""
    p = np.asarray(p_values, dtype=np.float64)
    if np.any((p < 0) | (p > 1)):
        raise ValueError("p-values must lie in [0, 1]")
    m = p.size
    reject = np.zeros(m, dtype=bool)
    if m == 0:
        return reject
    order = np.argsort(p, kind="stable")
    thresh = q * np.arange(1, m + 1) / m
    passing = np.nonzero(p[order] <= thresh)[0]
    if passing.size:
        reject[order[: passing[-1] + 1]] = True
    return reject


def bonferroni(p_values, alpha: float = 0.05) -> np.ndarray:
    """Family-wise correction; rejects p <= alpha/m (inclusive)."""
    p = np.asarray(p_values, dtype=np.float64)
    if np.any((p < 0) | (p > 1)):
        raise ValueError("p-values must lie in [0, 1]")
    return p <= alpha / max(p.size, 1)
