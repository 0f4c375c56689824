"""Statistical primitives for the corpus analyses.

Unlike the election model, everything here is binary floating point: the
inputs are metric ratios, not money. Sample (n-1) variance is used
throughout. Student-t tail probabilities go through the regularized
incomplete beta function.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np
from scipy import special

from .errors import (
    EmptyInput,
    LengthMismatch,
    RankDeficient,
    TooFewPoints,
    TooFewRows,
    ZeroVariance,
    ZeroVarianceDifferences,
)

__all__ = [
    "TestResult",
    "OlsFit",
    "LossSummary",
    "student_t_cdf",
    "pearson",
    "paired_t_test",
    "ols_fit",
    "summarize_losses",
]


@dataclass(frozen=True)
class TestResult:
    """A test statistic with its two-sided p-value and degrees of freedom."""

    statistic: float
    p_value: float
    df: float
    n: int


@dataclass(frozen=True)
class OlsFit:
    """An ordinary least squares fit (intercept first).

    ``relative_importance`` divides each coefficient by the total absolute
    magnitude of the non-intercept coefficients, keeping the sign.
    """

    coefficients: tuple[float, ...]
    r_squared: float
    p_values: tuple[float, ...]
    relative_importance: tuple[float, ...]
    n: int


@dataclass(frozen=True)
class LossSummary:
    """Distribution summary of per-instance losses for one metric cell."""

    pct_positive: Fraction
    mean: float
    mean_positive: Optional[float]
    mean_negative: Optional[float]
    n: int


def student_t_cdf(t: float, df: float) -> float:
    """CDF of Student's t distribution via the regularized incomplete beta."""
    if df <= 0:
        raise ValueError("degrees of freedom must be positive")
    t = float(t)
    if t == 0.0:
        return 0.5
    tail = 0.5 * float(special.betainc(df / 2.0, 0.5, df / (df + t * t)))
    return tail if t < 0 else 1.0 - tail


def _two_sided_p(t: float, df: float) -> float:
    if not np.isfinite(t):
        return 0.0
    # 2 * (1 - cdf(|t|)), evaluated directly in the beta tail for accuracy.
    return min(1.0, float(special.betainc(df / 2.0, 0.5, df / (df + t * t))))


def _paired_arrays(x: Sequence[float], y: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    ax = np.asarray(x, dtype=float)
    ay = np.asarray(y, dtype=float)
    if ax.ndim != 1 or ay.ndim != 1:
        raise ValueError("inputs must be one-dimensional")
    if len(ax) != len(ay):
        raise LengthMismatch(f"{len(ax)} vs {len(ay)} observations")
    return ax, ay


def pearson(x: Sequence[float], y: Sequence[float]) -> TestResult:
    """Pearson correlation with a two-sided significance test.

    The statistic is r; the p-value comes from t = r*sqrt(n-2)/sqrt(1-r^2)
    on n-2 degrees of freedom (p = 0 for perfectly linear data).
    """
    ax, ay = _paired_arrays(x, y)
    n = len(ax)
    if n < 3:
        raise TooFewPoints("pearson needs at least 3 points")
    xc = ax - ax.mean()
    yc = ay - ay.mean()
    sxx = float(xc @ xc)
    syy = float(yc @ yc)
    if sxx == 0.0 or syy == 0.0:
        raise ZeroVariance("pearson needs both inputs to vary")
    r = float(xc @ yc) / float(np.sqrt(sxx * syy))
    r = max(-1.0, min(1.0, r))
    df = n - 2
    if 1.0 - r * r <= 0.0:
        return TestResult(statistic=r, p_value=0.0, df=float(df), n=n)
    t = r * np.sqrt(df / (1.0 - r * r))
    return TestResult(statistic=r, p_value=_two_sided_p(float(t), df), df=float(df), n=n)


def paired_t_test(x: Sequence[float], y: Sequence[float]) -> TestResult:
    """Two-sided paired t-test of x against y."""
    ax, ay = _paired_arrays(x, y)
    n = len(ax)
    if n < 2:
        raise TooFewPoints("paired t-test needs at least 2 pairs")
    d = ax - ay
    sd = float(d.std(ddof=1))
    if sd == 0.0:
        raise ZeroVarianceDifferences("paired differences are constant")
    t = float(d.mean()) / (sd / np.sqrt(n))
    df = n - 1
    return TestResult(statistic=float(t), p_value=_two_sided_p(float(t), df), df=float(df), n=n)


def ols_fit(X: Sequence[Sequence[float]], y: Sequence[float]) -> OlsFit:
    """Least squares of y on the predictors plus an intercept column.

    Coefficients come from an SVD-backed solve; per-coefficient two-sided
    p-values use t = beta/se(beta) on n-k-1 degrees of freedom.
    """
    design_raw = np.asarray(X, dtype=float)
    if design_raw.ndim == 1:
        design_raw = design_raw.reshape(-1, 1)
    yv = np.asarray(y, dtype=float)
    n, k = design_raw.shape
    if len(yv) != n:
        raise LengthMismatch(f"{n} rows vs {len(yv)} responses")
    if n <= k + 1:
        raise TooFewRows(f"{n} rows cannot estimate {k + 1} coefficients")
    design = np.column_stack([np.ones(n), design_raw])
    if np.linalg.matrix_rank(design) < k + 1:
        raise RankDeficient("design matrix (with intercept) is rank deficient")
    beta, _, _, _ = np.linalg.lstsq(design, yv, rcond=None)
    residuals = yv - design @ beta
    sse = float(residuals @ residuals)
    centered = yv - yv.mean()
    sst = float(centered @ centered)
    if sst == 0.0:
        r_squared = 1.0 if np.isclose(sse, 0.0) else 0.0
    else:
        r_squared = 1.0 - sse / sst
    df = n - k - 1
    sigma2 = sse / df
    cov = sigma2 * np.linalg.inv(design.T @ design)
    se = np.sqrt(np.maximum(np.diag(cov), 0.0))
    p_values = []
    for b, s in zip(beta, se):
        if s == 0.0:
            p_values.append(0.0 if b != 0.0 else 1.0)
        else:
            p_values.append(_two_sided_p(float(b / s), df))
    slope_mass = float(np.sum(np.abs(beta[1:])))
    if slope_mass == 0.0:
        importance = [0.0] * len(beta)
    else:
        importance = [float(b) / slope_mass for b in beta]
    return OlsFit(
        coefficients=tuple(float(b) for b in beta),
        r_squared=float(r_squared),
        p_values=tuple(p_values),
        relative_importance=tuple(importance),
        n=n,
    )


def summarize_losses(values: Sequence[float]) -> LossSummary:
    """Share of positive losses plus overall/positive/negative means."""
    data = [float(v) for v in values]
    if not data:
        raise EmptyInput("loss summary needs at least one value")
    positive = [v for v in data if v > 0]
    negative = [v for v in data if v < 0]
    n = len(data)
    return LossSummary(
        pct_positive=Fraction(len(positive), n),
        mean=float(np.mean(data)),
        mean_positive=float(np.mean(positive)) if positive else None,
        mean_negative=float(np.mean(negative)) if negative else None,
        n=n,
    )
