from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class FittedConstant:
    """Constant C in lhs <= C * rhs: worst observed ratio plus a log-space fit."""

    max_ratio: float
    log_fit: float
    residual: float
    samples: int


def fit_constant(lhs, rhs) -> FittedConstant:
    """
    Fit lhs ~ C * rhs on the pairs with both sides positive.
    log_fit is exp(mean(log lhs - log rhs)); residual is the spread of that log gap.
    """
    lhs = np.asarray(lhs, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    keep = (lhs > 0) & (rhs > 0)
    if not keep.any():
        return FittedConstant(0.0, 0.0, 0.0, 0)
    gap = np.log(lhs[keep]) - np.log(rhs[keep])
    return FittedConstant(
        max_ratio=float(np.max(np.exp(gap))),
        log_fit=float(np.exp(np.mean(gap))),
        residual=float(np.std(gap)),
        samples=int(keep.sum()),
    )


def linear_fit(x, y):
    """Least-squares line y = slope * x + intercept; returns (slope, intercept, rms residual)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    finite = np.isfinite(x) & np.isfinite(y)
    x, y = x[finite], y[finite]
    if y.size == 0:
        return 0.0, 0.0, 0.0
    if y.size < 2 or np.ptp(x) == 0:
        return 0.0, float(np.mean(y)), float(np.std(y))
    A = np.column_stack((x, np.ones_like(x)))
    (slope, intercept), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - (slope * x + intercept)
    return float(slope), float(intercept), float(np.sqrt(np.mean(resid ** 2)))


def spread(values) -> float:
    """max / min of the positive values; 1 when fewer than two."""
    v = np.asarray([x for x in values if x > 0], dtype=float)
    if v.size < 2:
        return 1.0
    return float(v.max() / v.min())
