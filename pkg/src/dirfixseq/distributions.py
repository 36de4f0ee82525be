"""Location families used for the test statistics.

Every family here is a location shift of a symmetric base distribution,
``F_theta(x) = F_0(x - theta)``.  All functions broadcast over numpy arrays
and return plain floats for scalar input.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy import special

from dirfixseq._validation import check_probability

__all__ = [
    "DistributionFamily",
    "CriticalPair",
    "MLRViolation",
    "MLRReport",
    "cdf",
    "sf",
    "logcdf",
    "logsf",
    "quantile",
    "isf",
    "two_sided_pvalue",
    "critical_pair",
    "mlr_grid_check",
]


class DistributionFamily(str, enum.Enum):
    NORMAL = "normal"
    CAUCHY = "cauchy"

    @classmethod
    def coerce(cls, value: "DistributionFamily | str") -> "DistributionFamily":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            names = ", ".join(m.value for m in cls)
            raise ValueError(f"unknown family {value!r}; expected one of {names}") from None


def _scalarize(out):
    if isinstance(out, np.ndarray) and out.ndim == 0:
        return float(out)
    return out


# Cauchy pieces.  Outside [-1, 1] the arctan of the reciprocal keeps full
# relative precision in the tails.
def _cauchy_cdf0(z):
    z = np.asarray(z, dtype=float)
    with np.errstate(divide="ignore", over="ignore"):
        inv = np.arctan(1.0 / z) / np.pi
    mid = 0.5 + np.arctan(z) / np.pi
    return np.where(z < -1.0, -inv, np.where(z > 1.0, 1.0 - inv, mid))


def _cauchy_quantile0(u):
    u = np.asarray(u, dtype=float)
    with np.errstate(divide="ignore"):
        lower = -1.0 / np.tan(np.pi * u)
        upper = 1.0 / np.tan(np.pi * (1.0 - u))
    mid = np.tan(np.pi * (u - 0.5))
    return np.where(u < 0.25, lower, np.where(u > 0.75, upper, mid))


def _base_cdf(family: DistributionFamily, z):
    if family is DistributionFamily.NORMAL:
        return special.ndtr(z)
    return _cauchy_cdf0(z)


def _base_quantile(family: DistributionFamily, u):
    if family is DistributionFamily.NORMAL:
        return special.ndtri(u)
    return _cauchy_quantile0(u)


def cdf(family, theta, x):
    """``F_theta(x) = F_0(x - theta)``."""
    family = DistributionFamily.coerce(family)
    z = np.asarray(x, dtype=float) - np.asarray(theta, dtype=float)
    return _scalarize(_base_cdf(family, z))


def sf(family, theta, x):
    """Survival function ``1 - F_theta(x)``, computed without cancellation."""
    family = DistributionFamily.coerce(family)
    z = np.asarray(x, dtype=float) - np.asarray(theta, dtype=float)
    return _scalarize(_base_cdf(family, -z))


def logcdf(family, theta, x):
    family = DistributionFamily.coerce(family)
    z = np.asarray(x, dtype=float) - np.asarray(theta, dtype=float)
    if family is DistributionFamily.NORMAL:
        return _scalarize(special.log_ndtr(z))
    return _scalarize(np.log(_cauchy_cdf0(z)))


def logsf(family, theta, x):
    family = DistributionFamily.coerce(family)
    z = np.asarray(x, dtype=float) - np.asarray(theta, dtype=float)
    if family is DistributionFamily.NORMAL:
        return _scalarize(special.log_ndtr(-z))
    return _scalarize(np.log(_cauchy_cdf0(-z)))


def quantile(family, u):
    """Inverse of the standard (``theta = 0``) CDF.

    Raises
    ------
    ValueError
        If any ``u`` lies outside the open interval (0, 1).
    """
    family = DistributionFamily.coerce(family)
    u = check_probability(u, "u", open_right=True)
    return _scalarize(_base_quantile(family, u))


def isf(family, u):
    """Upper quantile: the ``x`` with ``1 - F_0(x) = u``."""
    family = DistributionFamily.coerce(family)
    u = check_probability(u, "u", open_right=True)
    return _scalarize(-_base_quantile(family, u))


def two_sided_pvalue(family, t):
    """``2 * min(F_0(t), 1 - F_0(t))``.

    Evaluated as ``2 * F_0(-|t|)`` so that ``p(t) == p(-t)`` bit for bit.
    """
    family = DistributionFamily.coerce(family)
    t = np.asarray(t, dtype=float)
    return _scalarize(2.0 * _base_cdf(family, -np.abs(t)))


@dataclass(frozen=True)
class CriticalPair:
    c1: float
    c2: float
    alpha: float

    def rejects(self, t) -> np.ndarray | bool:
        t = np.asarray(t, dtype=float)
        out = (t <= self.c1) | (t >= self.c2)
        return bool(out) if out.ndim == 0 else out


def critical_pair(family, alpha: float) -> CriticalPair:
    """Lower and upper critical values of the level-``alpha`` two-sided test."""
    family = DistributionFamily.coerce(family)
    alpha = float(check_probability(alpha, "alpha", open_right=True))
    c2 = float(-_base_quantile(family, alpha / 2.0))
    return CriticalPair(c1=-c2, c2=c2, alpha=alpha)


class MLRViolation(NamedTuple):
    delta1: float
    delta2: float
    x1: float
    x2: float
    inequality: str  # "cdf" or "sf"
    lhs: float
    rhs: float


@dataclass
class MLRReport:
    family: DistributionFamily
    violations: list[MLRViolation] = field(default_factory=list)
    n_checked: int = 0

    @property
    def passed(self) -> bool:
        return not self.violations


def _check_grid(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1 or not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be a 1-d sequence of finite numbers")
    if np.any(np.diff(arr) < 0):
        raise ValueError(f"{name} must be sorted ascending")
    if np.unique(arr).size < 2:
        raise ValueError(f"{name} needs at least two distinct values")
    return arr


def mlr_grid_check(family, deltas, xs, rel_slack: float = 1e-10) -> MLRReport:
    """Check the CDF-ratio consequences of monotone likelihood ratio on a grid.

    For every ``delta1 < delta2`` and ``x1 < x2`` this tests

        F_d1(x2) / F_d1(x1) <= F_d2(x2) / F_d2(x1)
        S_d1(x2) / S_d1(x1) <= S_d2(x2) / S_d2(x1)      (S = 1 - F)

    Comparisons are made between log-ratios, so ``rel_slack`` is applied as
    an additive tolerance on the log scale.
    """
    family = DistributionFamily.coerce(family)
    deltas = _check_grid(deltas, "deltas")
    xs = _check_grid(xs, "xs")
    report = MLRReport(family=family)
    slack = math.log1p(rel_slack)

    for i, d1 in enumerate(deltas):
        for d2 in deltas[i + 1:]:
            if not d2 > d1:
                continue
            for j, x1 in enumerate(xs):
                for x2 in xs[j + 1:]:
                    if not x2 > x1:
                        continue
                    report.n_checked += 1
                    for kind, logf in (("cdf", logcdf), ("sf", logsf)):
                        lhs = logf(family, d1, x2) - logf(family, d1, x1)
                        rhs = logf(family, d2, x2) - logf(family, d2, x1)
                        if lhs > rhs + slack:
                            report.violations.append(
                                MLRViolation(float(d1), float(d2), float(x1), float(x2),
                                             kind, math.exp(lhs), math.exp(rhs))
                            )
    return report
