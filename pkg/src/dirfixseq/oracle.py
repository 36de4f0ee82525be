"""Closed-form error rates used as ground truth for the simulator.

Covers the two-hypothesis mixed directional FWER of the flat fixed-sequence
procedure (general joint CDF and the independent simplification), the
Cauchy counterexample showing that the flat procedure can exceed ``alpha``
without monotone likelihood ratio, and the quantiles of the chain
construction under which the halving constants are exactly attained.
"""

from __future__ import annotations

import enum
import functools
import logging
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from numpy.polynomial.hermite import hermgauss
from scipy import integrate, special

from dirfixseq._validation import check_alpha, check_rho
from dirfixseq.distributions import DistributionFamily, cdf, critical_pair, isf

__all__ = [
    "JointKind",
    "BivariateCdfEvaluator",
    "CounterexampleReport",
    "SharpnessSummary",
    "mdfwer_two_indep",
    "mdfwer_two_dependent",
    "cauchy_counterexample",
    "sharpness_chain_quantiles",
]

log = logging.getLogger(__name__)

DEFAULT_NODES = 64
MAX_NODES = 256  # hermgauss weights overflow beyond this


class JointKind(str, enum.Enum):
    INDEPENDENT = "independent"
    EQUICORRELATED_NORMAL = "equicorrelated_normal"


@functools.lru_cache(maxsize=None)
def _hermite_rule(nodes: int) -> tuple[np.ndarray, np.ndarray]:
    # nodes and weights for E[g(Z)], Z standard normal
    x, w = hermgauss(nodes)
    return math.sqrt(2.0) * x, w / math.sqrt(math.pi)


@dataclass(frozen=True)
class BivariateCdfEvaluator:
    """Joint CDF ``Pr(T1 <= x, T2 <= y)`` of two location-shifted statistics.

    With ``kind=EQUICORRELATED_NORMAL`` the statistics are unit-variance
    normals with correlation ``rho``; the CDF is the one-factor integral

        E_Z[ Phi((x - theta1 - sqrt(rho) Z) / sqrt(1 - rho))
             * Phi((y - theta2 - sqrt(rho) Z) / sqrt(1 - rho)) ]

    evaluated with Gauss-Hermite quadrature.  Starting from ``nodes``, the
    node count is doubled until two successive values agree to ``tol``.  The
    integrand sharpens as ``rho`` approaches 1; if the rule has not settled
    by ``max_nodes`` the same integral is handed to adaptive quadrature.
    """

    kind: JointKind = JointKind.INDEPENDENT
    thetas: tuple[float, float] = (0.0, 0.0)
    family: DistributionFamily = DistributionFamily.NORMAL
    rho: float = 0.0
    nodes: int = DEFAULT_NODES
    tol: float = 1e-13
    max_nodes: int = MAX_NODES

    def __post_init__(self):
        object.__setattr__(self, "kind", JointKind(self.kind))
        object.__setattr__(self, "family", DistributionFamily.coerce(self.family))
        object.__setattr__(self, "thetas", (float(self.thetas[0]), float(self.thetas[1])))
        if self.kind is JointKind.EQUICORRELATED_NORMAL:
            if self.family is not DistributionFamily.NORMAL:
                raise ValueError("the equicorrelated model is defined for the normal family only")
            object.__setattr__(self, "rho", check_rho(self.rho, allow_one=False))
            if self.nodes < 2:
                raise ValueError("nodes must be >= 2")
        elif self.rho != 0.0:
            raise ValueError("rho must be 0 for the independent product")

    def _integrand(self, x: float, y: float, z):
        t1, t2 = self.thetas
        s = math.sqrt(self.rho)
        scale = math.sqrt(1.0 - self.rho)
        return special.ndtr((x - t1 - s * z) / scale) * special.ndtr((y - t2 - s * z) / scale)

    def _quadrature(self, x: float, y: float, nodes: int) -> float:
        z, w = _hermite_rule(nodes)
        return float(np.dot(w, self._integrand(x, y, z)))

    def _adaptive(self, x: float, y: float) -> float:
        s = math.sqrt(self.rho)
        # the integrand steps near these points; quad needs them flagged
        breaks = sorted({0.0, *((b - t) / s for b, t in zip((x, y), self.thetas) if s > 0)})
        breaks = [b for b in breaks if -40.0 < b < 40.0]
        value, _ = integrate.quad(
            lambda z: self._integrand(x, y, z) * math.exp(-0.5 * z * z),
            -40.0, 40.0, points=breaks, limit=400, epsabs=1e-15, epsrel=1e-13,
        )
        return value / math.sqrt(2.0 * math.pi)

    def __call__(self, x: float, y: float) -> float:
        if self.kind is JointKind.INDEPENDENT:
            t1, t2 = self.thetas
            return float(cdf(self.family, t1, x) * cdf(self.family, t2, y))
        nodes = self.nodes
        value = self._quadrature(x, y, nodes)
        while nodes * 2 <= self.max_nodes:
            nodes *= 2
            refined = self._quadrature(x, y, nodes)
            if abs(refined - value) <= self.tol:
                return refined
            value = refined
        log.debug("Gauss-Hermite unsettled at %d nodes (rho=%g); using adaptive quadrature",
                  nodes, self.rho)
        return self._adaptive(x, y)


def _check_theta1(theta1: float) -> float:
    theta1 = float(theta1)
    if theta1 == 0.0 or not math.isfinite(theta1):
        raise ValueError("theta1 must be finite and non-zero")
    return theta1


def mdfwer_two_indep(family, theta1: float, alpha: float) -> float:
    """Exact mdFWER of the flat procedure at n=2, theta2=0, independent statistics."""
    family = DistributionFamily.coerce(family)
    theta1 = _check_theta1(theta1)
    alpha = check_alpha(alpha)
    cp = critical_pair(family, alpha)
    f1 = cdf(family, theta1, cp.c1)
    f2 = cdf(family, theta1, cp.c2)
    if theta1 > 0:
        return alpha + f1 - alpha * f2
    return 1.0 + alpha * f1 - f2


def mdfwer_two_dependent(evaluator: BivariateCdfEvaluator, family, theta1: float, alpha: float) -> float:
    """mdFWER of the flat procedure at n=2, theta2=0, for an arbitrary joint CDF.

    ``evaluator.thetas`` must be ``(theta1, 0)``.
    """
    family = DistributionFamily.coerce(family)
    theta1 = _check_theta1(theta1)
    alpha = check_alpha(alpha)
    if evaluator.thetas != (theta1, 0.0):
        raise ValueError(f"evaluator thetas {evaluator.thetas} do not match ({theta1}, 0)")
    if evaluator.family is not family:
        raise ValueError("evaluator and marginal family differ")
    cp = critical_pair(family, alpha)
    c1, c2 = cp.c1, cp.c2
    f1 = cdf(family, theta1, c1)
    f2 = cdf(family, theta1, c2)
    if theta1 > 0:
        return alpha + f1 - f2 + evaluator(c2, c2) - evaluator(c2, c1)
    # negative branch written out rather than reflected
    return 1.0 + f1 - f2 + evaluator(c1, c1) - evaluator(c1, c2)


@dataclass(frozen=True)
class CounterexampleReport:
    family: DistributionFamily
    alpha: float
    theta1: float
    c: float
    lhs: float
    rhs: float
    mdfwer: float

    @property
    def violated(self) -> bool:
        return self.lhs > self.rhs

    def to_dict(self) -> dict:
        return {
            "family": self.family.value,
            "alpha": self.alpha,
            "theta1": self.theta1,
            "c": self.c,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "violated": self.violated,
            "mdfwer": self.mdfwer,
        }


def cauchy_counterexample(alpha: float, theta1: float, family="cauchy") -> CounterexampleReport:
    """Compare ``F_0(-c - theta1)`` against ``alpha * F_0(c - theta1)``.

    The flat procedure's n=2 mdFWER is ``alpha + lhs - rhs``, so ``lhs > rhs``
    means the procedure exceeds ``alpha``.  ``family`` can be switched to
    normal to see the same check pass.
    """
    family = DistributionFamily.coerce(family)
    alpha = check_alpha(alpha)
    theta1 = float(theta1)
    if not theta1 > 0:
        raise ValueError("theta1 must be positive")
    c = float(isf(family, alpha / 2.0))
    lhs = float(cdf(family, 0.0, -c - theta1))
    rhs = alpha * float(cdf(family, 0.0, c - theta1))
    return CounterexampleReport(family, alpha, theta1, c, lhs, rhs, alpha + lhs - rhs)


@dataclass(frozen=True)
class SharpnessSummary:
    """Quantiles of the worst-case chain and the error probabilities they carry.

    ``components[j]`` is the probability of the error first made at step
    ``j + 1``; the first ``k - 1`` are one-sided (``alpha / 2**j``) and the last
    is the two-sided type 1 error ``alpha / 2**(k-1)``.  ``total`` is their
    exact rational sum, which always equals ``alpha``.
    """

    k: int
    alpha: float
    quantiles: tuple[float, ...]
    components: tuple[float, ...]
    total: float

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "alpha": self.alpha,
            "quantiles": list(self.quantiles),
            "components": list(self.components),
            "sum": self.total,
        }


def sharpness_chain_quantiles(k: int, alpha: float) -> SharpnessSummary:
    if int(k) != k or k < 1:
        raise ValueError("k must be a positive integer")
    k = int(k)
    alpha = check_alpha(alpha)
    q = tuple(float(isf("normal", alpha / 2.0**i)) for i in range(1, k + 1))
    exact = [Fraction(alpha) / 2**j for j in range(1, k)] + [Fraction(alpha) / 2 ** (k - 1)]
    total = sum(exact, Fraction(0))
    return SharpnessSummary(k, alpha, q, tuple(float(c) for c in exact), float(total))
