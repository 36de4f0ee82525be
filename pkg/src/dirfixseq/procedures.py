"""Directional multiple-testing procedures.

Each procedure maps ordered two-sided p-values plus the signs of the test
statistics to one decision per hypothesis: accept, reject claiming a positive
effect, or reject claiming a negative effect.  The array kernels work on a
2-d block of batteries at once (one row per battery), which is what the
simulation engine feeds them; the list-returning functions are thin wrappers
for single batteries.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from dirfixseq._validation import check_alpha, check_batteries, check_probability
from dirfixseq.distributions import DistributionFamily, isf, two_sided_pvalue

__all__ = [
    "Decision",
    "ProcedureKind",
    "ProcedureSpec",
    "TestBattery",
    "TruthVector",
    "ErrorTally",
    "FIXED_SEQUENCE_KINDS",
    "COMPARISON_KINDS",
    "critical_constants",
    "decide",
    "apply_procedure",
    "fixed_seq_directional",
    "bonferroni_directional",
    "holm_directional",
    "hochberg_directional",
    "evaluate_decisions",
    "tally_errors",
    "DirectionalTest",
]


class Decision(enum.IntEnum):
    ACCEPT = 0
    REJECT_POSITIVE = 1
    REJECT_NEGATIVE = -1

    @property
    def rejected(self) -> bool:
        return self is not Decision.ACCEPT

    @property
    def label(self) -> str:
        return "R" if self.rejected else "NR"

    @property
    def direction(self) -> str:
        return {1: "+", -1: "-", 0: ""}[int(self)]


class ProcedureKind(str, enum.Enum):
    FIXED_SEQ_HALVING = "FixedSeqHalving"
    FIXED_SEQ_FLAT = "FixedSeqFlat"
    FIXED_SEQ_LINEAR = "FixedSeqLinear"
    FIXED_SEQ_TWO_THIRDS = "FixedSeqTwoThirds"
    FIXED_SEQ_HALF = "FixedSeqHalf"
    BONFERRONI_DIR = "BonferroniDir"
    HOLM_DIR = "HolmDir"
    HOCHBERG_DIR = "HochbergDir"

    @classmethod
    def coerce(cls, value: "ProcedureKind | str") -> "ProcedureKind":
        if isinstance(value, cls):
            return value
        key = str(value).replace("_", "").replace("-", "").lower()
        for member in cls:
            if member.value.lower() == key or member.name.replace("_", "").lower() == key:
                return member
        alias = _ALIASES.get(key)
        if alias is not None:
            return alias
        names = ", ".join(m.value for m in cls)
        raise ValueError(f"unknown procedure {value!r}; expected one of {names}")

    @property
    def is_fixed_sequence(self) -> bool:
        return self in FIXED_SEQUENCE_KINDS


_ALIASES = {
    "proc1": ProcedureKind.FIXED_SEQ_HALVING,
    "procedure1": ProcedureKind.FIXED_SEQ_HALVING,
    "proc2": ProcedureKind.FIXED_SEQ_FLAT,
    "procedure2": ProcedureKind.FIXED_SEQ_FLAT,
    "bonferroni": ProcedureKind.BONFERRONI_DIR,
    "holm": ProcedureKind.HOLM_DIR,
    "hochberg": ProcedureKind.HOCHBERG_DIR,
}

FIXED_SEQUENCE_KINDS = (
    ProcedureKind.FIXED_SEQ_HALVING,
    ProcedureKind.FIXED_SEQ_FLAT,
    ProcedureKind.FIXED_SEQ_LINEAR,
    ProcedureKind.FIXED_SEQ_TWO_THIRDS,
    ProcedureKind.FIXED_SEQ_HALF,
)
COMPARISON_KINDS = (
    ProcedureKind.BONFERRONI_DIR,
    ProcedureKind.HOLM_DIR,
    ProcedureKind.HOCHBERG_DIR,
)


@dataclass(frozen=True)
class ProcedureSpec:
    kind: ProcedureKind
    alpha: float = 0.05

    def __post_init__(self):
        object.__setattr__(self, "kind", ProcedureKind.coerce(self.kind))
        object.__setattr__(self, "alpha", check_alpha(self.alpha))


def critical_constants(spec: ProcedureSpec, n: int) -> np.ndarray:
    """Per-step thresholds of a fixed-sequence procedure for ``n`` hypotheses."""
    if n < 1:
        raise ValueError("n must be at least 1")
    a = spec.alpha
    kind = spec.kind
    if kind is ProcedureKind.FIXED_SEQ_HALVING:
        return a / 2.0 ** np.arange(n)
    if kind is ProcedureKind.FIXED_SEQ_FLAT:
        return np.full(n, a)
    if kind is ProcedureKind.FIXED_SEQ_LINEAR:
        return np.full(n, 2.0 * a / (n + 1))
    if kind is ProcedureKind.FIXED_SEQ_TWO_THIRDS:
        return np.full(n, 2.0 * a / 3.0)
    if kind is ProcedureKind.FIXED_SEQ_HALF:
        return np.full(n, a / 2.0)
    raise ValueError(f"{kind.value} is not a fixed-sequence procedure")


@dataclass(frozen=True)
class TestBattery:
    """Ordered test statistics with their two-sided p-values.

    Build with :meth:`from_statistics` or :meth:`from_pvalues`.  The latter
    keeps the supplied p-values verbatim, takes directions from the given
    signs, and fills in each statistic as the signed quantile that would
    produce its p-value.
    """

    __test__ = False  # not a pytest class

    statistics: np.ndarray
    pvalues: np.ndarray
    family: DistributionFamily = DistributionFamily.NORMAL
    labels: tuple[str, ...] | None = None
    signs: np.ndarray | None = None

    def __post_init__(self):
        if self.statistics.ndim != 1 or self.statistics.size < 1:
            raise ValueError("a battery needs at least one hypothesis")
        if self.pvalues.shape != self.statistics.shape:
            raise ValueError("statistics and pvalues must have the same length")
        if self.labels is not None and len(self.labels) != self.n:
            raise ValueError("labels must match the number of hypotheses")
        if self.signs is None:
            object.__setattr__(self, "signs", np.sign(self.statistics))

    @classmethod
    def from_statistics(cls, statistics, family="normal", labels=None) -> "TestBattery":
        family = DistributionFamily.coerce(family)
        stats, _ = check_batteries(np.atleast_1d(np.asarray(statistics, dtype=float)), "statistics")
        stats = stats[0]
        return cls(stats, np.asarray(two_sided_pvalue(family, stats)), family,
                   None if labels is None else tuple(labels))

    @classmethod
    def from_pvalues(cls, pvalues, signs, family="normal", labels=None) -> "TestBattery":
        family = DistributionFamily.coerce(family)
        p = np.atleast_1d(check_probability(pvalues, "pvalue", open_right=False)).astype(float)
        s = np.atleast_1d(np.asarray(signs, dtype=float))
        if s.shape != p.shape:
            raise ValueError("pvalues and signs must have the same length")
        if not np.all(np.isin(s, (-1.0, 1.0))):
            raise ValueError("signs must be +1 or -1")
        stats = s * np.abs(isf(family, p / 2.0))
        return cls(stats, p, family, None if labels is None else tuple(labels), s)

    @property
    def n(self) -> int:
        return int(self.statistics.size)


@dataclass(frozen=True)
class TruthVector:
    thetas: tuple[float, ...]

    def __post_init__(self):
        thetas = tuple(float(t) for t in np.atleast_1d(self.thetas))
        if not thetas:
            raise ValueError("truth vector must be non-empty")
        object.__setattr__(self, "thetas", thetas)

    @property
    def n(self) -> int:
        return len(self.thetas)

    @property
    def n1(self) -> int:
        return sum(1 for t in self.thetas if t != 0.0)

    @property
    def pi1(self) -> float:
        return self.n1 / self.n

    @property
    def first_null(self) -> int:
        """1-based index of the first true null, ``n + 1`` if there is none."""
        for i, t in enumerate(self.thetas, start=1):
            if t == 0.0:
                return i
        return self.n + 1

    def as_array(self) -> np.ndarray:
        return np.asarray(self.thetas, dtype=float)


@dataclass(frozen=True)
class ErrorTally:
    type1: int
    type3: int
    correct_directional_rejections: int

    @property
    def any_error(self) -> bool:
        return self.type1 + self.type3 > 0


# -- array kernels ---------------------------------------------------------

def _directions(reject: np.ndarray, signs: np.ndarray) -> np.ndarray:
    out = np.where(reject, signs, 0).astype(np.int8)
    if np.any(reject & (signs == 0)):
        raise AssertionError("rejected hypothesis with a zero statistic")
    return out


def _fixed_sequence(p: np.ndarray, constants: np.ndarray) -> np.ndarray:
    return np.logical_and.accumulate(p <= constants, axis=1)


def _step_thresholds(alpha: float, n: int) -> np.ndarray:
    # alpha / (n - k + 1) for the k-th smallest p-value
    return alpha / (n - np.arange(n))


def _sorted_pass(p: np.ndarray, alpha: float):
    order = np.argsort(p, axis=1, kind="stable")
    ok = np.take_along_axis(p, order, axis=1) <= _step_thresholds(alpha, p.shape[1])
    return order, ok


def _scatter_prefix(order: np.ndarray, k: np.ndarray) -> np.ndarray:
    n = order.shape[1]
    sorted_reject = np.arange(n) < k[:, None]
    reject = np.empty_like(sorted_reject)
    np.put_along_axis(reject, order, sorted_reject, axis=1)
    return reject


def _holm(p: np.ndarray, alpha: float) -> np.ndarray:
    order, ok = _sorted_pass(p, alpha)
    k = np.where(ok.all(axis=1), p.shape[1], np.argmin(ok, axis=1))
    return _scatter_prefix(order, k)


def _hochberg(p: np.ndarray, alpha: float) -> np.ndarray:
    order, ok = _sorted_pass(p, alpha)
    n = p.shape[1]
    k = np.where(ok.any(axis=1), n - np.argmax(ok[:, ::-1], axis=1), 0)
    return _scatter_prefix(order, k)


def decide(pvalues: np.ndarray, signs: np.ndarray, spec: ProcedureSpec) -> np.ndarray:
    """Decisions for a block of batteries.

    Parameters
    ----------
    pvalues, signs : ndarray of shape (n_batteries, n)
        Two-sided p-values and the signs (+1/-1/0) of the statistics.
    spec : ProcedureSpec

    Returns
    -------
    ndarray of int8, shape (n_batteries, n)
        +1 / -1 for a rejection with that direction, 0 for acceptance.
    """
    p = np.asarray(pvalues, dtype=float)
    if p.ndim != 2 or p.shape[1] < 1:
        raise ValueError("pvalues must be 2-d with at least one column")
    kind = spec.kind
    if kind.is_fixed_sequence:
        reject = _fixed_sequence(p, critical_constants(spec, p.shape[1]))
    elif kind is ProcedureKind.BONFERRONI_DIR:
        reject = p <= spec.alpha / p.shape[1]
    elif kind is ProcedureKind.HOLM_DIR:
        reject = _holm(p, spec.alpha)
    else:
        reject = _hochberg(p, spec.alpha)
    return _directions(reject, np.asarray(signs))


def tally_errors(decisions: np.ndarray, thetas) -> tuple[np.ndarray, np.ndarray]:
    """Per-battery error flags and correct-direction rejection counts."""
    d = np.asarray(decisions)
    truth = np.sign(np.asarray(thetas, dtype=float))
    rejected = d != 0
    type1 = rejected & (truth == 0)
    type3 = rejected & (truth != 0) & (d != truth)
    correct = rejected & (truth != 0) & (d == truth)
    return (type1 | type3).any(axis=1), correct.sum(axis=1)


# -- single-battery API ----------------------------------------------------

def apply_procedure(battery: TestBattery, spec: ProcedureSpec) -> list[Decision]:
    row = decide(battery.pvalues[None, :], battery.signs[None, :], spec)[0]
    return [Decision(int(v)) for v in row]


def fixed_seq_directional(battery: TestBattery, spec: ProcedureSpec) -> list[Decision]:
    """Test hypotheses in order, stopping at the first p-value above its constant."""
    if not spec.kind.is_fixed_sequence:
        raise ValueError(f"{spec.kind.value} is not a fixed-sequence procedure")
    return apply_procedure(battery, spec)


def bonferroni_directional(battery: TestBattery, alpha: float) -> list[Decision]:
    return apply_procedure(battery, ProcedureSpec(ProcedureKind.BONFERRONI_DIR, alpha))


def holm_directional(battery: TestBattery, alpha: float) -> list[Decision]:
    """Step-down Holm with directions from the statistic signs.

    Ties in p-values are ordered by original position.
    """
    return apply_procedure(battery, ProcedureSpec(ProcedureKind.HOLM_DIR, alpha))


def hochberg_directional(battery: TestBattery, alpha: float) -> list[Decision]:
    return apply_procedure(battery, ProcedureSpec(ProcedureKind.HOCHBERG_DIR, alpha))


def evaluate_decisions(decisions: Sequence[Decision | int], truth: TruthVector) -> ErrorTally:
    if len(decisions) != truth.n:
        raise ValueError(f"got {len(decisions)} decisions for {truth.n} hypotheses")
    type1 = type3 = correct = 0
    for d, theta in zip(decisions, truth.thetas):
        d = int(d)
        if d == 0:
            continue
        if theta == 0.0:
            type1 += 1
        elif np.sign(theta) == d:
            correct += 1
        else:
            type3 += 1
    return ErrorTally(type1, type3, correct)


# -- estimator -------------------------------------------------------------

class DirectionalTest(BaseEstimator):
    """Directional multiple-testing procedure with a scikit-learn interface.

    Columns of ``X`` are the hypotheses in testing order; each row is an
    independent battery of test statistics.  The procedure holds no learned
    state: :meth:`fit` only validates the configuration and records the
    number of hypotheses.

    Parameters
    ----------
    procedure : str or ProcedureKind, default="FixedSeqFlat"
    alpha : float, default=0.05
    family : {"normal", "cauchy"}, default="normal"
        Null distribution used to turn statistics into two-sided p-values.

    Attributes
    ----------
    spec_ : ProcedureSpec
    n_hypotheses_ : int
    critical_constants_ : ndarray or None
        Per-step thresholds for fixed-sequence procedures.
    """

    def __init__(self, procedure="FixedSeqFlat", alpha=0.05, family="normal"):
        self.procedure = procedure
        self.alpha = alpha
        self.family = family

    def fit(self, X, y=None):
        X, _ = check_batteries(X)
        self.spec_ = ProcedureSpec(ProcedureKind.coerce(self.procedure), self.alpha)
        self.family_ = DistributionFamily.coerce(self.family)
        self.n_hypotheses_ = X.shape[1]
        self.n_features_in_ = X.shape[1]
        self.critical_constants_ = (
            critical_constants(self.spec_, X.shape[1]) if self.spec_.kind.is_fixed_sequence else None
        )
        return self

    def _check_input(self, X):
        check_is_fitted(self, "spec_")
        X, was_1d = check_batteries(X)
        if X.shape[1] != self.n_hypotheses_:
            raise ValueError(
                f"X has {X.shape[1]} hypotheses, but {type(self).__name__} was fitted with {self.n_hypotheses_}"
            )
        return X, was_1d

    def transform(self, X):
        """Two-sided p-values of the statistics."""
        X, was_1d = self._check_input(X)
        p = np.asarray(two_sided_pvalue(self.family_, X))
        return p[0] if was_1d else p

    def predict(self, X):
        """Decisions coded +1 / -1 (reject with that sign) and 0 (accept)."""
        X, was_1d = self._check_input(X)
        out = decide(np.asarray(two_sided_pvalue(self.family_, X)), np.sign(X), self.spec_)
        return out[0] if was_1d else out

    def fit_predict(self, X, y=None):
        return self.fit(X).predict(X)

    def predict_pvalues(self, pvalues, signs):
        """Decisions from p-values and statistic signs supplied directly."""
        P, was_1d = self._check_input(pvalues)
        check_probability(P, "pvalues", open_right=False)
        S = np.asarray(signs, dtype=float).reshape(P.shape)
        out = decide(P, S, self.spec_)
        return out[0] if was_1d else out

    def n_rejected(self, X) -> np.ndarray | int:
        d = self.predict(X)
        counts = np.count_nonzero(d, axis=-1)
        return int(counts) if np.ndim(counts) == 0 else counts
