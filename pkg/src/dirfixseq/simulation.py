"""Monte Carlo estimation of mixed directional FWER and average power.

Replicates are processed in fixed-size blocks.  Block ``b`` draws from its
own generator seeded by ``SeedSequence(master_seed, spawn_key=(b,))``, and
every block reduces to integer tallies, so the result is bit-identical for
any number of worker threads.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence, TextIO, Union

import numpy as np
from scipy import special

from dirfixseq._validation import check_alpha, check_rho
from dirfixseq.distributions import DistributionFamily, two_sided_pvalue
from dirfixseq.procedures import (
    COMPARISON_KINDS,
    ProcedureKind,
    ProcedureSpec,
    TruthVector,
    decide,
    tally_errors,
)

__all__ = [
    "Equicorrelated",
    "WorstCaseChain",
    "ScenarioConfig",
    "EstimateWithSE",
    "ProcedureResult",
    "ScenarioResult",
    "Pi1Grid",
    "RhoGrid",
    "SweepRow",
    "SweepResult",
    "CSV_HEADER",
    "BLOCK_SIZE",
    "WORKERS_ENV",
    "default_workers",
    "gen_equicorrelated_normal",
    "gen_independent",
    "chain_step",
    "gen_worst_case_chain",
    "run_scenario",
    "run_sweep",
    "scenario_rows",
    "setting1_truth",
    "setting2_truth",
    "sharpness_truth",
    "read_sweep_csv",
]

log = logging.getLogger(__name__)

BLOCK_SIZE = 1 << 15
WORKERS_ENV = "DIRFIXSEQ_WORKERS"
PAPER_PROCEDURES = (
    ProcedureKind.FIXED_SEQ_HALVING,
    ProcedureKind.FIXED_SEQ_FLAT,
) + COMPARISON_KINDS

# keep the chain's inverse-CDF argument inside (0, 1)
_ONE_MINUS = float(np.nextafter(1.0, 0.0))
_TINY = float(np.finfo(float).tiny)


def default_workers() -> int:
    raw = os.environ.get(WORKERS_ENV)
    if not raw:
        return 1
    try:
        value = int(raw)
    except ValueError:
        raise ValueError(f"{WORKERS_ENV} must be a positive integer, got {raw!r}") from None
    if value < 1:
        raise ValueError(f"{WORKERS_ENV} must be a positive integer, got {raw!r}")
    return value


# -- configuration ---------------------------------------------------------

@dataclass(frozen=True)
class Equicorrelated:
    rho: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "rho", check_rho(self.rho))


@dataclass(frozen=True)
class WorstCaseChain:
    pass


Dependence = Union[Equicorrelated, WorstCaseChain]


@dataclass(frozen=True)
class ScenarioConfig:
    truth: TruthVector
    dependence: Dependence = field(default_factory=Equicorrelated)
    family: DistributionFamily = DistributionFamily.NORMAL
    alpha: float = 0.05
    procedures: tuple[ProcedureKind, ...] = PAPER_PROCEDURES
    replications: int = 10_000
    master_seed: int = 0

    def __post_init__(self):
        if not isinstance(self.truth, TruthVector):
            object.__setattr__(self, "truth", TruthVector(tuple(self.truth)))
        object.__setattr__(self, "family", DistributionFamily.coerce(self.family))
        object.__setattr__(self, "alpha", check_alpha(self.alpha))
        procs = tuple(ProcedureKind.coerce(p) for p in self.procedures)
        if not procs:
            raise ValueError("procedures must not be empty")
        object.__setattr__(self, "procedures", procs)
        if int(self.replications) != self.replications or self.replications < 1:
            raise ValueError("replications must be a positive integer")
        object.__setattr__(self, "replications", int(self.replications))
        seed = int(self.master_seed)
        if not 0 <= seed < 2**64:
            raise ValueError("master_seed must be a 64-bit unsigned integer")
        object.__setattr__(self, "master_seed", seed)

        dep = self.dependence
        if isinstance(dep, WorstCaseChain):
            thetas = self.truth.thetas
            if self.family is not DistributionFamily.NORMAL:
                raise ValueError("the worst-case chain requires the normal family")
            if len(thetas) < 2:
                raise ValueError("the worst-case chain needs at least two hypotheses")
            if any(t < 0 for t in thetas) or thetas[-1] != 0.0:
                raise ValueError("the worst-case chain needs theta_i >= 0 with the last theta equal to 0")
        elif isinstance(dep, Equicorrelated):
            if self.family is not DistributionFamily.NORMAL and dep.rho != 0.0:
                raise ValueError("correlated statistics are only defined for the normal family")
        else:
            raise TypeError(f"unknown dependence model {dep!r}")

    @property
    def n(self) -> int:
        return self.truth.n

    def specs(self) -> list[ProcedureSpec]:
        return [ProcedureSpec(kind, self.alpha) for kind in self.procedures]


# -- generators ------------------------------------------------------------

def _truth_array(truth, n: int | None = None) -> np.ndarray:
    thetas = truth.as_array() if isinstance(truth, TruthVector) else np.asarray(truth, dtype=float)
    if thetas.ndim != 1:
        raise ValueError("truth must be 1-d")
    if n is not None and thetas.size != n:
        raise ValueError(f"truth has {thetas.size} entries, expected {n}")
    return thetas


def gen_equicorrelated_normal(n: int, truth, rho: float, rng: np.random.Generator, size: int | None = None):
    """``T_i = theta_i + sqrt(rho) Z_0 + sqrt(1 - rho) Z_i`` with iid standard normal Z.

    Returns shape ``(n,)`` when ``size`` is None, otherwise ``(size, n)``.
    """
    thetas = _truth_array(truth, n)
    rho = check_rho(rho)
    m = 1 if size is None else int(size)
    common = rng.standard_normal((m, 1))
    if rho == 1.0:
        out = thetas + common
    else:
        own = rng.standard_normal((m, n))
        out = thetas + math.sqrt(rho) * common + math.sqrt(1.0 - rho) * own
    return out[0] if size is None else out


def gen_independent(family, truth, rng: np.random.Generator, size: int | None = None):
    """Independent location-shifted draws from ``family``."""
    family = DistributionFamily.coerce(family)
    thetas = _truth_array(truth)
    m = 1 if size is None else int(size)
    if family is DistributionFamily.NORMAL:
        noise = rng.standard_normal((m, thetas.size))
    else:
        noise = rng.standard_cauchy((m, thetas.size))
    out = thetas + noise
    return out[0] if size is None else out


def chain_step(z):
    """``Phi^{-1}(|2 Phi(z) - 1|)``, evaluated as ``-Phi^{-1}(2 Phi(-|z|))``.

    The second form keeps full precision in both tails.  The argument is
    clamped to ``[tiny, 1)`` so the result stays finite at ``z == 0`` and when
    ``Phi(-|z|)`` underflows (``|z|`` beyond about 37.5).
    """
    u = np.clip(2.0 * special.ndtr(-np.abs(np.asarray(z, dtype=float))), _TINY, _ONE_MINUS)
    out = -special.ndtri(u)
    return float(out) if np.ndim(out) == 0 else out


def gen_worst_case_chain(k: int, truth, rng: np.random.Generator, size: int | None = None):
    """Draw ``Z_k`` and fold it back into ``Z_{k-1}, ..., Z_1``; return ``Z + theta``.

    Every ``Z_i`` is marginally standard normal, and ``Z_i >= q_i`` exactly when
    ``|Z_{i+1}| >= q_{i+1}`` with ``q_i`` the upper ``alpha / 2**i`` quantile.
    """
    if int(k) != k or k < 2:
        raise ValueError("k must be an integer >= 2")
    k = int(k)
    thetas = _truth_array(truth, k)
    m = 1 if size is None else int(size)
    z = np.empty((m, k))
    z[:, -1] = rng.standard_normal(m)
    for i in range(k - 2, -1, -1):
        z[:, i] = chain_step(z[:, i + 1])
    out = z + thetas
    return out[0] if size is None else out


def _draw(config: ScenarioConfig, rng: np.random.Generator, size: int) -> np.ndarray:
    dep = config.dependence
    if isinstance(dep, WorstCaseChain):
        return gen_worst_case_chain(config.n, config.truth, rng, size)
    if config.family is DistributionFamily.NORMAL:
        return gen_equicorrelated_normal(config.n, config.truth, dep.rho, rng, size)
    return gen_independent(config.family, config.truth, rng, size)


# -- estimation ------------------------------------------------------------

@dataclass(frozen=True)
class EstimateWithSE:
    estimate: float
    se: float
    replications: int


@dataclass(frozen=True)
class ProcedureResult:
    """Estimates for one procedure plus the raw integer tallies behind them."""

    kind: ProcedureKind
    mdfwer: EstimateWithSE
    power: EstimateWithSE
    error_count: int
    correct_sum: int
    correct_sq_sum: int


@dataclass(frozen=True)
class ScenarioResult:
    config: ScenarioConfig
    results: dict[ProcedureKind, ProcedureResult]

    @property
    def power_defined(self) -> bool:
        return self.config.truth.n1 > 0

    def __getitem__(self, kind) -> ProcedureResult:
        return self.results[ProcedureKind.coerce(kind)]


def _rng_for_block(master_seed: int, block: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(block,)))


def _simulate_block(config: ScenarioConfig, specs: Sequence[ProcedureSpec], block: int, size: int) -> np.ndarray:
    rng = _rng_for_block(config.master_seed, block)
    stats = _draw(config, rng, size)
    pvals = np.asarray(two_sided_pvalue(config.family, stats))
    signs = np.sign(stats)
    thetas = config.truth.as_array()
    tallies = np.zeros((len(specs), 3), dtype=np.int64)
    for j, spec in enumerate(specs):
        any_error, correct = tally_errors(decide(pvals, signs, spec), thetas)
        correct = correct.astype(np.int64)
        tallies[j] = (np.count_nonzero(any_error), correct.sum(), (correct * correct).sum())
    return tallies


def _block_sizes(replications: int, block_size: int) -> list[int]:
    full, rest = divmod(replications, block_size)
    return [block_size] * full + ([rest] if rest else [])


def _summarize(kind: ProcedureKind, tallies: np.ndarray, reps: int, n1: int) -> ProcedureResult:
    errors, s1, s2 = (int(v) for v in tallies)
    p = errors / reps
    mdfwer = EstimateWithSE(p, math.sqrt(p * (1.0 - p) / reps), reps)
    if n1 == 0:
        power = EstimateWithSE(0.0, 0.0, reps)
    else:
        mean = s1 / (reps * n1)
        if reps > 1:
            # sample variance of correct/n1 from exact integer moments
            var = (s2 - s1 * s1 / reps) / (reps - 1) / (n1 * n1)
            se = math.sqrt(max(var, 0.0) / reps)
        else:
            se = 0.0
        power = EstimateWithSE(mean, se, reps)
    return ProcedureResult(kind, mdfwer, power, errors, s1, s2)


def run_scenario(config: ScenarioConfig, workers: int | None = None,
                 block_size: int = BLOCK_SIZE) -> ScenarioResult:
    """Estimate mdFWER and average power for every procedure in ``config``.

    All procedures see the same simulated statistics.  ``workers`` threads
    share the blocks; the output does not depend on it.
    """
    workers = default_workers() if workers is None else int(workers)
    if workers < 1:
        raise ValueError("workers must be >= 1")
    specs = config.specs()
    sizes = _block_sizes(config.replications, block_size)

    def job(item):
        block, size = item
        return _simulate_block(config, specs, block, size)

    if workers == 1 or len(sizes) == 1:
        parts = [job(item) for item in enumerate(sizes)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(job, enumerate(sizes)))
    total = np.sum(parts, axis=0)

    n1 = config.truth.n1
    if n1 == 0:
        log.warning("scenario has no false nulls; average power reported as 0")
    results = {
        spec.kind: _summarize(spec.kind, total[j], config.replications, n1)
        for j, spec in enumerate(specs)
    }
    return ScenarioResult(config, results)


# -- sweeps ----------------------------------------------------------------

def setting1_truth(n: int, pi1: float, theta: float = 3.0) -> TruthVector:
    """First ``floor(pi1 * n)`` hypotheses false with effect ``theta``, the rest null."""
    if not 0.0 < pi1 <= 1.0:
        raise ValueError(f"pi1 must lie in (0, 1], got {pi1!r}")
    # guard against 0.57 * 100 = 56.99999...
    n1 = int(math.floor(pi1 * n + 1e-9))
    return TruthVector(tuple([float(theta)] * n1 + [0.0] * (n - n1)))


def setting2_truth(n: int, n1: int, theta0: float, r: float) -> TruthVector:
    """Geometrically decaying effects ``theta0 * r**(i-1)`` for the first ``n1``."""
    if not 0 <= n1 <= n:
        raise ValueError("n1 must lie in [0, n]")
    effects = [float(theta0) * float(r) ** i for i in range(n1)]
    return TruthVector(tuple(effects + [0.0] * (n - n1)))


def sharpness_truth(k: int, eps: float = 1e-6) -> TruthVector:
    if k < 2:
        raise ValueError("k must be >= 2")
    return TruthVector(tuple([float(eps)] * (k - 1) + [0.0]))


@dataclass(frozen=True)
class Pi1Grid:
    values: tuple[float, ...]
    theta: float = 3.0

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if not vals:
            raise ValueError("pi1 grid must not be empty")
        if any(not 0.0 < v <= 1.0 for v in vals):
            raise ValueError("pi1 grid entries must lie in (0, 1]")
        object.__setattr__(self, "values", vals)


@dataclass(frozen=True)
class RhoGrid:
    values: tuple[float, ...]

    def __post_init__(self):
        vals = tuple(check_rho(v) for v in self.values)
        if not vals:
            raise ValueError("rho grid must not be empty")
        object.__setattr__(self, "values", vals)


CSV_HEADER = ("setting", "pi1", "rho", "theta0", "r", "procedure", "mdfwer",
              "mdfwer_se", "power", "power_se", "reps", "seed")


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    return f"{float(value):.6g}"


@dataclass(frozen=True)
class SweepRow:
    setting: str
    pi1: float | None
    rho: float | None
    theta0: float | None
    r: float | None
    procedure: str
    mdfwer: float
    mdfwer_se: float
    power: float
    power_se: float
    reps: int
    seed: int

    def cells(self) -> list[str]:
        return [self.setting, _fmt(self.pi1), _fmt(self.rho), _fmt(self.theta0), _fmt(self.r),
                self.procedure, _fmt(self.mdfwer), _fmt(self.mdfwer_se), _fmt(self.power),
                _fmt(self.power_se), _fmt(self.reps), _fmt(self.seed)]


@dataclass
class SweepResult:
    rows: list[SweepRow] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.rows)

    def extend(self, other: "SweepResult | Iterable[SweepRow]") -> None:
        self.rows.extend(other.rows if isinstance(other, SweepResult) else other)

    def write_csv(self, fh: TextIO) -> None:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for row in self.rows:
            writer.writerow(row.cells())

    def to_csv(self) -> str:
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()


def read_sweep_csv(fh: TextIO) -> SweepResult:
    reader = csv.reader(fh)
    header = tuple(next(reader))
    if header != CSV_HEADER:
        raise ValueError(f"unexpected CSV header {header!r}")

    def opt(cell):
        return None if cell == "" else float(cell)

    rows = []
    for cells in reader:
        if not cells:
            continue
        rows.append(SweepRow(
            setting=cells[0], pi1=opt(cells[1]), rho=opt(cells[2]), theta0=opt(cells[3]),
            r=opt(cells[4]), procedure=cells[5], mdfwer=float(cells[6]), mdfwer_se=float(cells[7]),
            power=float(cells[8]), power_se=float(cells[9]), reps=int(cells[10]), seed=int(cells[11]),
        ))
    return SweepResult(rows)


def scenario_rows(result: ScenarioResult, setting: str, pi1=None, rho=None,
                  theta0=None, r=None) -> list[SweepRow]:
    cfg = result.config
    return [
        SweepRow(str(setting), pi1, rho, theta0, r, kind.value,
                 res.mdfwer.estimate, res.mdfwer.se, res.power.estimate, res.power.se,
                 cfg.replications, cfg.master_seed)
        for kind, res in result.results.items()
    ]


def run_sweep(base: ScenarioConfig, axis: Pi1Grid | RhoGrid, *, setting: str = "custom",
              theta0: float | None = None, r: float | None = None,
              workers: int | None = None) -> SweepResult:
    """Run ``base`` at every grid point; one row per point and procedure.

    ``Pi1Grid`` rebuilds the truth vector at each point (first
    ``floor(pi1 * n)`` effects equal to ``axis.theta``) and keeps the base
    dependence.  ``RhoGrid`` keeps the base truth and swaps in an
    equicorrelated model at each ``rho``.  Every point reuses the master seed.
    """
    out = SweepResult()
    if isinstance(axis, Pi1Grid):
        if isinstance(base.dependence, WorstCaseChain):
            raise ValueError("a pi1 sweep needs an equicorrelated base scenario")
        rho = base.dependence.rho
        for pi1 in axis.values:
            cfg = replace(base, truth=setting1_truth(base.n, pi1, axis.theta))
            res = run_scenario(cfg, workers=workers)
            out.extend(scenario_rows(res, setting, pi1=pi1, rho=rho,
                                     theta0=axis.theta if theta0 is None else theta0, r=r))
    elif isinstance(axis, RhoGrid):
        if isinstance(base.dependence, WorstCaseChain):
            raise ValueError("a rho sweep needs an equicorrelated base scenario")
        for rho in axis.values:
            cfg = replace(base, dependence=Equicorrelated(rho))
            res = run_scenario(cfg, workers=workers)
            out.extend(scenario_rows(res, setting, pi1=base.truth.pi1, rho=rho, theta0=theta0, r=r))
    else:
        raise TypeError(f"unknown sweep axis {axis!r}")
    return out
