"""Acceptance criteria, one test each.

Run with ``pytest tests/test_acceptance.py -v``; the terminal summary ends
with one PASS/FAIL line per criterion.  Every simulation uses ``SEED``.
"""

import io
import time

import numpy as np
import pytest
from scipy import stats

from dirfixseq.datasets import hypertension_battery
from dirfixseq.distributions import (
    cdf,
    isf,
    mlr_grid_check,
    quantile,
    sf,
    two_sided_pvalue,
)
from dirfixseq.oracle import (
    BivariateCdfEvaluator,
    JointKind,
    cauchy_counterexample,
    mdfwer_two_dependent,
    mdfwer_two_indep,
    sharpness_chain_quantiles,
)
from dirfixseq.procedures import ProcedureKind, ProcedureSpec, apply_procedure, decide
from dirfixseq.simulation import (
    Equicorrelated,
    Pi1Grid,
    RhoGrid,
    ScenarioConfig,
    WorstCaseChain,
    gen_worst_case_chain,
    run_scenario,
    run_sweep,
    setting2_truth,
    sharpness_truth,
)

pytestmark = pytest.mark.acceptance

SEED = 20240601
K = ProcedureKind
COMPARISONS = ("BonferroniDir", "HolmDir", "HochbergDir")


def within(est, target, k=3.0):
    return abs(est.estimate - target) <= k * est.se


class Clock:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.seconds = time.perf_counter() - self.t0


def test_criterion_1_table_reproduction(record_property):
    record_property("criterion", "1 table reproduction")
    battery = hypertension_battery()
    apply_procedure(battery, ProcedureSpec("FixedSeqFlat"))  # warm-up
    with Clock() as clock:
        p1 = apply_procedure(battery, ProcedureSpec("FixedSeqHalving", 0.05))
        p2 = apply_procedure(battery, ProcedureSpec("FixedSeqFlat", 0.05))
    rejected = lambda d: [lab for lab, x in zip(battery.labels, d) if x.rejected]
    assert rejected(p1) == ["D4-P", "D3-P"]
    assert rejected(p2) == ["D4-P", "D3-P", "D2-P"]
    assert all(int(x) == 1 for x in p1 + p2 if x.rejected)
    assert clock.seconds < 1e-3


def test_criterion_2_cauchy_counterexample(record_property):
    record_property("criterion", "2 heavy-tail counterexample")
    with Clock() as clock:
        r = cauchy_counterexample(0.05, 100.0)
        cfg = ScenarioConfig((100.0, 0.0), family="cauchy", procedures=("FixedSeqFlat",),
                             replications=1_000_000, master_seed=SEED)
        est = run_scenario(cfg)[K.FIXED_SEQ_FLAT].mdfwer
    print(f"oracle {r.mdfwer:.6f}, simulated {est.estimate:.6f} +- {est.se:.6f}")
    assert abs(r.c - 12.7062) <= 1e-4
    assert abs(r.lhs - 0.002824) <= 0.02 * 0.002824
    assert abs(r.rhs - 0.00018) <= 0.05 * 0.00018
    assert r.violated and r.mdfwer > 0.05
    assert within(est, r.mdfwer)
    assert clock.seconds < 5


def test_criterion_3_two_hypothesis_oracle_vs_mc(record_property):
    record_property("criterion", "3 two-hypothesis oracle vs Monte Carlo")
    failures = []
    with Clock() as clock:
        for rho in (0.0, 0.5):
            for alpha in (0.01, 0.05):
                for theta1 in (-3.0, -0.5, 0.5, 3.0):
                    if rho == 0.0:
                        exact = mdfwer_two_indep("normal", theta1, alpha)
                    else:
                        ev = BivariateCdfEvaluator(JointKind.EQUICORRELATED_NORMAL, (theta1, 0.0), "normal", rho)
                        exact = mdfwer_two_dependent(ev, "normal", theta1, alpha)
                    cfg = ScenarioConfig((theta1, 0.0), Equicorrelated(rho), alpha=alpha,
                                         procedures=("FixedSeqFlat",), replications=1_000_000,
                                         master_seed=SEED)
                    est = run_scenario(cfg)[K.FIXED_SEQ_FLAT].mdfwer
                    z = (est.estimate - exact) / est.se
                    print(f"rho={rho} alpha={alpha} theta1={theta1:+}: oracle {exact:.6f} "
                          f"mc {est.estimate:.6f} z={z:+.2f}")
                    if abs(z) > 3 or exact > alpha:
                        failures.append((rho, alpha, theta1, exact, est.estimate, z))
    assert not failures, failures
    assert clock.seconds < 30


def test_criterion_4_sharpness(record_property):
    record_property("criterion", "4 halving constants are sharp")
    with Clock() as clock:
        summary = sharpness_chain_quantiles(4, 0.05)
        cfg = ScenarioConfig(sharpness_truth(4, 1e-6), WorstCaseChain(), procedures=("FixedSeqHalving",),
                             replications=1_000_000, master_seed=SEED)
        est = run_scenario(cfg)[K.FIXED_SEQ_HALVING].mdfwer
    print(f"simulated {est.estimate:.6f} +- {est.se:.6f}")
    assert summary.total == 0.05
    assert within(est, 0.05)
    assert clock.seconds < 10


def test_criterion_5_setting1_ordering_and_control(record_property):
    record_property("criterion", "5 setting 1 control and power ordering")
    grid = tuple(round(0.05 * i, 2) for i in range(1, 21))
    problems = []
    with Clock() as clock:
        for rho in (0.0, 0.5):
            base = ScenarioConfig((0.0,) * 20, Equicorrelated(rho), replications=10_000, master_seed=SEED)
            sweep = run_sweep(base, Pi1Grid(grid, theta=3.0), setting="1")
            for pi1 in grid:
                rows = {r.procedure: r for r in sweep.rows if r.pi1 == pi1}
                for r in rows.values():
                    if r.mdfwer > 0.05 + 3 * r.mdfwer_se:
                        problems.append(f"rho={rho} pi1={pi1} {r.procedure} mdFWER {r.mdfwer:.4f}")
                if pi1 <= 0.4:
                    flat, halving = rows["FixedSeqFlat"].power, rows["FixedSeqHalving"].power
                    best_cmp = max(rows[c].power for c in COMPARISONS)
                    if not flat > halving > best_cmp:
                        problems.append(f"rho={rho} pi1={pi1} power flat {flat:.4f} "
                                        f"halving {halving:.4f} best comparison {best_cmp:.4f}")
    for line in problems:
        print(line)
    assert clock.seconds < 60
    assert not problems, f"{len(problems)} violations, first: {problems[0]}"


def test_criterion_6_setting2_flat_highest(record_property):
    record_property("criterion", "6 setting 2 flat procedure has highest power")
    problems = []
    rhos = tuple(round(0.1 * i, 1) for i in range(10))
    with Clock() as clock:
        for theta0, r in ((5.0, 0.8), (8.0, 0.5)):
            base = ScenarioConfig(setting2_truth(20, 5, theta0, r), replications=10_000, master_seed=SEED)
            sweep = run_sweep(base, RhoGrid(rhos), setting="2", theta0=theta0, r=r)
            for rho in rhos:
                rows = {x.procedure: x for x in sweep.rows if x.rho == rho}
                top = max(rows.values(), key=lambda x: x.power)
                if top.procedure != "FixedSeqFlat" or any(
                        x.power == rows["FixedSeqFlat"].power for x in rows.values() if x is not rows["FixedSeqFlat"]):
                    problems.append(f"({theta0},{r}) rho={rho}: top is {top.procedure}")
                for x in rows.values():
                    if x.mdfwer > 0.05 + 3 * x.mdfwer_se:
                        problems.append(f"({theta0},{r}) rho={rho} {x.procedure} mdFWER {x.mdfwer:.4f}")
    assert not problems, problems
    assert clock.seconds < 60


def test_criterion_7_property_suites(record_property):
    record_property("criterion", "7 property suites")
    rng = np.random.default_rng(SEED)
    with Clock() as clock:
        # p-value symmetry and null uniformity
        for fam, draw in (("normal", rng.standard_normal), ("cauchy", rng.standard_cauchy)):
            t = draw(200_000)
            assert np.array_equal(two_sided_pvalue(fam, t), two_sided_pvalue(fam, -t))
            assert stats.kstest(two_sided_pvalue(fam, t), "uniform").pvalue > 1e-4
            xs = np.linspace(-30, 30, 6001)
            assert np.max(np.abs(cdf(fam, 0.0, -xs) - (1 - cdf(fam, 0.0, xs)))) <= 1e-12
            us = np.linspace(1e-3, 1 - 1e-3, 9999)
            assert np.max(np.abs(cdf(fam, 0.0, quantile(fam, us)) - us)) <= 1e-8
            lo, hi = np.linspace(-8, 0, 801), np.linspace(0, 8, 801)[1:]
            np.testing.assert_allclose(quantile(fam, cdf(fam, 0.0, lo)), lo, rtol=1e-8, atol=1e-8)
            np.testing.assert_allclose(isf(fam, sf(fam, 0.0, hi)), hi, rtol=1e-8, atol=1e-8)

        # likelihood-ratio monotonicity grid
        assert mlr_grid_check("normal", np.linspace(-5, 5, 11), np.linspace(-10, 10, 41)).passed
        assert not mlr_grid_check("cauchy", [0, 100], [-112.7, -87.3]).passed

        # prefix and monotonicity over 2 * 10^4 random batteries per procedure
        n_cases = 20_000
        n = 8
        p = rng.uniform(0, 1, (n_cases, n)) ** 3  # push mass towards small p-values
        s = rng.choice([-1.0, 1.0], (n_cases, n))
        lowered = p.copy()
        idx = rng.integers(0, n, n_cases)
        lowered[np.arange(n_cases), idx] *= rng.uniform(0, 1, n_cases)
        for kind in ProcedureKind:
            for alpha in (0.05, 0.2):
                spec = ProcedureSpec(kind, alpha)
                d = decide(p, s, spec) != 0
                assert np.all((decide(lowered, s, spec) != 0) >= d), kind
                if kind.is_fixed_sequence:
                    assert np.array_equal(d, np.logical_and.accumulate(d, axis=1)), kind

        # pathwise chain event equivalence
        k = 6
        q = np.array(sharpness_chain_quantiles(k, 0.05).quantiles)
        z = gen_worst_case_chain(k, np.zeros(k), rng, size=100_000)
        violations = sum(int(np.sum((z[:, i] >= q[i]) != (np.abs(z[:, i + 1]) >= q[i + 1])))
                         for i in range(k - 1))
        assert violations == 0

        # byte-identical sweeps across worker counts
        base = ScenarioConfig((0.0,) * 20, Equicorrelated(0.5), replications=100_000, master_seed=SEED)
        texts = [run_sweep(base, Pi1Grid((0.25, 0.75)), setting="1", workers=w).to_csv() for w in (1, 8)]
        assert texts[0] == texts[1]
    assert clock.seconds < 60


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v", "-s"]))
