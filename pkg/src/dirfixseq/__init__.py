"""Directional fixed-sequence multiple testing with mixed directional FWER control."""

from dirfixseq.distributions import (
    CriticalPair,
    DistributionFamily,
    cdf,
    critical_pair,
    mlr_grid_check,
    quantile,
    two_sided_pvalue,
)
from dirfixseq.oracle import (
    BivariateCdfEvaluator,
    cauchy_counterexample,
    mdfwer_two_dependent,
    mdfwer_two_indep,
    sharpness_chain_quantiles,
)
from dirfixseq.procedures import (
    Decision,
    DirectionalTest,
    ProcedureKind,
    ProcedureSpec,
    TestBattery,
    TruthVector,
    apply_procedure,
    bonferroni_directional,
    evaluate_decisions,
    fixed_seq_directional,
    hochberg_directional,
    holm_directional,
)
from dirfixseq.simulation import (
    Equicorrelated,
    Pi1Grid,
    RhoGrid,
    ScenarioConfig,
    WorstCaseChain,
    run_scenario,
    run_sweep,
)

__version__ = "0.1.0"

__all__ = [
    "BivariateCdfEvaluator",
    "CriticalPair",
    "Decision",
    "DirectionalTest",
    "DistributionFamily",
    "Equicorrelated",
    "Pi1Grid",
    "ProcedureKind",
    "ProcedureSpec",
    "RhoGrid",
    "ScenarioConfig",
    "TestBattery",
    "TruthVector",
    "WorstCaseChain",
    "apply_procedure",
    "bonferroni_directional",
    "cauchy_counterexample",
    "cdf",
    "critical_pair",
    "evaluate_decisions",
    "fixed_seq_directional",
    "hochberg_directional",
    "holm_directional",
    "mdfwer_two_dependent",
    "mdfwer_two_indep",
    "mlr_grid_check",
    "quantile",
    "run_scenario",
    "run_sweep",
    "sharpness_chain_quantiles",
    "two_sided_pvalue",
]
