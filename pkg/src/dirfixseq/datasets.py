"""Hypertension dose-response trial: eight ordered contrasts (four doses vs placebo)."""

from __future__ import annotations

from types import MappingProxyType

import numpy as np

from dirfixseq.procedures import TestBattery

HYPERTENSION_LABELS = ("D4-P", "D3-P", "D2-P", "D1-P", "D4-D1", "D4-D2", "D3-D1", "D3-D2")
HYPERTENSION_STATISTICS = (3.4434, 2.5085, 2.3642, -0.3543, 3.7651, 1.0900, 2.8340, 0.1930)
HYPERTENSION_PVALUES = (0.0008, 0.0135, 0.0197, 0.7237, 0.0003, 0.2779, 0.0054, 0.8473)

HYPERTENSION = MappingProxyType({
    "labels": HYPERTENSION_LABELS,
    "statistics": HYPERTENSION_STATISTICS,
    "pvalues": HYPERTENSION_PVALUES,
})


def hypertension_battery() -> TestBattery:
    """The trial contrasts in testing order.

    The reported p-values come from the trial's own analysis and are
    kept as given rather than recomputed from the statistics.
    """
    return TestBattery(
        statistics=np.array(HYPERTENSION_STATISTICS),
        pvalues=np.array(HYPERTENSION_PVALUES),
        labels=HYPERTENSION_LABELS,
    )
