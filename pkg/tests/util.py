"""Scenario builders shared by the test modules."""

from __future__ import annotations

from outcome_audit.simulator import (BernoulliViewer, BetaQualification,
                                     Calibrated, ClassificationAllocation,
                                     GroupShift, GroupSpec, RankingAllocation,
                                     ScenarioConfig, simulate)


def two_group(kind="classification", shift=0.0, n_queries=1000, seed=0, m=10,
              threshold=0.5, depth=None, viewer=None):
    """Two equally sized Beta(2, 2) groups A and B; B under-scored by ``shift``."""
    groups = {"A": GroupSpec(BetaQualification(2, 2), 0.5),
              "B": GroupSpec(BetaQualification(2, 2), 0.5)}
    scorer = GroupShift({"B": shift}) if shift else Calibrated()
    if kind == "classification":
        alloc = ClassificationAllocation(threshold, m)
    else:
        alloc = RankingAllocation(m, depth)
    return ScenarioConfig(groups, scorer, viewer or BernoulliViewer(), alloc, n_queries, seed)


def sim(**kw):
    return simulate(two_group(**kw))
