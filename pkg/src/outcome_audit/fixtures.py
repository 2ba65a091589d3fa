"""Unit-mass toy marketplaces used as exact oracles.

Each fixture lists, per group, how many unit-mass candidates sit at each
true-qualification value. Where the worked examples only pin the masses at
or above the hiring bar, the masses below it are filled in so that both
groups have equal total mass; they never enter any conditional mean.

Qualifications are exact :class:`~fractions.Fraction` values so that the
derived statistics are exact rationals.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction as F
from typing import Mapping

from .domain import CLASSIFICATION, CONTINUOUS, AuditRecord, Dataset


def _masses(pairs) -> dict[F, int]:
    return {F(q): m for q, m in pairs}


@dataclass(frozen=True)
class Fixture:
    """Group mass tables plus the decision rule applied to them.

    ``score_shift[g]`` maps qualification to score as ``s = q - shift``;
    ``bar[g]`` is the per-group treatment bar on the *score*.
    """

    name: str
    masses: Mapping[str, Mapping[F, int]]
    bar: Mapping[str, F]
    score_shift: Mapping[str, F]
    description: str

    def score(self, group: str, q: F) -> F:
        return q - self.score_shift.get(group, F(0))

    def treated(self, group: str, q: F) -> bool:
        return self.score(group, q) >= self.bar[group]


_FIG1_O = _masses([("0.2", 6), ("0.4", 4), ("0.6", 2), ("0.8", 1), ("1", 1)])
_FIG1_X = _masses([("0.4", 2), ("0.6", 4), ("0.8", 5), ("1", 3)])
_FIG2_X = _masses([("0.4", 2), ("0.6", 3), ("0.8", 4), ("1", 5)])

FIXTURES: dict[str, Fixture] = {
    "fig1": Fixture(
        "fig1", {"O": _FIG1_O, "X": _FIG1_X},
        bar={"O": F("0.6"), "X": F("0.6")}, score_shift={},
        description="fair hiring rule q >= 0.6, different qualification mixes"),
    "fig2": Fixture(
        "fig2", {"O": _FIG1_O, "X": _FIG2_X},
        bar={"O": F("0.6"), "X": F("0.6")}, score_shift={},
        description="same fair rule, X's qualification mix shifted up"),
    "fig3": Fixture(
        "fig3",
        {"O": _masses([("0.2", 4), ("0.4", 3), ("0.6", 3), ("0.8", 2), ("1", 2)]),
         "X": _masses([("0.2", 1), ("0.4", 3), ("0.6", 3), ("0.8", 4), ("1", 3)])},
        bar={"O": F("0.4"), "X": F("0.8")}, score_shift={},
        description="biased rule: O treated from q >= 0.4, X only from q >= 0.8"),
    "precision_fp": Fixture(
        "precision_fp", {"O": _FIG1_O, "X": _FIG1_X},
        bar={"O": F("0.6"), "X": F("0.6")}, score_shift={},
        description="calibrated scores s = q, common threshold 0.6 (fair)"),
    "precision_fn": Fixture(
        "precision_fn",
        {"O": _masses([("0.2", 2), ("0.4", 4), ("0.6", 1), ("0.8", 1), ("1", 4)]),
         "X": _masses([("0.4", 2), ("0.6", 4), ("0.8", 3), ("1", 3)])},
        bar={"O": F("0.6"), "X": F("0.6")}, score_shift={"X": F("0.2")},
        description="X under-scored by 0.2 (s = q - 0.2), common threshold 0.6 (unfair)"),
}

# Ranking fixtures for the equalized-odds counterexamples: qualification
# masses only; scorer and viewer are attached by ``baselines.eo_scenario``.
EO_FIXTURES: dict[str, Mapping[str, Mapping[F, int]]] = {
    "eo_fp": {"O": _FIG1_O, "X": _FIG1_X},
    "eo_fn": {"O": _masses([("0.4", 1), ("0.6", 1)]),
              "X": _masses([("0.4", 1), ("0.6", 1)])},
}


def fixture_dataset(name: str) -> Dataset:
    """Expand a fixture into a classification dataset, one record per unit mass.

    Treated records carry their *expected* outcome (Y = q), so the dataset's
    outcome scale is continuous.
    """
    fx = FIXTURES[name]
    records = []
    k = 0
    for g, table in fx.masses.items():
        for q, m in sorted(table.items()):
            for _ in range(m):
                t = fx.treated(g, q)
                records.append(AuditRecord(
                    record_id=f"{name}-{k:03d}", query_id=name, group=g,
                    score=float(fx.score(g, q)), treated=t,
                    outcome=float(q) if t else None, true_qualification=float(q)))
                k += 1
    # group-specific bars (fig3) are recorded with the lowest one as threshold
    threshold = float(min(fx.bar.values()))
    return Dataset.from_records(records, CLASSIFICATION, threshold=threshold,
                                outcome_scale=CONTINUOUS, groups=list(fx.masses))
