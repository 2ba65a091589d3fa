"""Rival fairness metrics and the worked examples that trip them up.

Equalized odds and group precision both react to differences in the groups'
qualification mixes, which the outcome test is built to ignore. The fixture
helpers here make that disagreement reproducible: exact rationals for the
unit-mass examples, and seeded large-n ranking scenarios for the
equalized-odds pair.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations

import numpy as np

from .domain import Dataset
from .fixtures import EO_FIXTURES, FIXTURES
from .outcome_test import AuditReport, assign_bins, quantile_cuts
from .simulator import (BernoulliViewer, Calibrated, DiscreteQualification,
                        GroupSpec, InvertedForGroup, RankingAllocation,
                        ScenarioConfig, ThresholdViewer)

EQUALIZED_ODDS = "equalized_odds"
GROUP_PRECISION = "group_precision"
OUTCOME_TEST = "outcome_test"
# three-level and expected outcomes are binarized at this cut for equalized odds
POSITIVE_OUTCOME_CUT = 0.5


@dataclass(frozen=True)
class MetricVerdict:
    metric: str
    fair: bool
    tolerance: float
    detail: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"metric": self.metric, "fair": self.fair,
                "tolerance": self.tolerance, "detail": self.detail}

    @classmethod
    def from_dict(cls, d: dict) -> "MetricVerdict":
        return cls(d["metric"], bool(d["fair"]), float(d["tolerance"]), d["detail"])


# -- group precision -----------------------------------------------------


def group_precision(d: Dataset, positive_threshold: float | None = None) -> dict[str, float]:
    """Sum of outcomes over treated records divided by the treated count, per group.

    Outcomes need not be binary; expected outcomes are averaged as they are.
    ``positive_threshold`` re-derives treatment as ``score >= threshold``
    instead of using the dataset's treated flag. Groups with no treated
    records are left out.
    """
    treated = d.treated if positive_threshold is None else d.score >= positive_threshold
    treated = treated & d.has_outcome()
    labels = d.labels
    out = {}
    for g in d.group_labels:
        m = treated & (labels == g)
        k = int(m.sum())
        if k:
            out[g] = math.fsum(d.outcome[m]) / k
    return out


def precision_verdict(d: Dataset, tolerance: float = 0.01,
                      positive_threshold: float | None = None) -> MetricVerdict:
    prec = group_precision(d, positive_threshold)
    gaps = {f"{a}|{b}": abs(prec[a] - prec[b]) for a, b in combinations(prec, 2)}
    worst = max(gaps.values(), default=0.0)
    return MetricVerdict(GROUP_PRECISION, worst <= tolerance, tolerance,
                         {"precision": prec, "gaps": gaps, "max_gap": worst})


# -- equalized odds ------------------------------------------------------


def _tv(p: np.ndarray, q: np.ndarray) -> float:
    return 0.5 * float(np.abs(p - q).sum())


def equalized_odds_check(d: Dataset, n_score_bins: int = 10,
                         tolerance: float = 0.1) -> MetricVerdict:
    """Compare group score histograms conditional on the (binarized) outcome.

    Scores of treated records are cut into shared quantile bins. For each
    outcome value and each pair of groups present at that value, the total
    variation distance between the groups' histograms is computed. The
    verdict is fair iff the largest distance is within ``tolerance``.
    """
    rows = d.treated & d.has_outcome()
    y = (d.outcome[rows] >= POSITIVE_OUTCOME_CUT).astype(int)
    s = d.score[rows]
    labels = d.labels[rows]
    cuts = quantile_cuts(s, n_score_bins) if s.size else np.empty(0)
    k = len(cuts) + 1
    b = assign_bins(s, cuts)

    tv: dict[str, dict[str, float]] = {}
    hists: dict[str, dict[str, list[float]]] = {}
    skipped = []
    for r in (0, 1):
        key = f"Y={r}"
        hists[key] = {}
        for g in d.group_labels:
            m = (y == r) & (labels == g)
            if m.any():
                hists[key][g] = (np.bincount(b[m], minlength=k) / m.sum()).tolist()
            else:
                skipped.append(f"group {g} has no records with {key}")
        tv[key] = {f"{a}|{c}": _tv(np.array(hists[key][a]), np.array(hists[key][c]))
                   for a, c in combinations(hists[key], 2)}
    worst = max((v for per in tv.values() for v in per.values()), default=0.0)
    return MetricVerdict(EQUALIZED_ODDS, worst <= tolerance, tolerance, {
        "cuts": cuts.tolist(), "total_variation": tv, "max_total_variation": worst,
        "histograms": hists, "skipped": skipped,
    })


def outcome_test_verdict(report: AuditReport) -> MetricVerdict:
    detail = {
        "kind": report.kind,
        "reference": report.reference,
        "per_bin": [
            {"bin": r.bin.index,
             "coefficients": {} if r.fit is None else
             {t: v for t, v in r.fit.coefficients.items() if t.startswith("group[")},
             "p_values": {} if r.verdict is None else dict(r.verdict.p_values),
             "reject": None if r.verdict is None else r.verdict.reject}
            for r in report.bins
        ],
    }
    if report.biased_bonferroni is not None:
        detail["biased_bonferroni"] = report.biased_bonferroni
    return MetricVerdict(OUTCOME_TEST, not report.biased, report.level, detail)


# -- worked examples -----------------------------------------------------


def _decimal(x: Fraction) -> str:
    """Exact decimal text when ``x`` terminates, else the float repr."""
    den = x.denominator
    for p in (2, 5):
        while den % p == 0:
            den //= p
    if den != 1:
        return repr(float(x))
    digits = 0
    while (x * 10 ** digits).denominator != 1:
        digits += 1
    v = x * 10 ** digits
    sign = "-" if v < 0 else ""
    txt = str(abs(v.numerator)).rjust(digits + 1, "0")
    return sign + (txt[:-digits] + "." + txt[-digits:] if digits else txt)


@dataclass(frozen=True)
class GroupStats:
    treated_mass: int
    outcome_sum: Fraction
    conditional_mean: Fraction | None
    marginal_outcome: Fraction | None


@dataclass(frozen=True)
class DemoReport:
    fixture: str
    description: str
    groups: dict[str, GroupStats]

    @property
    def conditional_means(self) -> dict[str, Fraction | None]:
        return {g: s.conditional_mean for g, s in self.groups.items()}

    @property
    def marginal_outcomes(self) -> dict[str, Fraction | None]:
        return {g: s.marginal_outcome for g, s in self.groups.items()}

    def to_dict(self) -> dict:
        def frac(x):
            return None if x is None else {"fraction": str(x), "value": float(x)}
        return {
            "fixture": self.fixture,
            "description": self.description,
            "groups": {g: {"treated_mass": s.treated_mass,
                           "outcome_sum": frac(s.outcome_sum),
                           "conditional_mean": frac(s.conditional_mean),
                           "marginal_outcome": frac(s.marginal_outcome)}
                       for g, s in self.groups.items()},
        }

    def render(self) -> str:
        lines = [f"fixture {self.fixture}: {self.description}"]
        for g, s in self.groups.items():
            if s.conditional_mean is None:
                lines.append(f"  {g}: no treated candidates")
                continue
            mean = s.conditional_mean
            ratio = f"{_decimal(s.outcome_sum)}/{s.treated_mass}"
            reduced = "" if str(mean) == ratio else f" = {mean}"
            lines.append(f"  E(Y | treated, {g}) = {ratio}{reduced} = {_decimal(mean)}")
            lines.append(f"  marginal outcome {g}: E(Y | {g}, q = {_decimal(s.marginal_outcome)})"
                         f" = {_decimal(s.marginal_outcome)}")
        return "\n".join(lines)


def infra_marginality_demo(fixture: str) -> DemoReport:
    """Exact conditional means and marginal outcomes for a unit-mass fixture.

    With Y ~ Bernoulli(q) the expected outcome of a treated candidate is q, so
    the treated mean is a ratio of rationals and the marginal outcome is the
    lowest treated q.
    """
    try:
        fx = FIXTURES[fixture]
    except KeyError:
        raise KeyError(f"unknown fixture {fixture!r}; choose from {sorted(FIXTURES)}") from None
    stats = {}
    for g, table in fx.masses.items():
        hired = {q: m for q, m in table.items() if fx.treated(g, q)}
        mass = sum(hired.values())
        total = sum((q * m for q, m in hired.items()), Fraction(0))
        stats[g] = GroupStats(
            treated_mass=mass,
            outcome_sum=total,
            conditional_mean=total / mass if mass else None,
            marginal_outcome=min(hired) if hired else None,
        )
    return DemoReport(fixture, fx.description, stats)


def fixture_precision(fixture: str) -> dict[str, Fraction]:
    """Group precision of a unit-mass fixture as exact rationals."""
    return {g: s.conditional_mean for g, s in infra_marginality_demo(fixture).groups.items()
            if s.conditional_mean is not None}


def eo_population_tv(name: str) -> dict[str, Fraction]:
    """Population total-variation gap of equalized odds on an EO fixture.

    Computed exactly over distinct score values: for each outcome r, the
    distance between P(s | O, Y=r) and P(s | X, Y=r).
    """
    masses = EO_FIXTURES[name]
    dist: dict[int, dict[str, dict[Fraction, Fraction]]] = {0: {}, 1: {}}
    for g, table in masses.items():
        joint: dict[int, dict[Fraction, Fraction]] = {0: {}, 1: {}}
        for q, m in table.items():
            if name == "eo_fp":
                s, p1 = q, Fraction(int(q >= Fraction(3, 5)))
            else:
                s, p1 = (1 - q if g == "X" else q), q
            for r, p in ((1, p1), (0, 1 - p1)):
                if p:
                    joint[r][s] = joint[r].get(s, Fraction(0)) + m * p
        for r in (0, 1):
            tot = sum(joint[r].values(), Fraction(0))
            dist[r][g] = {s: v / tot for s, v in joint[r].items()}
    out = {}
    for r in (0, 1):
        a, b = dist[r]["O"], dist[r]["X"]
        out[f"Y={r}"] = sum((abs(a.get(s, 0) - b.get(s, 0)) for s in set(a) | set(b)),
                            Fraction(0)) / 2
    return out


def eo_scenario(name: str, n_queries: int = 10_000, candidates_per_query: int = 10,
                seed: int = 0) -> ScenarioConfig:
    """Ranking scenario for an equalized-odds counterexample.

    ``eo_fp``: calibrated scores, Y = 1(q >= 0.6), different qualification
    mixes (a fair ranker). ``eo_fn``: identical mixes, scores inverted for
    group X, Y ~ Bernoulli(q) (an unfair ranker). Every ranked candidate is
    impressed.
    """
    masses = EO_FIXTURES[name]
    groups = {g: GroupSpec(DiscreteQualification(tuple((float(q), m) for q, m in t.items())),
                           1.0 / len(masses))
              for g, t in masses.items()}
    if name == "eo_fp":
        scorer, viewer = Calibrated(), ThresholdViewer(0.6)
    else:
        scorer, viewer = InvertedForGroup("X"), BernoulliViewer()
    alloc = RankingAllocation(candidates_per_query, {candidates_per_query: 1.0})
    return ScenarioConfig(groups, scorer, viewer, alloc, n_queries, seed)


def compare_metrics(d: Dataset, report: AuditReport, *, eo_bins: int = 10,
                    eo_tolerance: float = 0.1,
                    precision_tolerance: float = 0.01) -> dict[str, MetricVerdict]:
    out = {EQUALIZED_ODDS: equalized_odds_check(d, eo_bins, eo_tolerance),
           GROUP_PRECISION: precision_verdict(d, precision_tolerance)}
    out[OUTCOME_TEST] = outcome_test_verdict(report)
    return out
