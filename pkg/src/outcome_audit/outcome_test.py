"""Outcome test for pointwise classifiers and rankers.

Treated (notified or impressed) records are split into score quantile bins.
Within each bin, realized outcomes are regressed on group dummies with a
linear score control. A group dummy that is significantly positive means the
scorer under-predicts that group's outcomes relative to the reference group
at the same score.

Classification verdicts come from the marginal bin, the lowest bin above the
threshold. Ranking verdicts consider every bin over the common support of
scores.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .domain import CLASSIFICATION, RANKING, Dataset, ScoreBin
from .estimation import (DesignSpec, RegressionFit, SingularDesignError,
                         fit_ols, group_term)

DEFAULT_BINS = 10
DEFAULT_LEVEL = 0.05
LOW_POWER_COUNT = 30
# bins whose scores span less than this are fitted without the score slope
MIN_SCORE_SPREAD = 1e-9


class OffSupportError(ValueError):
    def __init__(self, groups, support):
        self.groups = list(groups)
        self.support = support
        super().__init__(f"no common score support: group(s) {self.groups} do not "
                         f"overlap the others (support {support})")


class AuditError(ValueError):
    pass


def quantile_cuts(scores: np.ndarray, n_bins: int) -> np.ndarray:
    """Interior cut points: the upper empirical quantiles at k/n_bins.

    Cuts are actual score values, de-duplicated, and strictly above the
    minimum so that the lowest bin is never empty.
    """
    if n_bins < 2:
        raise ValueError("n_bins must be at least 2")
    scores = np.asarray(scores, dtype=float)
    if scores.size == 0:
        return np.empty(0)
    probs = np.arange(1, n_bins) / n_bins
    cuts = np.unique(np.quantile(scores, probs, method="higher"))
    return cuts[cuts > scores.min()]


def assign_bins(scores: np.ndarray, cuts: np.ndarray) -> np.ndarray:
    """Bin index = number of cuts <= score (half-open ``[lower, upper)`` bins)."""
    return np.searchsorted(cuts, scores, side="right")


def make_bins(lower: float, upper: float, cuts: np.ndarray,
              marginal: bool = False) -> tuple[ScoreBin, ...]:
    edges = [lower, *cuts.tolist(), upper]
    k = len(edges) - 1
    return tuple(
        ScoreBin(i, float(edges[i]), float(edges[i + 1]),
                 is_marginal=marginal and i == 0, closed=i == k - 1)
        for i in range(k)
    )


@dataclass(frozen=True, eq=False)
class BinnedDataset:
    kind: str
    bins: tuple[ScoreBin, ...]
    assignment: np.ndarray  # bin index per record, -1 when not binned
    support: tuple[float, float]
    excluded_off_support: int
    cuts: np.ndarray = field(repr=False)

    def as_mapping(self, d: Dataset) -> dict[str, int]:
        idx = np.flatnonzero(self.assignment >= 0)
        return {str(d.record_id[i]): int(self.assignment[i]) for i in idx}

    def bin_of(self, scores: np.ndarray) -> np.ndarray:
        return assign_bins(np.asarray(scores, dtype=float), self.cuts)


def common_support(d: Dataset, mask: np.ndarray) -> tuple[float, float]:
    """Intersection over groups of [min score, max score] among ``mask``."""
    present = [g for g in d.groups if np.any(mask & (d.group == g.index))]
    if len(present) < 2:
        raise AuditError("the outcome test needs treated records from at least two groups")
    lows, highs = {}, {}
    for g in present:
        s = d.score[mask & (d.group == g.index)]
        lows[g.label], highs[g.label] = float(s.min()), float(s.max())
    lo, hi = max(lows.values()), min(highs.values())
    missing = [g.label for g in d.groups if g not in present]
    if lo > hi:
        off = [g for g in lows if highs[g] < lo or lows[g] > hi]
        raise OffSupportError(missing + off, (lo, hi))
    if missing:
        raise OffSupportError(missing, (lo, hi))
    return lo, hi


def bin_scores(d: Dataset, n_bins: int = DEFAULT_BINS) -> BinnedDataset:
    """Split treated records into score quantile bins.

    Classification: quantiles of all treated scores, lowest bin marginal.
    Ranking: quantiles over the common support; impressed records outside it
    are excluded and counted.
    """
    if n_bins < 2:
        raise ValueError("n_bins must be at least 2")
    eligible = d.treated & d.has_outcome()
    excluded = 0
    if d.kind == CLASSIFICATION:
        groups_present = np.unique(d.group[eligible])
        if groups_present.size < 2:
            raise AuditError("the outcome test needs treated records from at least two groups")
        s = d.score[eligible]
        lo = float(s.min()) if d.threshold is None else min(float(d.threshold), float(s.min()))
        hi = float(s.max())
        inside = eligible
    elif d.kind == RANKING:
        lo, hi = common_support(d, eligible)
        inside = eligible & (d.score >= lo) & (d.score <= hi)
        excluded = int(eligible.sum() - inside.sum())
    else:
        raise ValueError(f"unknown dataset kind {d.kind!r}")

    cuts = quantile_cuts(d.score[inside], n_bins)
    assignment = np.full(len(d), -1, dtype=np.int64)
    assignment[inside] = assign_bins(d.score[inside], cuts)
    bins = make_bins(lo, hi, cuts, marginal=d.kind == CLASSIFICATION)
    return BinnedDataset(d.kind, bins, assignment, (lo, hi), excluded, cuts)


@dataclass(frozen=True)
class Verdict:
    reject: bool
    level: float
    p_values: dict[str, float]
    adjusted_p_values: dict[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class BinResult:
    bin: ScoreBin
    n_by_group: dict[str, int]
    mean_by_group: dict[str, float]
    mean_outcome: float
    score_control: bool
    fit: RegressionFit | None = None
    error: str | None = None
    verdict: Verdict | None = None
    disadvantaged_groups: tuple[str, ...] = ()
    low_power_groups: tuple[str, ...] = ()
    collinear: tuple[str, ...] = ()

    @property
    def tested(self) -> bool:
        return self.fit is not None

    def to_dict(self) -> dict:
        return {
            "bin": asdict(self.bin),
            "n_by_group": dict(self.n_by_group),
            "mean_by_group": dict(self.mean_by_group),
            "mean_outcome": self.mean_outcome,
            "score_control": self.score_control,
            "fit": None if self.fit is None else self.fit.to_dict(),
            "error": self.error,
            "verdict": None if self.verdict is None else asdict(self.verdict),
            "disadvantaged_groups": list(self.disadvantaged_groups),
            "low_power_groups": list(self.low_power_groups),
            "collinear": list(self.collinear),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BinResult":
        return cls(
            bin=ScoreBin(**d["bin"]),
            n_by_group={k: int(v) for k, v in d["n_by_group"].items()},
            mean_by_group={k: _num(v) for k, v in d["mean_by_group"].items()},
            mean_outcome=_num(d["mean_outcome"]),
            score_control=bool(d["score_control"]),
            fit=None if d["fit"] is None else RegressionFit.from_dict(d["fit"]),
            error=d["error"],
            verdict=None if d["verdict"] is None else Verdict(**d["verdict"]),
            disadvantaged_groups=tuple(d["disadvantaged_groups"]),
            low_power_groups=tuple(d["low_power_groups"]),
            collinear=tuple(d.get("collinear", ())),
        )


def _num(v) -> float:
    return float("nan") if v is None else float(v)


@dataclass(frozen=True)
class AuditReport:
    kind: str
    reference: str
    level: float
    covariance: str
    bins: tuple[BinResult, ...]
    support: tuple[float, float]
    excluded_off_support: int
    biased: bool
    marginal_verdict: Verdict | None = None
    biased_bonferroni: bool | None = None
    warnings: tuple[str, ...] = ()

    @property
    def marginal(self) -> BinResult | None:
        for b in self.bins:
            if b.bin.is_marginal:
                return b
        return None

    @property
    def per_bin_verdicts(self) -> tuple[Verdict | None, ...]:
        return tuple(b.verdict for b in self.bins)

    @property
    def disadvantaged_groups(self) -> dict[int, tuple[str, ...]]:
        return {b.bin.index: b.disadvantaged_groups for b in self.bins}

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "reference": self.reference,
            "level": self.level,
            "covariance": self.covariance,
            "support": list(self.support),
            "excluded_off_support": self.excluded_off_support,
            "biased": self.biased,
            "biased_bonferroni": self.biased_bonferroni,
            "marginal_verdict": None if self.marginal_verdict is None
            else asdict(self.marginal_verdict),
            "warnings": list(self.warnings),
            "bins": [b.to_dict() for b in self.bins],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AuditReport":
        return cls(
            kind=d["kind"],
            reference=d["reference"],
            level=float(d["level"]),
            covariance=d["covariance"],
            bins=tuple(BinResult.from_dict(b) for b in d["bins"]),
            support=tuple(float(x) for x in d["support"]),
            excluded_off_support=int(d["excluded_off_support"]),
            biased=bool(d["biased"]),
            marginal_verdict=None if d["marginal_verdict"] is None
            else Verdict(**d["marginal_verdict"]),
            biased_bonferroni=d["biased_bonferroni"],
            warnings=tuple(d["warnings"]),
        )


def _fit_bin(d: Dataset, binned: BinnedDataset, b: ScoreBin, reference: str,
             level: float, covariance: str) -> BinResult:
    mask = binned.assignment == b.index
    labels = d.labels[mask]
    y = d.outcome[mask]
    s = d.score[mask]
    n_by = {g: int(np.sum(labels == g)) for g in d.group_labels}
    mean_by = {g: float(y[labels == g].mean()) if n_by[g] else float("nan")
               for g in d.group_labels}
    mean_all = float(y.mean()) if y.size else float("nan")
    spread = float(np.ptp(s)) if s.size else 0.0
    spec = DesignSpec(reference, tuple(g for g in d.group_labels if g != reference),
                      include_score_control=spread > MIN_SCORE_SPREAD)
    low = tuple(g for g, k in n_by.items() if k < LOW_POWER_COUNT)
    base = dict(bin=b, n_by_group=n_by, mean_by_group=mean_by, mean_outcome=mean_all,
                score_control=spec.include_score_control, low_power_groups=low)
    if y.size == 0:
        return BinResult(**base, error="empty bin")
    try:
        fit = fit_ols(y, labels, s, spec, covariance=covariance)
    except SingularDesignError as exc:
        return BinResult(**base, error=str(exc), collinear=tuple(exc.columns))
    terms = [group_term(g) for g in spec.groups_in_order]
    pv = {t: fit.p_values[t] for t in terms}
    verdict = Verdict(any(p < level for p in pv.values()), level, pv)
    worse = tuple(g for g in spec.groups_in_order
                  if fit.p_values[group_term(g)] < level and fit.coefficients[group_term(g)] > 0)
    return BinResult(**base, fit=fit, verdict=verdict, disadvantaged_groups=worse)


def _check_reference(d: Dataset, reference: str | None) -> str:
    if reference is None:
        return d.group_labels[0]
    if reference not in d.group_labels:
        raise AuditError(f"reference group {reference!r} not in dataset groups {d.group_labels}")
    return reference


def audit_classification(d: Dataset, n_bins: int = DEFAULT_BINS, reference: str | None = None,
                         level: float = DEFAULT_LEVEL, covariance: str = "HC1") -> AuditReport:
    """Outcome test for a threshold classifier.

    Every treated decile is fitted (the full table is informational); the
    verdict is that of the marginal bin, which rejects if any group dummy is
    significant at ``level``. A singular marginal design raises.
    """
    if d.kind != CLASSIFICATION:
        raise AuditError("audit_classification needs a classification dataset")
    reference = _check_reference(d, reference)
    binned = bin_scores(d, n_bins)
    results = tuple(_fit_bin(d, binned, b, reference, level, covariance) for b in binned.bins)
    marginal = results[0]
    if marginal.fit is None:
        raise SingularDesignError(
            marginal.collinear,
            context=f"marginal bin 0 [{marginal.bin.lower}, {marginal.bin.upper}) "
                    f"with group counts {marginal.n_by_group}")
    warnings = []
    means = [r.mean_outcome for r in results]
    if any(b < a for a, b in zip(means, means[1:])):
        warnings.append("non-monotonic outcomes: mean outcome decreases across score bins "
                        f"{[round(m, 6) for m in means]}")
    for r in results[1:]:
        if r.error:
            warnings.append(f"bin {r.bin.index} not fitted: {r.error}")
    warnings.append("standard errors are record-level (not clustered by query)")
    return AuditReport(
        kind=CLASSIFICATION, reference=reference, level=level, covariance=covariance,
        bins=results, support=binned.support, excluded_off_support=0,
        biased=marginal.verdict.reject, marginal_verdict=marginal.verdict,
        warnings=tuple(warnings),
    )


def audit_ranking(d: Dataset, n_bins: int = DEFAULT_BINS, reference: str | None = None,
                  level: float = DEFAULT_LEVEL, covariance: str = "HC1") -> AuditReport:
    """Outcome test for a pointwise ranker over the common score support.

    Bins that cannot be fitted (empty, or a group missing) are skipped and
    flagged. Each tested bin carries raw p-values and Bonferroni-adjusted
    ones (multiplied by the number of tests across all tested bins).
    """
    if d.kind != RANKING:
        raise AuditError("audit_ranking needs a ranking dataset")
    reference = _check_reference(d, reference)
    binned = bin_scores(d, n_bins)
    raw = [_fit_bin(d, binned, b, reference, level, covariance) for b in binned.bins]
    tested = [r for r in raw if r.tested]
    if not tested:
        raise AuditError("no score bin could be tested: " +
                         "; ".join(f"bin {r.bin.index}: {r.error}" for r in raw))
    m = sum(len(r.verdict.p_values) for r in tested)
    results = []
    for r in raw:
        if r.verdict is not None:
            adj = {t: min(1.0, p * m) for t, p in r.verdict.p_values.items()}
            r = replace(r, verdict=replace(r.verdict, adjusted_p_values=adj))
        results.append(r)
    warnings = [f"bin {r.bin.index} skipped: {r.error}" for r in results if r.error]
    warnings.append("standard errors are record-level (not clustered by query)")
    biased = any(r.verdict.reject for r in results if r.verdict)
    biased_adj = any(p < level for r in results if r.verdict
                     for p in r.verdict.adjusted_p_values.values())
    return AuditReport(
        kind=RANKING, reference=reference, level=level, covariance=covariance,
        bins=tuple(results), support=binned.support,
        excluded_off_support=binned.excluded_off_support,
        biased=biased, biased_bonferroni=biased_adj, warnings=tuple(warnings),
    )


def audit(d: Dataset, n_bins: int = DEFAULT_BINS, reference: str | None = None,
          level: float = DEFAULT_LEVEL, covariance: str = "HC1") -> AuditReport:
    fn = audit_classification if d.kind == CLASSIFICATION else audit_ranking
    return fn(d, n_bins=n_bins, reference=reference, level=level, covariance=covariance)
