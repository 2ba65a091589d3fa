"""Bias-corrected counterfactual allocations.

Detected bias is translated into product terms by re-running the allocation
with predicted outcomes from the per-bin fits in place of the original
scores:

* classification: each job keeps its notification budget N_j, which goes to
  the N_j originally scored candidates with the highest predicted outcome;
* ranking: each query's impressed top N_j is re-ordered by predicted outcome.

These are quantification devices, not deployed mitigations.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .domain import CLASSIFICATION, RANKING, Dataset
from .estimation import SCORE
from .outcome_test import AuditReport

# how below-threshold classification records are predicted from the marginal fit
EXTRAPOLATE = "extrapolate"      # at their own score, however far below
AT_THRESHOLD = "at_threshold"    # at the threshold score (group effect only)
BELOW_THRESHOLD_POLICIES = (EXTRAPOLATE, AT_THRESHOLD)


@dataclass(frozen=True, eq=False)
class CorrectedPredictions:
    """Predicted outcomes aligned with the dataset rows.

    ``yhat`` is NaN where no prediction exists (an unfitted bin, or an
    impressed ranking record off the common support); those rows keep their
    original treatment in every counterfactual.
    """

    yhat: np.ndarray
    bin_index: np.ndarray
    unavailable: np.ndarray
    far_below_threshold: np.ndarray
    warnings: tuple[str, ...] = ()

    def as_dict(self, d: Dataset) -> dict[str, float]:
        ok = np.flatnonzero(~np.isnan(self.yhat))
        return {str(d.record_id[i]): float(self.yhat[i]) for i in ok}


def _cuts(report: AuditReport) -> np.ndarray:
    return np.array([b.bin.lower for b in report.bins[1:]], dtype=float)


def predict_corrected(d: Dataset, report: AuditReport,
                      below_threshold: str = EXTRAPOLATE) -> CorrectedPredictions:
    """Fitted outcome for every record the counterfactual may move.

    Classification: treated records use the fit of their score bin; scored
    but untreated records (below the threshold) use the marginal bin's fit.
    With ``below_threshold="extrapolate"`` that fit is evaluated at the
    record's own score, however far below; those more than one marginal-bin
    width below are flagged. ``"at_threshold"`` evaluates it at the threshold
    instead, so only the group effect separates them. Ranking: impressed
    records on the common support use their own bin's fit.
    """
    if report.kind != d.kind:
        raise ValueError("report kind does not match dataset kind")
    if below_threshold not in BELOW_THRESHOLD_POLICIES:
        raise ValueError(f"below_threshold must be one of {BELOW_THRESHOLD_POLICIES}")
    n = len(d)
    idx = np.searchsorted(_cuts(report), d.score, side="right")
    lo, hi = report.support
    if d.kind == CLASSIFICATION:
        eligible = np.ones(n, dtype=bool)
        marg = report.bins[0].bin
        thr = d.threshold if d.threshold is not None else marg.lower
        far = (d.score < thr) & (d.score < thr - marg.width)
    else:
        eligible = d.treated & (d.score >= lo) & (d.score <= hi)
        far = np.zeros(n, dtype=bool)

    yhat = np.full(n, np.nan)
    labels = d.labels
    at = d.score
    warnings = []
    if d.kind == CLASSIFICATION:
        below = d.score < thr
        if below_threshold == AT_THRESHOLD:
            at = np.where(below, thr, d.score)
        else:
            fit = report.bins[0].fit
            slope = fit.coefficients.get(SCORE) if fit is not None else None
            if below.any() and slope is not None and slope <= 0:
                warnings.append(
                    f"marginal-bin score slope is {slope:.4g} (<= 0): extrapolating it below "
                    f"the threshold ranks the lowest-scored candidates highest")
    for k, res in enumerate(report.bins):
        rows = eligible & (idx == k)
        if res.fit is None or not rows.any():
            continue
        yhat[rows] = res.fit.predict(labels[rows], at[rows])
    idx = np.where(eligible, idx, -1)
    return CorrectedPredictions(yhat, idx, np.isnan(yhat), far, tuple(warnings))


@dataclass(frozen=True)
class CounterfactualSummary:
    kind: str
    n_before: dict[str, int]
    n_after: dict[str, int]
    n_pct_delta: dict[str, float]
    y_before: float | None = None
    y_after: float | None = None          # predicted, not realized
    y_pct_delta: float | None = None
    mean_rank_before: dict[str, float] = field(default_factory=dict)
    mean_rank_after: dict[str, float] = field(default_factory=dict)
    mean_rank_delta: dict[str, float] = field(default_factory=dict)
    n_unavailable: int = 0
    n_far_below_threshold: int = 0
    warnings: tuple[str, ...] = ()
    allocation: np.ndarray | None = field(default=None, repr=False, compare=False)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "n_before": dict(self.n_before),
            "n_after": dict(self.n_after),
            "n_pct_delta": dict(self.n_pct_delta),
            "y_before": self.y_before,
            "y_after_predicted": self.y_after,
            "y_pct_delta": self.y_pct_delta,
            "mean_rank_before": dict(self.mean_rank_before),
            "mean_rank_after": dict(self.mean_rank_after),
            "mean_rank_delta": dict(self.mean_rank_delta),
            "n_unavailable": self.n_unavailable,
            "n_far_below_threshold": self.n_far_below_threshold,
            "warnings": list(self.warnings),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CounterfactualSummary":
        def nums(m):
            return {k: float("nan") if v is None else float(v) for k, v in m.items()}

        def opt(v):
            return None if v is None else float(v)

        return cls(
            kind=d["kind"],
            n_before={k: int(v) for k, v in d["n_before"].items()},
            n_after={k: int(v) for k, v in d["n_after"].items()},
            n_pct_delta=nums(d["n_pct_delta"]),
            y_before=opt(d["y_before"]),
            y_after=opt(d["y_after_predicted"]),
            y_pct_delta=opt(d["y_pct_delta"]),
            mean_rank_before=nums(d["mean_rank_before"]),
            mean_rank_after=nums(d["mean_rank_after"]),
            mean_rank_delta=nums(d["mean_rank_delta"]),
            n_unavailable=int(d["n_unavailable"]),
            n_far_below_threshold=int(d["n_far_below_threshold"]),
            warnings=tuple(d.get("warnings", ())),
        )


def _pct(after: float, before: float) -> float:
    return (after - before) / before * 100.0 if before else float("nan")


def _query_codes(d: Dataset) -> np.ndarray:
    return np.unique(d.query_id, return_inverse=True)[1].ravel()


def _position_within(keys_sorted_query: np.ndarray) -> np.ndarray:
    """0-based position of each element within its run of equal query codes."""
    n = keys_sorted_query.size
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    start = np.r_[True, keys_sorted_query[1:] != keys_sorted_query[:-1]]
    first = np.flatnonzero(start)
    return np.arange(n) - first[np.cumsum(start) - 1]


def reallocate_classification(d: Dataset, pred: CorrectedPredictions) -> CounterfactualSummary:
    """Hand each job's N_j notifications to its N_j best predicted candidates.

    Ties in predicted outcome go to the higher original score, then to the
    lexicographically smaller record_id. Records without a prediction are
    never promoted; if originally treated they keep their notification.
    """
    if d.kind != CLASSIFICATION:
        raise ValueError("reallocate_classification needs a classification dataset")
    job = _query_codes(d)
    n_jobs = int(job.max()) + 1 if job.size else 0
    budget = np.bincount(job, weights=d.treated, minlength=n_jobs).astype(np.int64)
    stuck = pred.unavailable & d.treated
    slots = budget - np.bincount(job, weights=stuck, minlength=n_jobs).astype(np.int64)

    avail = np.flatnonzero(~pred.unavailable)
    pool = np.bincount(job[avail], minlength=n_jobs)
    assert np.all(slots <= pool), "a job has fewer scored candidates than notifications"
    order = avail[np.lexsort((d.record_id[avail], -d.score[avail], -pred.yhat[avail], job[avail]))]
    pos = _position_within(job[order])
    after = stuck.copy()
    after[order[pos < slots[job[order]]]] = True

    labels = d.labels
    n_before = {g: int(np.sum(d.treated & (labels == g))) for g in d.group_labels}
    n_after = {g: int(np.sum(after & (labels == g))) for g in d.group_labels}
    y_before = float(np.sum(d.outcome[d.treated]))
    moved = after & ~pred.unavailable
    y_after = float(np.sum(pred.yhat[moved]) + np.sum(d.outcome[stuck]))
    return CounterfactualSummary(
        kind=CLASSIFICATION,
        n_before=n_before,
        n_after=n_after,
        n_pct_delta={g: _pct(n_after[g], n_before[g]) for g in n_before},
        y_before=y_before,
        y_after=y_after,
        y_pct_delta=_pct(y_after, y_before),
        n_unavailable=int(pred.unavailable.sum()),
        n_far_below_threshold=int(pred.far_below_threshold.sum()),
        warnings=pred.warnings,
        allocation=after,
    )


def rerank_ranking(d: Dataset, pred: CorrectedPredictions) -> CounterfactualSummary:
    """Re-order each query's impressed candidates by predicted outcome.

    Only the originally impressed top N_j take part. Records without a
    prediction stay in their slot; the rest are permuted over the remaining
    slots. Ties follow the same rule as :func:`reallocate_classification`.
    """
    if d.kind != RANKING:
        raise ValueError("rerank_ranking needs a ranking dataset")
    impressed = d.treated & (d.rank > 0)
    q = _query_codes(d)
    rank_after = np.where(impressed, d.rank, 0)

    movable = np.flatnonzero(impressed & ~pred.unavailable)
    by_slot = movable[np.lexsort((d.rank[movable], q[movable]))]
    by_pred = movable[np.lexsort((d.record_id[movable], -d.score[movable],
                                  -pred.yhat[movable], q[movable]))]
    rank_after[by_pred] = d.rank[by_slot]

    labels = d.labels
    before, after, delta, counts = {}, {}, {}, {}
    for g in d.group_labels:
        m = impressed & (labels == g)
        counts[g] = int(m.sum())
        before[g] = float(d.rank[m].mean()) if counts[g] else float("nan")
        after[g] = float(rank_after[m].mean()) if counts[g] else float("nan")
        delta[g] = after[g] - before[g]
    return CounterfactualSummary(
        kind=RANKING,
        n_before=counts,
        n_after=dict(counts),
        n_pct_delta={g: 0.0 if counts[g] else float("nan") for g in counts},
        mean_rank_before=before,
        mean_rank_after=after,
        mean_rank_delta=delta,
        n_unavailable=int((pred.unavailable & impressed).sum()),
        warnings=pred.warnings,
        allocation=rank_after,
    )


def counterfactual(d: Dataset, report: AuditReport,
                   below_threshold: str = EXTRAPOLATE) -> CounterfactualSummary:
    pred = predict_corrected(d, report, below_threshold)
    if d.kind == CLASSIFICATION:
        return reallocate_classification(d, pred)
    return rerank_ranking(d, pred)
