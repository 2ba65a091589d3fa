"""Shared domain types: groups, audit records, datasets and score bins.

A :class:`Dataset` is stored column-wise (one numpy array per field) because
audits routinely run over 10^5+ candidate-query pairs. Individual
:class:`AuditRecord` views are available through :meth:`Dataset.records`.
Absent optional values are encoded as ``NaN`` (outcome, true qualification)
and ``0`` (rank).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

CLASSIFICATION = "classification"
RANKING = "ranking"
KINDS = (CLASSIFICATION, RANKING)

# outcome_scale declares which outcome values are legal
BERNOULLI = "bernoulli"          # {0, 1}
THREE_LEVEL = "three_level"      # {0, alpha, 1}
CONTINUOUS = "continuous"        # anywhere in [0, 1] (expected outcomes)
OUTCOME_SCALES = (BERNOULLI, THREE_LEVEL, CONTINUOUS)


@dataclass(frozen=True, order=True)
class GroupId:
    index: int
    label: str

    def __str__(self) -> str:
        return self.label


@dataclass(frozen=True)
class AuditRecord:
    """One scored candidate-query pair."""

    record_id: str
    query_id: str
    group: str
    score: float
    treated: bool
    outcome: float | None = None
    true_qualification: float | None = None
    rank: int | None = None


@dataclass(frozen=True)
class Violation:
    record_id: str | None
    invariant: str
    message: str


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """Column-oriented collection of audit records plus dataset metadata.

    ``group`` holds integer codes indexing into ``groups``. Arrays are copied
    and made read-only on construction; the instance is safe to share.
    """

    record_id: np.ndarray
    query_id: np.ndarray
    group: np.ndarray
    score: np.ndarray
    treated: np.ndarray
    outcome: np.ndarray
    true_qualification: np.ndarray
    rank: np.ndarray
    groups: tuple[GroupId, ...]
    kind: str = CLASSIFICATION
    threshold: float | None = None
    objective_alpha: float | None = None
    outcome_scale: str = BERNOULLI

    def __post_init__(self):
        conv = {
            "record_id": lambda a: np.asarray(a, dtype=str),
            "query_id": lambda a: np.asarray(a, dtype=str),
            "group": lambda a: np.asarray(a, dtype=np.int64),
            "score": lambda a: np.asarray(a, dtype=np.float64),
            "treated": lambda a: np.asarray(a, dtype=bool),
            "outcome": lambda a: np.asarray(a, dtype=np.float64),
            "true_qualification": lambda a: np.asarray(a, dtype=np.float64),
            "rank": lambda a: np.asarray(a, dtype=np.int64),
        }
        for name, fn in conv.items():
            object.__setattr__(self, name, _frozen(fn(getattr(self, name))))
        object.__setattr__(self, "groups", tuple(self.groups))

    # -- construction -----------------------------------------------------

    @classmethod
    def from_records(
        cls,
        records: Iterable[AuditRecord],
        kind: str = CLASSIFICATION,
        *,
        threshold: float | None = None,
        objective_alpha: float | None = None,
        outcome_scale: str = BERNOULLI,
        groups: Sequence[str] | None = None,
    ) -> "Dataset":
        records = list(records)
        if groups is None:
            groups = sorted({r.group for r in records})
        group_ids = tuple(GroupId(i, g) for i, g in enumerate(groups))
        code = {g.label: g.index for g in group_ids}
        nan = float("nan")
        return cls(
            record_id=[r.record_id for r in records],
            query_id=[r.query_id for r in records],
            group=[code.get(r.group, -1) for r in records],
            score=[r.score for r in records],
            treated=[r.treated for r in records],
            outcome=[nan if r.outcome is None else r.outcome for r in records],
            true_qualification=[
                nan if r.true_qualification is None else r.true_qualification
                for r in records
            ],
            rank=[0 if r.rank is None else r.rank for r in records],
            groups=group_ids,
            kind=kind,
            threshold=threshold,
            objective_alpha=objective_alpha,
            outcome_scale=outcome_scale,
        )

    # -- access -----------------------------------------------------------

    def __len__(self) -> int:
        return len(self.record_id)

    @property
    def group_labels(self) -> tuple[str, ...]:
        return tuple(g.label for g in self.groups)

    @property
    def labels(self) -> np.ndarray:
        """Per-record group label (``'?'`` for out-of-range codes)."""
        names = np.array(list(self.group_labels) + ["?"], dtype=str)
        codes = np.where((self.group >= 0) & (self.group < len(self.groups)),
                         self.group, len(self.groups))
        return names[codes]

    def group_index(self, label: str) -> int:
        for g in self.groups:
            if g.label == label:
                return g.index
        raise KeyError(f"unknown group {label!r}; known: {list(self.group_labels)}")

    def record(self, i: int) -> AuditRecord:
        outcome = self.outcome[i]
        q = self.true_qualification[i]
        rank = int(self.rank[i])
        return AuditRecord(
            record_id=str(self.record_id[i]),
            query_id=str(self.query_id[i]),
            group=str(self.labels[i]),
            score=float(self.score[i]),
            treated=bool(self.treated[i]),
            outcome=None if np.isnan(outcome) else float(outcome),
            true_qualification=None if np.isnan(q) else float(q),
            rank=rank if rank > 0 else None,
        )

    def records(self) -> Iterator[AuditRecord]:
        for i in range(len(self)):
            yield self.record(i)

    def has_outcome(self) -> np.ndarray:
        return ~np.isnan(self.outcome)

    def with_columns(self, **changes) -> "Dataset":
        """Copy with some columns or metadata replaced."""
        fields = {
            name: getattr(self, name)
            for name in ("record_id", "query_id", "group", "score", "treated",
                         "outcome", "true_qualification", "rank", "groups",
                         "kind", "threshold", "objective_alpha", "outcome_scale")
        }
        fields.update(changes)
        return Dataset(**fields)

    def equals(self, other: "Dataset") -> bool:
        """Field-for-field equality (NaN equal to NaN)."""
        if not isinstance(other, Dataset):
            return False
        meta = ("groups", "kind", "threshold", "objective_alpha", "outcome_scale")
        if any(getattr(self, m) != getattr(other, m) for m in meta):
            return False
        for name in ("record_id", "query_id", "group", "treated", "rank"):
            if not np.array_equal(getattr(self, name), getattr(other, name)):
                return False
        for name in ("score", "outcome", "true_qualification"):
            if not np.array_equal(getattr(self, name), getattr(other, name),
                                  equal_nan=True):
                return False
        return True


@dataclass(frozen=True)
class ScoreBin:
    """Score interval ``[lower, upper)``; the top bin is closed ``[lower, upper]``.

    A top bin holding a single point mass has ``lower == upper``.
    """

    index: int
    lower: float
    upper: float
    is_marginal: bool = False
    closed: bool = False

    def contains(self, s: float) -> bool:
        if self.closed:
            return self.lower <= s <= self.upper
        return self.lower <= s < self.upper

    @property
    def width(self) -> float:
        return self.upper - self.lower


@dataclass(frozen=True)
class _Check:
    invariant: str
    bad: np.ndarray = field(repr=False)
    message: str = ""


def _outcome_levels(d: Dataset) -> np.ndarray | None:
    if d.outcome_scale == BERNOULLI:
        return np.array([0.0, 1.0])
    if d.outcome_scale == THREE_LEVEL and d.objective_alpha is not None:
        return np.array([0.0, d.objective_alpha, 1.0])
    return None


def validate_dataset(d: Dataset) -> list[Violation]:
    """Return every broken invariant of ``d``; an empty list means valid.

    Never raises: malformed datasets produce violations, not exceptions.
    """
    out: list[Violation] = []
    try:
        _validate(d, out)
    except Exception as exc:  # validation must stay total
        out.append(Violation(None, "well-formed", f"dataset could not be inspected: {exc!r}"))
    return out


def _validate(d: Dataset, out: list[Violation]) -> None:
    n = len(d.record_id)
    cols = ("query_id", "group", "score", "treated", "outcome",
            "true_qualification", "rank")
    lengths = {c: len(getattr(d, c)) for c in cols}
    if any(v != n for v in lengths.values()):
        out.append(Violation(None, "column-lengths",
                             f"columns disagree in length: record_id={n}, {lengths}"))
        return

    if d.kind not in KINDS:
        out.append(Violation(None, "kind", f"unknown dataset kind {d.kind!r}"))
    if d.outcome_scale not in OUTCOME_SCALES:
        out.append(Violation(None, "outcome-scale", f"unknown outcome scale {d.outcome_scale!r}"))
    if d.outcome_scale == THREE_LEVEL and not (
            d.objective_alpha is not None and 0 < d.objective_alpha < 1):
        out.append(Violation(None, "objective-alpha",
                             "three-level outcomes need objective_alpha in (0, 1)"))

    labels = [g.label for g in d.groups]
    if len(set(labels)) != len(labels):
        out.append(Violation(None, "unique-group-labels", f"duplicate group labels in {labels}"))
    if [g.index for g in d.groups] != list(range(len(d.groups))):
        out.append(Violation(None, "group-index", "group indices must be 0..G-1 in order"))

    ids, counts = np.unique(d.record_id, return_counts=True)
    for rid in ids[counts > 1]:
        out.append(Violation(str(rid), "unique-record-id", "record_id occurs more than once"))

    has_y = ~np.isnan(d.outcome)
    checks = [
        _Check("group-membership", (d.group < 0) | (d.group >= len(d.groups)),
               "group code does not name a declared group"),
        _Check("score-range", ~((d.score >= 0) & (d.score <= 1)), "score outside [0, 1]"),
        _Check("outcome-presence", has_y != d.treated,
               "outcome must be present if and only if the record is treated"),
        _Check("qualification-range",
               ~np.isnan(d.true_qualification)
               & ~((d.true_qualification >= 0) & (d.true_qualification <= 1)),
               "true_qualification outside [0, 1]"),
        _Check("rank-positive", d.rank < 0, "rank must be a positive integer"),
        _Check("rank-treated", (d.rank > 0) & ~d.treated, "untreated record carries a rank"),
    ]
    levels = _outcome_levels(d)
    if levels is not None:
        ok = np.isclose(d.outcome[:, None], levels[None, :], rtol=0, atol=1e-12).any(axis=1)
        checks.append(_Check("outcome-levels", has_y & ~ok,
                             f"outcome not in {levels.tolist()} ({d.outcome_scale})"))
    else:
        checks.append(_Check("outcome-range", has_y & ~((d.outcome >= 0) & (d.outcome <= 1)),
                             "outcome outside [0, 1]"))

    if d.kind == CLASSIFICATION:
        if d.threshold is None:
            out.append(Violation(None, "threshold", "classification dataset needs a threshold"))
        else:
            checks.append(_Check("treated-above-threshold",
                                 d.treated & (d.score < d.threshold),
                                 f"treated record scored below threshold {d.threshold}"))
    elif d.kind == RANKING:
        checks.append(_Check("ranked-treatment", d.treated & (d.rank <= 0),
                             "impressed record in a ranking dataset has no rank"))

    for c in checks:
        for i in np.flatnonzero(c.bad):
            out.append(Violation(str(d.record_id[i]), c.invariant, c.message))

    _check_rank_contiguity(d, out)


def _check_rank_contiguity(d: Dataset, out: list[Violation]) -> None:
    ranked = np.flatnonzero((d.rank > 0) & d.treated)
    if ranked.size == 0:
        return
    order = ranked[np.lexsort((d.rank[ranked], d.query_id[ranked]))]
    q = d.query_id[order]
    start = np.r_[True, q[1:] != q[:-1]]
    block = np.cumsum(start) - 1
    first = np.flatnonzero(start)
    pos = np.arange(order.size) - first[block] + 1
    bad = d.rank[order] != pos
    seen = set()
    for k in np.flatnonzero(bad):
        qid = str(q[k])
        if qid in seen:
            continue
        seen.add(qid)
        ranks = sorted(int(r) for r in d.rank[order[block == block[k]]])
        out.append(Violation(
            str(d.record_id[order[k]]), "rank-contiguity",
            f"ranks in query {qid} are {ranks}, expected 1..{len(ranks)}"))
