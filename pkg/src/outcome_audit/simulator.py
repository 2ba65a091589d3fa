"""Synthetic two-sided marketplace data.

Each candidate draws a latent qualification ``q`` from its group's
distribution, the scorer maps ``q`` to a score, the allocation rule hands out
treatment (a notification above a threshold, or impressions from the top of a
ranked list), and the viewer model realizes an outcome for treated
candidates only.

All randomness flows from ``ScenarioConfig.seed`` through independent
``SeedSequence`` children, one per purpose, so a config always reproduces
the same dataset bit-for-bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .domain import (BERNOULLI, CLASSIFICATION, RANKING, THREE_LEVEL, Dataset,
                     GroupId)


class ConfigError(ValueError):
    """Invalid scenario or run configuration."""


# -- qualification distributions -------------------------------------------


@dataclass(frozen=True)
class DiscreteQualification:
    points: tuple[tuple[float, float], ...]  # (q, mass)

    def __post_init__(self):
        object.__setattr__(self, "points", tuple((float(q), float(m)) for q, m in self.points))
        if not self.points:
            raise ConfigError("discrete distribution needs at least one point")
        for q, m in self.points:
            if not 0 <= q <= 1:
                raise ConfigError(f"qualification {q} outside [0, 1]")
            if not (m > 0 and np.isfinite(m)):
                raise ConfigError(f"mass {m} must be positive and finite")

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        q = np.array([p[0] for p in self.points])
        m = np.array([p[1] for p in self.points])
        return q[rng.choice(len(q), size=n, p=m / m.sum())]


@dataclass(frozen=True)
class BetaQualification:
    a: float
    b: float

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise ConfigError("beta shapes must be positive")

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.beta(self.a, self.b, size=n)


@dataclass(frozen=True)
class UniformQualification:
    lo: float = 0.0
    hi: float = 1.0

    def __post_init__(self):
        if not 0 <= self.lo < self.hi <= 1:
            raise ConfigError(f"uniform support [{self.lo}, {self.hi}] must lie in [0, 1]")

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.uniform(self.lo, self.hi, size=n)


QualificationDistribution = DiscreteQualification | BetaQualification | UniformQualification


# -- scorers ---------------------------------------------------------------


@dataclass(frozen=True)
class Calibrated:
    """s = q."""

    def score(self, q, labels, rng) -> np.ndarray:
        return np.clip(q, 0.0, 1.0)


@dataclass(frozen=True)
class GroupShift:
    """s = clamp(q - shift[g]); a positive shift under-scores group g."""

    shifts: Mapping[str, float]

    def score(self, q, labels, rng) -> np.ndarray:
        delta = np.zeros_like(q)
        for g, d in self.shifts.items():
            delta[labels == g] = d
        return np.clip(q - delta, 0.0, 1.0)


@dataclass(frozen=True)
class InvertedForGroup:
    """s = 1 - q for one group, s = q for everyone else."""

    group: str

    def score(self, q, labels, rng) -> np.ndarray:
        return np.clip(np.where(labels == self.group, 1.0 - q, q), 0.0, 1.0)


@dataclass(frozen=True)
class NoisyCalibrated:
    sigma: float

    def __post_init__(self):
        if self.sigma < 0:
            raise ConfigError("noise sigma must be non-negative")

    def score(self, q, labels, rng) -> np.ndarray:
        return np.clip(q + rng.normal(0.0, self.sigma, size=q.shape), 0.0, 1.0)


Scorer = Calibrated | GroupShift | InvertedForGroup | NoisyCalibrated


# -- viewers ---------------------------------------------------------------


@dataclass(frozen=True)
class PiecewiseLinear:
    """Curve through (x, y) knots, linearly interpolated, flat outside."""

    knots: tuple[tuple[float, float], ...]

    def __post_init__(self):
        pts = tuple(sorted((float(x), float(y)) for x, y in self.knots))
        if not pts:
            raise ConfigError("curve needs at least one knot")
        if any(not 0 <= y <= 1 for _, y in pts):
            raise ConfigError("probability curve values must lie in [0, 1]")
        object.__setattr__(self, "knots", pts)

    def __call__(self, q) -> np.ndarray:
        xs, ys = zip(*self.knots)
        return np.interp(q, xs, ys)


IDENTITY = PiecewiseLinear(((0.0, 0.0), (1.0, 1.0)))


@dataclass(frozen=True)
class BernoulliViewer:
    """Y ~ Bernoulli(q)."""

    outcome_scale = BERNOULLI

    def support(self) -> np.ndarray:
        return np.array([0.0, 1.0])

    def pmf(self, q) -> np.ndarray:
        q = np.atleast_1d(np.asarray(q, dtype=float))
        return np.stack([1 - q, q], axis=-1)

    def draw(self, q, rng) -> np.ndarray:
        return (rng.random(q.shape) < q).astype(float)


@dataclass(frozen=True)
class ThresholdViewer:
    """Y = 1(q >= tau), deterministic."""

    tau: float
    outcome_scale = BERNOULLI

    def support(self) -> np.ndarray:
        return np.array([0.0, 1.0])

    def pmf(self, q) -> np.ndarray:
        hit = (np.atleast_1d(np.asarray(q, dtype=float)) >= self.tau).astype(float)
        return np.stack([1 - hit, hit], axis=-1)

    def draw(self, q, rng) -> np.ndarray:
        rng.random(q.shape)  # keep the outcome stream aligned across viewer types
        return (q >= self.tau).astype(float)


@dataclass(frozen=True)
class ThreeLevelViewer:
    """Y = 0 (no apply), alpha (apply, no attention) or 1 (apply and attention)."""

    apply_prob: PiecewiseLinear = IDENTITY
    attention_prob: PiecewiseLinear = IDENTITY
    alpha: float = 0.5
    outcome_scale = THREE_LEVEL

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ConfigError("three-level alpha must lie in (0, 1)")

    def support(self) -> np.ndarray:
        return np.array([0.0, self.alpha, 1.0])

    def pmf(self, q) -> np.ndarray:
        q = np.atleast_1d(np.asarray(q, dtype=float))
        a = self.apply_prob(q)
        r = self.attention_prob(q)
        return np.stack([1 - a, a * (1 - r), a * r], axis=-1)

    def draw(self, q, rng) -> np.ndarray:
        u = rng.random(q.shape)
        p = self.pmf(q)
        y = np.where(u < p[:, 0], 0.0, self.alpha)
        return np.where(u >= p[:, 0] + p[:, 1], 1.0, y)


Viewer = BernoulliViewer | ThresholdViewer | ThreeLevelViewer


def check_fosd(viewer: Viewer, q_grid: Sequence[float], atol: float = 1e-12) -> bool:
    """True iff outcome CDFs are pointwise non-increasing along ``q_grid``.

    That is, F(.; q2) first-order stochastically dominates F(.; q1) for every
    adjacent q1 < q2 on the grid.
    """
    q = np.asarray(q_grid, dtype=float)
    if q.ndim != 1 or np.any(np.diff(q) < 0) or np.any((q < 0) | (q > 1)):
        raise ValueError("q_grid must be sorted ascending within [0, 1]")
    cdf = np.cumsum(viewer.pmf(q), axis=-1)
    return bool(np.all(np.diff(cdf, axis=0) <= atol))


# -- allocation and scenario ----------------------------------------------


@dataclass(frozen=True)
class ClassificationAllocation:
    threshold: float
    candidates_per_query: int = 10
    kind = CLASSIFICATION


@dataclass(frozen=True)
class RankingAllocation:
    """Rank ``candidates_per_query`` candidates; the viewer sees the top N_j.

    ``scroll_depth`` maps an impression count to its probability; ``None``
    means uniform over 1..candidates_per_query.
    """

    candidates_per_query: int = 10
    scroll_depth: Mapping[int, float] | None = None
    kind = RANKING

    def depth_distribution(self) -> tuple[np.ndarray, np.ndarray]:
        m = self.candidates_per_query
        if self.scroll_depth is None:
            return np.arange(1, m + 1), np.full(m, 1.0 / m)
        depths = np.array(sorted(self.scroll_depth), dtype=np.int64)
        probs = np.array([self.scroll_depth[k] for k in depths], dtype=float)
        return depths, probs


Allocation = ClassificationAllocation | RankingAllocation


@dataclass(frozen=True)
class GroupSpec:
    distribution: QualificationDistribution
    share: float


@dataclass(frozen=True)
class ScenarioConfig:
    groups: Mapping[str, GroupSpec]
    scorer: Scorer = field(default_factory=Calibrated)
    viewer: Viewer = field(default_factory=BernoulliViewer)
    allocation: Allocation = field(default_factory=lambda: ClassificationAllocation(0.5))
    n_queries: int = 1000
    seed: int = 0

    def validate(self) -> None:
        if len(self.groups) == 0:
            raise ConfigError("scenario needs at least one group")
        shares = np.array([g.share for g in self.groups.values()], dtype=float)
        if np.any(shares < 0) or not np.isclose(shares.sum(), 1.0, atol=1e-9):
            raise ConfigError(f"group shares must be non-negative and sum to 1, got {shares.sum()}")
        if self.n_queries < 1:
            raise ConfigError("n_queries must be at least 1")
        if self.allocation.candidates_per_query < 1:
            raise ConfigError("candidates_per_query must be at least 1")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        if isinstance(self.allocation, ClassificationAllocation):
            if not 0 <= self.allocation.threshold <= 1:
                raise ConfigError("classification threshold must lie in [0, 1]")
        else:
            depths, probs = self.allocation.depth_distribution()
            m = self.allocation.candidates_per_query
            if np.any((depths < 0) | (depths > m)):
                raise ConfigError(f"scroll depths must lie in 0..{m}")
            if np.any(probs < 0) or not np.isclose(probs.sum(), 1.0, atol=1e-9):
                raise ConfigError("scroll-depth probabilities must sum to 1")
        if isinstance(self.scorer, (GroupShift,)):
            unknown = set(self.scorer.shifts) - set(self.groups)
            if unknown:
                raise ConfigError(f"group_shift names unknown groups {sorted(unknown)}")
        if isinstance(self.scorer, InvertedForGroup) and self.scorer.group not in self.groups:
            raise ConfigError(f"inverted_for_group names unknown group {self.scorer.group!r}")

    @property
    def n_records(self) -> int:
        return self.n_queries * self.allocation.candidates_per_query


_STREAMS = ("group", "qualification", "score", "tiebreak", "depth", "outcome")


def simulate(cfg: ScenarioConfig) -> Dataset:
    """Draw one synthetic dataset from ``cfg``."""
    cfg.validate()
    streams = dict(zip(_STREAMS, (np.random.default_rng(s) for s in
                                  np.random.SeedSequence(cfg.seed).spawn(len(_STREAMS)))))
    labels_in_order = list(cfg.groups)
    groups = tuple(GroupId(i, g) for i, g in enumerate(labels_in_order))
    m = cfg.allocation.candidates_per_query
    n = cfg.n_queries * m
    query = np.repeat(np.arange(cfg.n_queries), m)

    shares = np.array([cfg.groups[g].share for g in labels_in_order], dtype=float)
    code = streams["group"].choice(len(groups), size=n, p=shares / shares.sum())
    q = np.empty(n)
    for i, g in enumerate(labels_in_order):
        mask = code == i
        q[mask] = cfg.groups[g].distribution.sample(streams["qualification"], int(mask.sum()))
    label_arr = np.array(labels_in_order, dtype=str)[code]
    score = cfg.scorer.score(q, label_arr, streams["score"])
    tiebreak = streams["tiebreak"].random(n)
    y_all = cfg.viewer.draw(q, streams["outcome"])

    rank = np.zeros(n, dtype=np.int64)
    if isinstance(cfg.allocation, ClassificationAllocation):
        order = np.arange(n)
        treated = score >= cfg.allocation.threshold
        threshold = cfg.allocation.threshold
    else:
        # sort within each query by descending score, coin-flip ties
        order = np.lexsort((tiebreak, -score, query))
        depths, probs = cfg.allocation.depth_distribution()
        n_j = streams["depth"].choice(depths, size=cfg.n_queries, p=probs)
        pos = np.arange(n) % m
        treated = pos < n_j[query]
        rank = np.where(treated, pos + 1, 0)
        threshold = None

    width = len(str(n - 1))
    record_id = np.char.add("r", np.char.zfill(np.arange(n).astype(str), width))
    qwidth = len(str(cfg.n_queries - 1))
    query_id = np.char.add("q", np.char.zfill(query.astype(str), qwidth))
    outcome = np.where(treated, y_all[order], np.nan)
    alpha = cfg.viewer.alpha if isinstance(cfg.viewer, ThreeLevelViewer) else None
    return Dataset(
        record_id=record_id,
        query_id=query_id,
        group=code[order],
        score=score[order],
        treated=treated,
        outcome=outcome,
        true_qualification=q[order],
        rank=rank,
        groups=groups,
        kind=cfg.allocation.kind,
        threshold=threshold,
        objective_alpha=alpha,
        outcome_scale=cfg.viewer.outcome_scale,
    )
