"""Least squares with classical or HC1 standard errors and normal-theory tests.

The regressions here are small (an intercept, one dummy per non-reference
group, optionally a score slope) but run on bins holding thousands of rows,
so the solver is a thin QR path rather than a general modelling framework.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import ndtr

INTERCEPT = "intercept"
SCORE = "score"
COVARIANCES = ("classical", "HC1")

# relative tolerance on |R_jj| for declaring a column collinear
RANK_TOL = 1e-10
# residuals/coefficients below this (relative to max(1, max|y|)) count as zero
EXACT_TOL = 1e-10


class SingularDesignError(ValueError):
    def __init__(self, columns: Sequence[str], context: str = ""):
        self.columns = list(columns)
        self.context = context
        where = f" in {context}" if context else ""
        super().__init__(f"rank-deficient design{where}: collinear column(s) {self.columns}")


def group_term(label: str) -> str:
    return f"group[{label}]"


@dataclass(frozen=True)
class DesignSpec:
    """Intercept + one dummy per group in ``groups_in_order`` (+ score slope)."""

    reference_group: str
    groups_in_order: tuple[str, ...] = ()
    include_score_control: bool = True

    def __post_init__(self):
        object.__setattr__(self, "groups_in_order", tuple(self.groups_in_order))
        if self.reference_group in self.groups_in_order:
            raise ValueError("reference group cannot also carry a dummy")

    @property
    def terms(self) -> tuple[str, ...]:
        terms = (INTERCEPT,) + tuple(group_term(g) for g in self.groups_in_order)
        return terms + ((SCORE,) if self.include_score_control else ())

    def matrix(self, groups: np.ndarray, scores: np.ndarray) -> np.ndarray:
        groups = np.asarray(groups)
        cols = [np.ones(len(groups))]
        cols += [(groups == g).astype(float) for g in self.groups_in_order]
        if self.include_score_control:
            cols.append(np.asarray(scores, dtype=float))
        return np.column_stack(cols)


@dataclass(frozen=True)
class RegressionFit:
    coefficients: dict[str, float]
    standard_errors: dict[str, float]
    t_statistics: dict[str, float]
    p_values: dict[str, float]
    n_observations: int
    residual_variance: float
    covariance_estimator: str = "HC1"
    exact_fit: bool = False
    covariance: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def terms(self) -> tuple[str, ...]:
        return tuple(self.coefficients)

    def predict(self, groups: np.ndarray, scores: np.ndarray) -> np.ndarray:
        """Fitted values for arbitrary (group, score) pairs."""
        groups = np.asarray(groups)
        yhat = np.full(len(groups), self.coefficients[INTERCEPT], dtype=float)
        for term, b in self.coefficients.items():
            if term.startswith("group["):
                yhat[groups == term[6:-1]] += b
        if SCORE in self.coefficients:
            yhat += self.coefficients[SCORE] * np.asarray(scores, dtype=float)
        return yhat

    def to_dict(self) -> dict:
        return {
            "coefficients": dict(self.coefficients),
            "standard_errors": dict(self.standard_errors),
            "t_statistics": dict(self.t_statistics),
            "p_values": dict(self.p_values),
            "n_observations": self.n_observations,
            "residual_variance": self.residual_variance,
            "covariance_estimator": self.covariance_estimator,
            "exact_fit": self.exact_fit,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RegressionFit":
        nums = {k: {t: _num(v) for t, v in d[k].items()}
                for k in ("coefficients", "standard_errors", "t_statistics", "p_values")}
        return cls(**nums, n_observations=int(d["n_observations"]),
                   residual_variance=_num(d["residual_variance"]),
                   covariance_estimator=d["covariance_estimator"],
                   exact_fit=bool(d.get("exact_fit", False)))


def _num(v) -> float:
    # JSON carries NaN as null and infinities as strings
    return float("nan") if v is None else float(v)


def normal_two_sided_p(t) -> np.ndarray:
    t = np.abs(np.asarray(t, dtype=float))
    return 2.0 * ndtr(-t)


def ols(X: np.ndarray, y: np.ndarray, names: Sequence[str] | None = None,
        covariance: str = "HC1") -> RegressionFit:
    """Fit y = X b + e by least squares.

    The normal equations are solved through a thin QR factorization. Columns
    whose R diagonal collapses relative to the largest one are reported as
    collinear rather than regularized away. With HC1 the sandwich
    ``(X'X)^-1 X' diag(e^2) X (X'X)^-1`` is scaled by ``n / (n - p)``.

    A fit whose residuals all vanish (up to ``EXACT_TOL``) has zero standard
    errors; its t-statistics are 0 for zero coefficients and +/-inf otherwise.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    names = list(names) if names is not None else [f"x{j}" for j in range(p)]
    if covariance not in COVARIANCES:
        raise ValueError(f"covariance must be one of {COVARIANCES}")
    if n <= p:
        raise SingularDesignError(names, f"{n} observations for {p} parameters")

    Q, R = np.linalg.qr(X, mode="reduced")
    diag = np.abs(np.diag(R))
    col_scale = np.maximum(np.linalg.norm(X, axis=0), 1.0)
    bad = [names[j] for j in range(p) if diag[j] <= RANK_TOL * max(diag.max(), 1.0)
           or diag[j] <= RANK_TOL * col_scale[j]]
    if bad:
        raise SingularDesignError(bad)

    beta = solve_triangular(R, Q.T @ y)
    resid = y - X @ beta
    scale = max(1.0, float(np.max(np.abs(y))) if n else 1.0)
    exact = bool(np.all(np.abs(resid) <= EXACT_TOL * scale))
    if exact:
        resid = np.zeros_like(resid)
    dof = n - p
    sigma2 = float(resid @ resid) / dof

    Rinv = solve_triangular(R, np.eye(p))
    if covariance == "classical":
        cov = sigma2 * (Rinv @ Rinv.T)
    else:
        # with X = QR the sandwich is R^-1 (Q' diag(e^2) Q) R^-T
        meat = (Q * resid[:, None] ** 2).T @ Q
        cov = Rinv @ meat @ Rinv.T * (n / dof)
    se = np.sqrt(np.clip(np.diag(cov), 0.0, None))

    with np.errstate(divide="ignore", invalid="ignore"):
        t = beta / se
    zero_se = se == 0
    tiny = np.abs(beta) <= EXACT_TOL * scale
    t = np.where(zero_se & tiny, 0.0, t)
    t = np.where(zero_se & ~tiny, np.copysign(np.inf, beta), t)
    pv = normal_two_sided_p(t)

    return RegressionFit(
        coefficients=dict(zip(names, beta.tolist())),
        standard_errors=dict(zip(names, se.tolist())),
        t_statistics=dict(zip(names, t.tolist())),
        p_values=dict(zip(names, pv.tolist())),
        n_observations=n,
        residual_variance=sigma2,
        covariance_estimator=covariance,
        exact_fit=exact,
        covariance=cov,
    )


def fit_ols(response, groups, scores, spec: DesignSpec,
            covariance: str = "HC1") -> RegressionFit:
    """Regress outcomes on group dummies and (optionally) the score."""
    y = np.asarray(response, dtype=float)
    X = spec.matrix(np.asarray(groups), np.asarray(scores, dtype=float))
    return ols(X, y, spec.terms, covariance=covariance)


@dataclass(frozen=True)
class WaldResult:
    term: str
    estimate: float
    std_error: float
    statistic: float
    p_value: float
    level: float
    reject: bool


def wald_test(fit: RegressionFit, term: str, level: float = 0.05) -> WaldResult:
    """Two-sided z-test of ``term == 0``; rejects iff p < level (strictly)."""
    if term not in fit.coefficients:
        raise KeyError(f"term {term!r} not in fit; available: {list(fit.coefficients)}")
    p = fit.p_values[term]
    return WaldResult(term, fit.coefficients[term], fit.standard_errors[term],
                      fit.t_statistics[term], p, level, bool(p < level))
