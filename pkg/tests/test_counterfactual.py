import json
from collections import Counter
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from outcome_audit.counterfactual import (CounterfactualSummary, counterfactual,
                                          predict_corrected,
                                          reallocate_classification,
                                          rerank_ranking)
from outcome_audit.io import dumps
from outcome_audit.outcome_test import audit
from oracles import best_subset
from util import sim


def _fair_exact(kind, seed, m=10):
    """Outcome equals the score exactly, so every bin fit has zero group effect."""
    d = sim(kind=kind, n_queries=400, seed=seed, m=m, depth={m: 1.0} if kind == "ranking" else None)
    y = np.where(d.treated, d.score, np.nan)
    return d.with_columns(outcome=y, outcome_scale="continuous")


def test_classification_conserves_budget_per_job():
    d = sim(n_queries=2000, shift=0.1, seed=1)
    s = counterfactual(d, audit(d, reference="A"))
    for q in np.unique(d.query_id):
        m = d.query_id == q
        assert s.allocation[m].sum() == d.treated[m].sum()
    assert sum(s.n_after.values()) == sum(s.n_before.values())


def test_classification_selection_is_optimal_per_job():
    d = sim(n_queries=300, shift=0.1, seed=2, m=8)
    pred = predict_corrected(d, audit(d, reference="A", n_bins=5))
    s = reallocate_classification(d, pred)
    for q in np.unique(d.query_id):
        m = np.flatnonzero(d.query_id == q)
        k = int(d.treated[m].sum())
        chosen = float(pred.yhat[m][s.allocation[m]].sum())
        assert chosen == pytest.approx(best_subset(pred.yhat[m].tolist(), k), abs=1e-12)


def test_under_scored_group_gains():
    d = sim(n_queries=5000, shift=0.1, seed=3)
    s = counterfactual(d, audit(d, reference="A"))
    assert s.n_pct_delta["B"] > 0 > s.n_pct_delta["A"]
    assert s.y_pct_delta > 0


@pytest.mark.parametrize("kind", ["classification", "ranking"])
@pytest.mark.parametrize("seed", range(3))
def test_zero_bias_fit_is_identity(kind, seed):
    d = _fair_exact(kind, seed)
    r = audit(d)
    assert all(abs(x.fit.coefficients["group[B]"]) < 1e-12 for x in r.bins if x.fit)
    s = counterfactual(d, r)
    if kind == "classification":
        assert np.array_equal(s.allocation, d.treated)
        assert s.n_after == s.n_before
        assert all(v == 0.0 for v in s.n_pct_delta.values())
    else:
        assert np.array_equal(s.allocation, d.rank)
        assert all(v == 0.0 for v in s.mean_rank_delta.values())


@settings(max_examples=20)
@given(seed=st.integers(0, 10_000), shift=st.floats(0, 0.2))
def test_reallocation_is_idempotent(seed, shift):
    d = sim(n_queries=200, shift=shift, seed=seed)
    pred = predict_corrected(d, audit(d, reference="A", n_bins=4))
    once = reallocate_classification(d, pred).allocation
    twice = reallocate_classification(d.with_columns(treated=once), pred).allocation
    assert np.array_equal(once, twice)


def test_rerank_conserves_rank_multiset_per_query():
    d = sim(kind="ranking", n_queries=1000, shift=0.1, seed=4)
    s = counterfactual(d, audit(d, reference="A"))
    assert np.array_equal(s.allocation == 0, ~d.treated)
    for q in np.unique(d.query_id):
        m = d.query_id == q
        assert Counter(d.rank[m].tolist()) == Counter(s.allocation[m].tolist())


def test_rerank_moves_under_scored_group_up():
    d = sim(kind="ranking", n_queries=5000, shift=0.1, seed=5, depth={10: 1.0})
    s = counterfactual(d, audit(d, reference="A"))
    assert s.mean_rank_delta["B"] < 0 < s.mean_rank_delta["A"]


def test_unfitted_bin_records_keep_their_status():
    d = sim(n_queries=1000, shift=0.1, seed=6)
    r = audit(d, reference="A")
    bins = list(r.bins)
    bins[3] = replace(bins[3], fit=None, verdict=None, error="dropped for test")
    r = replace(r, bins=tuple(bins))
    pred = predict_corrected(d, r)
    s = reallocate_classification(d, pred)
    held = pred.unavailable & d.treated
    assert held.any() and s.allocation[held].all()
    assert not s.allocation[pred.unavailable & ~d.treated].any()
    assert s.n_unavailable == int(pred.unavailable.sum())


def test_unfitted_ranking_records_stay_in_place():
    d = sim(kind="ranking", n_queries=500, shift=0.1, seed=8, depth={10: 1.0})
    r = audit(d, reference="A", n_bins=4)
    bins = list(r.bins)
    bins[1] = replace(bins[1], fit=None, verdict=None, error="dropped for test")
    pred = predict_corrected(d, replace(r, bins=tuple(bins)))
    s = rerank_ranking(d, pred)
    fixed = pred.unavailable & d.treated
    assert fixed.any()
    assert np.array_equal(s.allocation[fixed], d.rank[fixed])


def test_far_below_threshold_is_flagged():
    d = sim(n_queries=500, seed=9)
    pred = predict_corrected(d, audit(d))
    assert pred.far_below_threshold.any()
    assert not pred.far_below_threshold[d.treated].any()


def test_summary_round_trips():
    d = sim(n_queries=500, shift=0.1, seed=10)
    s = counterfactual(d, audit(d, reference="A"))
    back = CounterfactualSummary.from_dict(json.loads(dumps(s)))
    assert dumps(back) == dumps(s)


def test_kind_mismatch():
    d = sim(n_queries=100)
    r = audit(d)
    with pytest.raises(ValueError):
        rerank_ranking(d, predict_corrected(d, r))


def _with_marginal_slope(r, slope):
    m = r.bins[0]
    coef = dict(m.fit.coefficients, score=slope)
    return replace(r, bins=(replace(m, fit=replace(m.fit, coefficients=coef)),) + r.bins[1:])


def test_negative_marginal_slope_is_warned_about():
    d = sim(n_queries=500, shift=0.1, seed=11)
    r = _with_marginal_slope(audit(d, reference="A"), -0.5)
    s = counterfactual(d, r)
    assert any("slope" in w for w in s.warnings)
    assert not counterfactual(d, _with_marginal_slope(r, 1.0)).warnings


def test_at_threshold_policy_evaluates_marginal_fit_at_threshold():
    d = sim(n_queries=500, shift=0.1, seed=12)
    r = audit(d, reference="A")
    pred = predict_corrected(d, r, below_threshold="at_threshold")
    below = d.score < d.threshold
    expected = r.bins[0].fit.predict(d.labels[below], np.full(below.sum(), d.threshold))
    np.testing.assert_array_equal(pred.yhat[below], expected)
    above = predict_corrected(d, r).yhat[~below]
    np.testing.assert_array_equal(pred.yhat[~below], above)
    with pytest.raises(ValueError):
        predict_corrected(d, r, below_threshold="nearest")
