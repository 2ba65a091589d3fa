"""Outcome-test fairness audits for recommendation algorithms."""

from .domain import (AuditRecord, Dataset, GroupId, ScoreBin, Violation,
                     validate_dataset)
from .estimation import (DesignSpec, RegressionFit, SingularDesignError,
                         fit_ols, ols, wald_test)
from .outcome_test import (AuditReport, audit, audit_classification,
                           audit_ranking, bin_scores)
from .counterfactual import (CounterfactualSummary, predict_corrected,
                             reallocate_classification, rerank_ranking)
from .baselines import (MetricVerdict, equalized_odds_check, group_precision,
                        infra_marginality_demo)
from .simulator import ScenarioConfig, check_fosd, simulate

__version__ = "0.1.0"
