"""Counterfactual reallocation and re-ranking across seeds under planted bias."""

import argparse

import numpy as np

from outcome_audit.counterfactual import counterfactual
from outcome_audit.outcome_test import audit
from outcome_audit.simulator import (BernoulliViewer, BetaQualification,
                                     ClassificationAllocation, GroupShift,
                                     GroupSpec, RankingAllocation,
                                     ScenarioConfig, simulate)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--shift", type=float, default=0.1)
    ap.add_argument("--n-queries", type=int, default=10_000)
    args = ap.parse_args()

    groups = {"A": GroupSpec(BetaQualification(2, 2), 0.5),
              "B": GroupSpec(BetaQualification(2, 2), 0.5)}
    for name, alloc in (("classification", ClassificationAllocation(0.5, 10)),
                        ("ranking", RankingAllocation(10))):
        rows = []
        for seed in range(args.seeds):
            cfg = ScenarioConfig(groups, GroupShift({"B": args.shift}), BernoulliViewer(),
                                 alloc, args.n_queries, seed)
            d = simulate(cfg)
            s = counterfactual(d, audit(d, reference="A"))
            if name == "classification":
                rows.append((s.n_pct_delta["B"], s.n_pct_delta["A"], s.y_pct_delta))
            else:
                rows.append((s.mean_rank_delta["B"], s.mean_rank_delta["A"]))
        a = np.array(rows)
        print(f"{name} ({args.seeds} seeds, shift {args.shift})")
        if name == "classification":
            print(f"  N_B %delta  mean {a[:, 0].mean():+.2f}%  positive in {(a[:, 0] > 0).sum()}")
            print(f"  N_A %delta  mean {a[:, 1].mean():+.2f}%")
            print(f"  Y %delta    mean {a[:, 2].mean():+.3f}%  positive in {(a[:, 2] > 0).sum()}")
        else:
            print(f"  mean rank delta B {a[:, 0].mean():+.4f}  negative in {(a[:, 0] < 0).sum()}")
            print(f"  mean rank delta A {a[:, 1].mean():+.4f}")


if __name__ == "__main__":
    main()
