"""Monte Carlo size and power of the marginal-bin test.

    python scripts/size_power.py --reps 200 --shift 0.0    # size
    python scripts/size_power.py --reps 100 --shift 0.1    # power / effect recovery
"""

import argparse
import json
import time

import numpy as np

from outcome_audit.outcome_test import audit_classification
from outcome_audit.simulator import (BernoulliViewer, BetaQualification, Calibrated,
                                     ClassificationAllocation, GroupShift, GroupSpec,
                                     ScenarioConfig, simulate)


def scenario(shift, n_queries, seed, threshold):
    groups = {"A": GroupSpec(BetaQualification(2, 2), 0.5),
              "B": GroupSpec(BetaQualification(2, 2), 0.5)}
    scorer = GroupShift({"B": shift}) if shift else Calibrated()
    return ScenarioConfig(groups, scorer, BernoulliViewer(),
                          ClassificationAllocation(threshold, 10), n_queries, seed)


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--reps", type=int, default=200)
    ap.add_argument("--shift", type=float, default=0.0)
    ap.add_argument("--n-queries", type=int, default=10_000)
    ap.add_argument("--threshold", type=float, default=0.5)
    ap.add_argument("--level", type=float, default=0.05)
    ap.add_argument("--covariance", choices=("HC1", "classical"), default="HC1")
    ap.add_argument("--seed", type=int, default=0, help="first replication seed")
    ap.add_argument("--json", action="store_true", help="print a JSON summary")
    args = ap.parse_args()

    t0 = time.perf_counter()
    rejects, betas, ses = 0, [], []
    for r in range(args.reps):
        d = simulate(scenario(args.shift, args.n_queries, args.seed + r, args.threshold))
        rep = audit_classification(d, reference="A", level=args.level,
                                   covariance=args.covariance)
        rejects += rep.marginal_verdict.reject
        betas.append(rep.marginal.fit.coefficients["group[B]"])
        ses.append(rep.marginal.fit.standard_errors["group[B]"])
    betas = np.array(betas)
    out = {
        "reps": args.reps, "shift": args.shift, "records_per_rep": args.n_queries * 10,
        "rejection_rate": rejects / args.reps,
        "mean_beta": float(betas.mean()),
        "sd_beta": float(betas.std(ddof=1)) if args.reps > 1 else float("nan"),
        "mean_se": float(np.mean(ses)),
        "seconds": round(time.perf_counter() - t0, 2),
    }
    if args.json:
        print(json.dumps(out, indent=2))
    else:
        for k, v in out.items():
            print(f"{k:>16}: {v}")


if __name__ == "__main__":
    main()
