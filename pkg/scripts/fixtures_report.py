"""Print every worked example: infra-marginality, precision and equalized odds."""

import argparse

from outcome_audit.baselines import (eo_population_tv, eo_scenario,
                                     equalized_odds_check, fixture_precision,
                                     infra_marginality_demo)
from outcome_audit.outcome_test import audit_ranking
from outcome_audit.simulator import simulate


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n-queries", type=int, default=10_000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--eo-tolerance", type=float, default=0.25)
    args = ap.parse_args()

    for name in ("fig1", "fig2", "fig3"):
        print(infra_marginality_demo(name).render())
        print()
    for name in ("precision_fp", "precision_fn"):
        prec = fixture_precision(name)
        print(f"{name}: " + ", ".join(f"{g} = {v} ({float(v):.6f})" for g, v in prec.items()))
    print()
    for name in ("eo_fp", "eo_fn"):
        pop = eo_population_tv(name)
        d = simulate(eo_scenario(name, n_queries=args.n_queries, seed=args.seed))
        eo = equalized_odds_check(d, tolerance=args.eo_tolerance)
        rep = audit_ranking(d, reference="O")
        rejects = [b.verdict.reject for b in rep.bins if b.verdict]
        print(f"{name}: population TV " + ", ".join(f"{k} = {v}" for k, v in pop.items()))
        print(f"  sample max TV {eo.detail['max_total_variation']:.4f} -> "
              f"{'fair' if eo.fair else 'unfair'} at tolerance {args.eo_tolerance}")
        print(f"  outcome test: {'biased' if rep.biased else 'no bias'}; "
              f"bins rejecting {sum(rejects)}/{len(rejects)}")


if __name__ == "__main__":
    main()
