"""Monte Carlo check of the asymptotic normality of penalized quantile regression
on an autoregressive design, for lambda = 0 and lambda = c n^{-a}, a > 1/2.

Usage: python scripts/run_theorem.py [--reps 1000] [--n 200 500 2000] [--tau 0.2]
"""
import argparse
from dataclasses import replace

from qgcnet.montecarlo import QVARScenario, empirical_limit_check


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--reps", type=int, default=1000)
    ap.add_argument("--n", type=int, nargs="+", default=[200, 500, 2000])
    ap.add_argument("--tau", type=float, default=0.2)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    base = QVARScenario(tau=args.tau)
    for rule in ("zero", "power"):
        for n in args.n:
            sc = replace(base, n=n, lambda_rule=rule)
            rep = empirical_limit_check(sc, args.reps, args.seed)
            ks = " ".join(f"{p:.3f}" for p in rep.ks_pvalues)
            print(f"{rule:5s} n={n:5d} lam={sc.lam:.2e}  cov rel err {rep.cov_frobenius_rel_error:.3f}"
                  f"  KS p [{ks}]  median |err| {rep.median_error_norm:.4f}"
                  f"  {'pass' if rep.passed else 'fail'}", flush=True)


if __name__ == "__main__":
    main()
