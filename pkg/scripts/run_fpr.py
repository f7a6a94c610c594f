"""False positive rate of the audit when filter and baseline coincide."""
import argparse

from feedaudit import experiments as ex
from feedaudit.families import make_family


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--alpha", type=float, default=0.01)
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--m", type=int, nargs="+", default=[30, 100, 300, 1000])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    args = p.parse_args()

    rows = ex.run_fpr_experiment(make_family("gaussian-mean-var"), (0.0, 1.0), args.m, args.alpha,
                                 args.trials, seed=args.seed, jobs=args.jobs)
    print(f"{'m':>6} {'fpr':>8} {'95% CI':>20}")
    for r in rows:
        print(f"{r.m:>6} {r.fpr:>8.4f}   [{r.ci_low:.4f}, {r.ci_high:.4f}]")
    print("non-increasing:", ex.fpr_non_increasing(rows))


if __name__ == "__main__":
    main()
