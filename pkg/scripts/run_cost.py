"""Revenue lost to the audit: best grid policy with and without the pass-rate constraint."""
import argparse

from feedaudit import experiments as ex


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--peak-distance", type=float, default=0.75)
    p.add_argument("--alpha", type=float, default=0.01)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    args = p.parse_args()

    fn = ex.RevenueFunction(peak_distance=args.peak_distance)
    reach = max(1.5, args.peak_distance + 0.5)
    steps = int(round(2 * reach / 0.1))
    mu = [round(-reach + 0.1 * k, 10) for k in range(steps + 1)]
    res = ex.cost_of_auditing(fn, alpha=args.alpha, mu_values=mu, trials=args.trials, seed=args.seed,
                              jobs=args.jobs)
    for key, value in res.summary().items():
        print(f"{key:>20}: {value}")


if __name__ == "__main__":
    main()
