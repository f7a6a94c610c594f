"""Failure-rate heatmap over filter policies N(mu, sigma2) against a N(0, 1) baseline."""
import argparse

import numpy as np

from feedaudit import experiments as ex


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--plot", help="write a PNG to this path (needs matplotlib)")
    args = p.parse_args()

    grid = ex.run_heatmap(trials=args.trials, seed=args.seed, jobs=args.jobs)
    np.set_printoptions(precision=2, linewidth=200)
    print("rows: sigma2", grid.sigma2_values)
    print("cols: mu", grid.mu_values)
    print(grid.failure_rate)
    print(f"baseline cell failure rate: {grid.rate(0.0, 1.0):.3f}")
    cls = ex.classify_distributions(grid)
    print(f"passing cells: {len(cls.passing)}, failing cells: {len(cls.failing)}")

    if args.plot:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        fig, ax = plt.subplots(figsize=(8, 5))
        mu, s2 = grid.mu_values, grid.sigma2_values
        im = ax.imshow(grid.failure_rate, origin="lower", aspect="auto", cmap="viridis",
                       extent=[mu[0], mu[-1], s2[0], s2[-1]], vmin=0, vmax=1)
        ax.set_xlabel("mu")
        ax.set_ylabel("sigma2")
        fig.colorbar(im, label="failure rate")
        fig.savefig(args.plot, dpi=120, bbox_inches="tight")


if __name__ == "__main__":
    main()
