"""Zero-cost construction: shift the variance until the audit stops seeing the mean gap."""
import argparse
import json

from feedaudit import experiments as ex


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--kappa-step", type=float, default=0.25)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()

    demo = ex.proposition2_construction(trials=args.trials, kappa_step=args.kappa_step, seed=args.seed)
    out = demo.to_dict()
    out.pop("scan")
    print(json.dumps(out, indent=2))


if __name__ == "__main__":
    main()
