"""Tail second moment lambda(d) for isotropic Gaussian inputs over a grid of dimensions."""

import argparse

from outernorm.data import DistributionSpec
from outernorm.experiments import run_lambda_decay


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--d-grid", nargs="+", type=int, default=[10, 20, 40, 80])
    ap.add_argument("--C", type=float, default=2.0)
    ap.add_argument("--n-mc", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    spec = DistributionSpec(args.d_grid[0], "gaussian_iso", label_kind="custom", label_sampler="zero")
    table = run_lambda_decay(spec, args.C, args.d_grid, n_mc=args.n_mc, seed=args.seed)
    print("d,lambda,se")
    for row in table["rows"]:
        print(f"{row['d']},{row['lambda']:.4e},{row['se']:.1e}")
    print(f"# slope of ln lambda against d: {table['slope']:.4f}")


if __name__ == "__main__":
    main()
