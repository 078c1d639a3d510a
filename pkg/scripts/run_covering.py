"""Greedy packings of B(0, R) against the (3R/eps)^d covering bound."""

import argparse

import numpy as np

from outernorm.epsnet import build_greedy_net, covering_bound, verify_covering


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--R", type=float, default=2.0)
    ap.add_argument("--dims", nargs="+", type=int, default=[1, 2, 3])
    ap.add_argument("--eps", nargs="+", type=float, default=[0.25, 0.5, 1.0])
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--probes", type=int, default=100_000)
    args = ap.parse_args()

    print("d,eps,bound,size_min,size_max,max_gap,scale")
    for d in args.dims:
        for eps in args.eps:
            sizes, gaps = [], []
            for seed in range(args.seeds):
                net = build_greedy_net(args.R, eps, d, seed)
                sizes.append(net.size)
                gaps.append(verify_covering(net, args.probes, seed + 1000).max_gap)
            bound = covering_bound(args.R, eps, d).value
            print(f"{d},{eps},{bound:.0f},{min(sizes)},{max(sizes)},{np.max(gaps):.3f},{2 * eps}")


if __name__ == "__main__":
    main()
