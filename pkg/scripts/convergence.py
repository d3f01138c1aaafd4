"""Margin trace of the alternating transceiver design for several power budgets.

Usage: python scripts/convergence.py [--out traces.csv] [--seed 0]
"""

import argparse

from slpmld import SimConfig, export_results, run_convergence_probe


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="convergence.csv")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--p", type=float, nargs="+", default=[0.5, 1.0, 2.0])
    args = ap.parse_args()
    cfg = SimConfig(N_T=16, N_R=8, L=4, K=2, scheme="joint_design", detector="linear_combiner",
                    master_seed=args.seed)
    traces = run_convergence_probe(cfg, args.p)
    for tr in traces:
        steps = " ".join(f"{t:.4f}" for t in tr.t)
        print(f"p={tr.p:g}: {tr.iterations} iterations, t = {steps}")
    export_results(traces, args.out)


if __name__ == "__main__":
    main()
