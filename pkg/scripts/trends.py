"""BER as the stream count, receive antennas and user count change.

Baselines N_T = 32, N_R = 16 or 8, L = 4, K = 2; each trend varies one
parameter (L 4 -> 8, N_R 8 -> 16, K 2 -> 4) with QRM-MLD (beam 8).  At high
SNR the error counts can be zero for small slot budgets, so lower SNR points
are included by default to expose the trends.

Usage: python scripts/trends.py --scheme ssvmp --snr 10 15 25 --slots 1000
"""

import argparse
import warnings

from slpmld import SimConfig, export_results, run_ber_sweep

POINTS = [("L=4, N_R=16, K=2", 16, 4, 2), ("L=8, N_R=16, K=2", 16, 8, 2),
          ("L=4, N_R=8, K=2", 8, 4, 2), ("L=4, N_R=8, K=4", 8, 4, 4)]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scheme", default="ssvmp", choices=["ssvmp", "sdp", "bd"])
    ap.add_argument("--snr", type=float, nargs="+", default=[10.0, 15.0, 25.0])
    ap.add_argument("--slots", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=2025)
    ap.add_argument("--out", default="trends.csv")
    args = ap.parse_args()
    records = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for label, N_R, L, K in POINTS:
            cfg = SimConfig(N_T=32, N_R=N_R, L=L, K=K, scheme=args.scheme, detector="qrm_mld", M=8,
                            snr_db_list=args.snr, slots=args.slots, master_seed=args.seed)
            recs = run_ber_sweep(cfg)
            records += recs
            cells = "  ".join(f"{r.snr_db:g} dB {r.ber:.2e} (+/-{r.std_error:.1e})" for r in recs)
            print(f"{label:18s} {cells}", flush=True)
    export_results(records, args.out)


if __name__ == "__main__":
    main()
