"""BER-vs-SNR comparison of all precoding schemes at N_T = 16 or 32.

N_T = 16 pairs every precoder with exhaustive MLD (and the two
eigenvalue-based schemes also with QRM-MLD); N_T = 32 uses QRM-MLD with
beam width 8 throughout.  The joint design always uses its linear combiner.

Usage: python scripts/ber_sweep.py --N_T 16 --slots 2000 --out ber16.csv
"""

import argparse
import time
import warnings

from slpmld import SimConfig, export_results, run_ber_sweep

RUNS = {
    16: [("traditional_slp", "mld"), ("ssvmp", "mld"), ("sdp", "mld"), ("bd", "mld"),
         ("joint_design", "linear_combiner"), ("ssvmp", "qrm_mld"), ("sdp", "qrm_mld")],
    32: [("traditional_slp", "mld"), ("ssvmp", "qrm_mld"), ("sdp", "qrm_mld"), ("bd", "qrm_mld"),
         ("joint_design", "linear_combiner")],
}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--N_T", type=int, choices=sorted(RUNS), default=16)
    ap.add_argument("--slots", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=2024)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--snr", type=float, nargs="+", default=[0, 5, 10, 15, 20, 25, 30, 35])
    ap.add_argument("--out", default=None)
    args = ap.parse_args()
    records = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for scheme, detector in RUNS[args.N_T]:
            cfg = SimConfig(N_T=args.N_T, N_R=8, L=4, K=2, scheme=scheme, detector=detector, M=8,
                            snr_db_list=args.snr, slots=args.slots, master_seed=args.seed,
                            workers=args.workers)
            start = time.perf_counter()
            recs = run_ber_sweep(cfg)
            records += recs
            bers = " ".join(f"{r.ber:.2e}" for r in recs)
            print(f"{scheme:16s} {detector:16s} {bers}  ({time.perf_counter() - start:.0f}s)",
                  flush=True)
    export_results(records, args.out or f"ber_nt{args.N_T}.csv")


if __name__ == "__main__":
    main()
