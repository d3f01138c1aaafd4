"""Acceptance criteria 1-11, one test each.

Every test records a one-line verdict that the session summary prints.  The
tolerances are the ones stated in the criteria; where a criterion fails the
assertion is left red rather than relaxed.
"""

import time
import warnings

import numpy as np
import pytest

from conftest import random_instance, record_acceptance
from oracles import enumerate_simplex_qp, min_eig_level, p2_margin, p4_margin
from slpmld import (
    ConvergenceError,
    MinEigProblem,
    SimplexQp,
    SimConfig,
    build_ci_geometry,
    build_constellation,
    joint_design_ao,
    kkt_residuals,
    mld_detect,
    optimal_combiner,
    qr_mld_detect,
    qrm_mld_detect,
    run_ber_sweep,
    sdp_precoder,
    slp_closed_form,
    solve_simplex_qp,
    ssvmp_precoder,
    verify_rank_structure,
    von_neumann_bound,
)
from slpmld.constellation import scalable_mask
from slpmld.linalg import realify
from slpmld.precoding import selector_matrix, symbol_basis, user_block
from slpmld.sim import CSV_FIELDS, export_results
from slpmld.solvers import admissible_basis

pytestmark = pytest.mark.slow


def finish(number, checks, detail, elapsed=None, limit_s=None):
    if limit_s is not None:
        checks["runtime"] = elapsed < limit_s
    failed = [name for name, ok in checks.items() if not ok]
    timing = f"; {elapsed:.1f}s" if elapsed is not None else ""
    record_acceptance(number, not failed,
                      detail + timing + (f"; failed: {', '.join(failed)}" if failed else ""))
    assert not failed, f"criterion {number}: {detail}; failed {failed}"


def separated(low, high):
    """``low.ber < high.ber`` by more than three combined standard errors."""
    se = np.hypot(low.std_error, high.std_error)
    return high.ber - low.ber > 3 * se


def test_criterion_01_rank_one_slp():
    start = time.perf_counter()
    rng = np.random.default_rng(101)
    ratios, devs = [], []
    for _ in range(100):
        H, s, c = random_instance(rng, 2, 2, 8, 2)
        out = slp_closed_form(build_ci_geometry(selector_matrix(H, 2), H, s, c), 1.0)
        rep = verify_rank_structure(out.P, s)
        ratios.append(rep.sigma_ratio)
        devs.append(rep.proportionality_deviation)
    elapsed = time.perf_counter() - start
    finish(1, {"sigma ratio": max(ratios) <= 1e-6, "proportionality": max(devs) <= 1e-6},
           f"max sigma2/sigma1 {max(ratios):.1e} (<=1e-6), max deviation {max(devs):.1e} (<=1e-6)",
           elapsed, 60)


KL_SHAPES = [(1, 1), (1, 2), (2, 1), (2, 2), (1, 4), (4, 1), (1, 3), (3, 1)]


def test_criterion_02_closed_form_vs_socp():
    start = time.perf_counter()
    rng = np.random.default_rng(202)
    gaps, power = [], []
    for i in range(50):
        K, L = KL_SHAPES[i % len(KL_SHAPES)]
        H, s, c = random_instance(rng, K, L + 1, K * L + 2, L)
        g = build_ci_geometry(selector_matrix(H, L), H, s, c)
        out = slp_closed_form(g, 1.0)
        gaps.append(abs(out.t - p2_margin(g.G, s, g.outer_mask, 1.0)))
        x = out.P @ s
        power.append(abs(np.vdot(x, x).real - 1.0))
    elapsed = time.perf_counter() - start
    finish(2, {"oracle": max(gaps) <= 1e-4, "power": max(power) <= 1e-6},
           f"max |t - t_oracle| {max(gaps):.1e} (<=1e-4), max power gap {max(power):.1e} (<=1e-6)",
           elapsed, 300)


def test_criterion_03_combiner_vs_socp():
    start = time.perf_counter()
    rng = np.random.default_rng(303)
    gaps, norms, energy = [], [], []
    for i in range(50):
        K, L = KL_SHAPES[i % len(KL_SHAPES)]
        N_R, N_T = L + 2, K * L + 2
        H, s, c = random_instance(rng, K, N_R, N_T, L)
        P = rng.standard_normal((N_T, K * L)) + 1j * rng.standard_normal((N_T, K * L))
        k = i % K
        sk = user_block(s, k, L)
        W, gamma = optimal_combiner(H.per_user[k], P, s, sk, c)
        r = H.per_user[k] @ P @ s
        gaps.append(abs(gamma.min() - p4_margin(r, sk, scalable_mask(sk, c))))
        norms.append(abs(np.linalg.norm(W) ** 2 - 1.0))
        v1 = np.abs(symbol_basis(sk)) ** 2
        energy.append(abs(gamma @ (v1 * gamma) - np.vdot(r, r).real))
    elapsed = time.perf_counter() - start
    finish(3, {"oracle": max(gaps) <= 1e-4, "unit norm": max(norms) <= 1e-7,
               "energy identity": max(energy) <= 1e-6},
           f"max |t - t_oracle| {max(gaps):.1e} (<=1e-4), max |‖W‖²-1| {max(norms):.1e} (<=1e-7), "
           f"max energy gap {max(energy):.1e} (<=1e-6)", elapsed, 300)


def test_criterion_04_ao_behaviour():
    start = time.perf_counter()
    rng = np.random.default_rng(404)
    iters, worst_drop = [], 0.0
    for _ in range(100):
        H, s, c = random_instance(rng, 2, 8, 16, 4)
        try:
            out, _, trace = joint_design_ao(H, s, c, 1.0, kappa=1e-5)
            iters.append(out.iterations)
        except ConvergenceError as exc:
            trace = exc.trace
            iters.append(len(trace) - 1)
        worst_drop = max(worst_drop, float(-np.diff(trace).min()))
    share = float(np.mean(np.asarray(iters) <= 20))
    H, s, c = random_instance(np.random.default_rng(4040), 2, 8, 16, 4)
    finals = [joint_design_ao(H, s, c, p)[0].t for p in (0.5, 1.0, 2.0)]
    elapsed = time.perf_counter() - start
    finish(4, {"monotone": worst_drop <= 1e-9, "iterations": share >= 0.95,
               "power ordering": finals[0] < finals[1] < finals[2]},
           f"largest decrease {worst_drop:.1e} (<=1e-9), {share:.0%} converged in <=20 (>=95%), "
           f"median {np.median(iters):.0f} iterations, final t {finals[0]:.3f} < {finals[1]:.3f} "
           f"< {finals[2]:.3f}", elapsed, 600)


def test_criterion_05_simplex_qp():
    start = time.perf_counter()
    rng = np.random.default_rng(505)
    gaps, kkt = [], []
    for _ in range(500):
        n = int(rng.integers(1, 7))
        m = int(rng.integers(0, n + 1))
        A = rng.standard_normal((n, int(rng.integers(1, n + 1))))
        Q = A @ A.T + rng.uniform(0, 0.1) * np.eye(n)
        prob = SimplexQp(Q, m)
        sol = solve_simplex_qp(prob)
        val, _ = enumerate_simplex_qp(Q, m)
        gaps.append(sol.objective - val)
        kkt.append(kkt_residuals(prob, sol).max())
    elapsed = time.perf_counter() - start
    finish(5, {"objective": max(gaps) <= 1e-8, "kkt": max(kkt) <= 1e-8},
           f"max objective excess {max(gaps):.1e} (<=1e-8), max KKT residual {max(kkt):.1e} (<=1e-8)",
           elapsed, 60)


def test_criterion_06_sdp_solver():
    start = time.perf_counter()
    rng = np.random.default_rng(606)
    c = build_constellation(16)
    gaps, lmi, power, align, scale = [], [], [], [], []
    p2_zero = True
    for i in range(50):
        K, L = KL_SHAPES[i % len(KL_SHAPES)]
        n = K * L
        s = c.points[rng.integers(0, 16, n)]
        out = sdp_precoder(s, c, 1.0, K, L, n + 2)
        gaps.append(abs(out.z - min_eig_level(s, K, L, 1.0)))
        p2_zero &= bool(np.all(out.P[n:] == 0))
        rep = kkt_residuals(MinEigProblem(s, K, L, 1.0), _as_solution(out, n))
        lmi.append(max(0.0, -rep.extra["lmi_gap"]))
        power.append(max(0.0, rep.extra["power"] - 1.0))
        align.append(rep.extra["alignment"])
        scale.append(abs(sdp_precoder(s, c, 2.0, K, L, n + 2).z - np.sqrt(2) * out.z))
    elapsed = time.perf_counter() - start
    finish(6, {"oracle": max(gaps) <= 1e-4, "lmi": max(lmi) <= 1e-7, "power": max(power) <= 1e-7,
               "alignment": max(align) <= 1e-7, "P2 zero": p2_zero, "sqrt2 scaling": max(scale) <= 1e-4},
           f"max |z - z_oracle| {max(gaps):.1e} (<=1e-4), residuals lmi {max(lmi):.1e} power "
           f"{max(power):.1e} alignment {max(align):.1e} (<=1e-7), P2 zero {p2_zero}, "
           f"max sqrt2 scaling gap {max(scale):.1e} (<=1e-4)", elapsed, 600)


def _as_solution(out, n):
    from slpmld.solvers import MinEigSolution

    return MinEigSolution(P1=out.P1, z=out.z, P2=out.P[n:] if out.P.shape[0] > n else None)


def test_criterion_07_singular_value_bound():
    rng = np.random.default_rng(707)
    literal, restricted, ci = [], [], []
    for i in range(100):
        K, N_R, N_T, L = [(2, 8, 16, 4), (2, 4, 12, 2), (2, 8, 32, 4), (4, 8, 32, 4)][i % 4]
        H, s, c = random_instance(rng, K, N_R, N_T, L)
        _, B = admissible_basis(s, K, L)
        outs = [ssvmp_precoder(H, s, c, 1.0), sdp_precoder(s, c, 1.0, K, L, N_T)]
        for out in outs:
            literal.append(out.sigma[-1] - np.linalg.eigvalsh(out.P1)[0])
            lam = np.linalg.eigvalsh(realify(B.conj().T @ out.P1 @ B))[0]
            restricted.append(np.linalg.svd(out.P @ B, compute_uv=False)[-1] - lam)
        g = build_ci_geometry(selector_matrix(H, L), H, s, c)
        o = outs[0]
        ci.append(max(float(np.max(o.t - o.gamma[g.outer_mask], initial=0.0)),
                      float(np.max(np.abs(o.gamma[~g.outer_mask] - o.t), initial=0.0)),
                      float(np.max(np.abs(g.G @ (o.P @ s) - g.B @ o.gamma)))))
    finish(7, {"literal bound": min(literal) >= -1e-6, "admissible-subspace bound": min(restricted) >= -1e-6,
               "ssvmp ci": max(ci) <= 1e-6},
           f"min sigma_min(P)-lambda_min(P1) {min(literal):.1e}, on admissible subspace "
           f"{min(restricted):.1e} (>=-1e-6), max SSVMP CI violation {max(ci):.1e} (<=1e-6)")


def test_criterion_08_detector_equivalences():
    start = time.perf_counter()
    rng = np.random.default_rng(808)
    c = build_constellation(16)
    qr_agree = qrm_agree = 0
    trials = 10_000
    for _ in range(trials):
        M = (rng.standard_normal((4, 2)) + 1j * rng.standard_normal((4, 2))) / np.sqrt(2)
        s = c.points[rng.integers(0, 16, 2)]
        y = M @ s + 0.4 * (rng.standard_normal(4) + 1j * rng.standard_normal(4))
        ref = mld_detect(y, M, c).indices
        qr_agree += np.array_equal(qr_mld_detect(y, M, c).indices, ref)
        qrm_agree += np.array_equal(qrm_mld_detect(y, M, c, M=16).indices, ref)
    bound_ok = 0
    for _ in range(trials):
        n = int(rng.integers(1, 7))
        A = _random_psd(rng, n)
        Bm = _random_psd(rng, n)
        bound_ok += von_neumann_bound(A, Bm) <= np.trace(A @ Bm).real + 1e-9
    elapsed = time.perf_counter() - start
    finish(8, {"qr-mld": qr_agree == trials, "qrm-mld": qrm_agree == trials, "trace bound": bound_ok == trials},
           f"QR-MLD agrees {qr_agree}/{trials}, QRM-MLD(M=16) agrees {qrm_agree}/{trials}, "
           f"trace bound holds {bound_ok}/{trials}", elapsed, 300)


def _random_psd(rng, n):
    r = int(rng.integers(1, n + 1))
    X = rng.standard_normal((n, r)) + 1j * rng.standard_normal((n, r))
    return X @ X.conj().T


# --------------------------------------------------------------------------
# scheme comparison sweeps (criteria 9 and 11)
# --------------------------------------------------------------------------
SWEEP_SNR = [0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 35.0]
SWEEP_RUNS = [
    (16, "traditional_slp", "mld"), (16, "ssvmp", "mld"), (16, "sdp", "mld"), (16, "bd", "mld"),
    (16, "joint_design", "linear_combiner"), (16, "ssvmp", "qrm_mld"), (16, "sdp", "qrm_mld"),
    (32, "traditional_slp", "mld"), (32, "ssvmp", "qrm_mld"), (32, "sdp", "qrm_mld"),
    (32, "bd", "qrm_mld"), (32, "joint_design", "linear_combiner"),
]


def sweep_config(N_T, scheme, detector, workers=1):
    return SimConfig(N_T=N_T, N_R=8, L=4, K=2, order=16, scheme=scheme, detector=detector, M=8,
                     snr_db_list=list(SWEEP_SNR), slots=2000, master_seed=2024, workers=workers)


def run_comparison_sweeps(workers):
    out = {}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for key in SWEEP_RUNS:
            out[key] = run_ber_sweep(sweep_config(*key, workers=workers))
    return out


@pytest.fixture(scope="module")
def comparison_sweeps():
    start = time.perf_counter()
    records = run_comparison_sweeps(workers=1)
    return records, time.perf_counter() - start


def _highest_common_nonzero(series):
    for j in range(len(SWEEP_SNR) - 1, -1, -1):
        if all(recs[j].bit_errors > 0 for recs in series):
            return j
    return None


def test_criterion_09_scheme_comparison(comparison_sweeps):
    records, elapsed = comparison_sweeps
    checks, notes = {}, []
    for N_T in (16, 32):
        bers = [r.ber for r in records[(N_T, "traditional_slp", "mld")]]
        checks[f"(a) N_T={N_T}"] = min(bers) > 0.1
        notes.append(f"(a) N_T={N_T} traditional min BER {min(bers):.3f} (>0.1)")
    for N_T, det in ((16, "mld"), (32, "qrm_mld")):
        ss, sd = records[(N_T, "ssvmp", det)], records[(N_T, "sdp", det)]
        jd, bd = records[(N_T, "joint_design", "linear_combiner")], records[(N_T, "bd", det)]
        j = _highest_common_nonzero([ss, sd, jd, bd])
        if j is None:
            checks[f"(b) N_T={N_T}"] = False
            notes.append(f"(b) N_T={N_T}: no SNR with errors for all schemes")
            continue
        a, b, cj, d = ss[j], sd[j], jd[j], bd[j]
        checks[f"(b) N_T={N_T} ssvmp<=sdp"] = separated(a, b)
        checks[f"(b) N_T={N_T} sdp<=joint"] = separated(b, cj)
        checks[f"(b) N_T={N_T} ssvmp<bd"] = separated(a, d)
        notes.append(f"(b) N_T={N_T} at {SWEEP_SNR[j]:.0f} dB: ssvmp {a.ber:.2e}, sdp {b.ber:.2e}, "
                     f"joint {cj.ber:.2e}, bd {d.ber:.2e}")
    worst = 1.0
    for scheme in ("ssvmp", "sdp"):
        for ml, qm in zip(records[(16, scheme, "mld")], records[(16, scheme, "qrm_mld")]):
            if ml.bit_errors == 0 and qm.bit_errors == 0:
                continue
            ratio = np.inf if min(ml.ber, qm.ber) == 0 else max(ml.ber, qm.ber) / min(ml.ber, qm.ber)
            worst = max(worst, ratio)
    checks["(c) qrm within 3x"] = worst <= 3.0
    notes.append(f"(c) worst QRM/MLD BER ratio {worst:.2f} (<=3)")
    finish(9, checks, "; ".join(notes), elapsed, 3600)


def test_criterion_10_trends():
    start = time.perf_counter()

    def point(N_R, L, K):
        cfg = SimConfig(N_T=32, N_R=N_R, L=L, K=K, order=16, scheme="ssvmp", detector="qrm_mld", M=8,
                        snr_db_list=[25.0], slots=1000, master_seed=2025)
        return run_ber_sweep(cfg)[0]

    base16 = point(16, 4, 2)
    l8 = point(16, 8, 2)
    base8 = point(8, 4, 2)
    k4 = point(8, 4, 4)
    elapsed = time.perf_counter() - start
    finish(10, {"L 4->8 increases": separated(base16, l8),
                "N_R 8->16 decreases": separated(base16, base8),
                "K 2->4 increases": separated(base8, k4)},
           f"SSVMP+QRM-MLD at 25 dB: L=4 {base16.bit_errors}/{base16.bits_total} vs L=8 "
           f"{l8.bit_errors}/{l8.bits_total}; N_R=16 {base16.bit_errors} vs N_R=8 "
           f"{base8.bit_errors}/{base8.bits_total}; K=2 {base8.bit_errors} vs K=4 "
           f"{k4.bit_errors}/{k4.bits_total} (3 s.e. separation)", elapsed, 1800)


def _csv_without_time(records, path):
    export_results(records, path)
    lines = path.read_text().splitlines()
    drop = CSV_FIELDS.index("wall_time_ms")
    return [",".join(v for i, v in enumerate(line.split(",")) if i != drop) for line in lines]


def test_criterion_11_determinism(comparison_sweeps, tmp_path):
    first, _ = comparison_sweeps
    second = run_comparison_sweeps(workers=4)
    mismatched = []
    for key in SWEEP_RUNS:
        a = _csv_without_time(first[key], tmp_path / "a.csv")
        b = _csv_without_time(second[key], tmp_path / "b.csv")
        if a != b:
            mismatched.append("/".join(map(str, key)))
    finish(11, {"identical csv": not mismatched},
           f"{len(SWEEP_RUNS) - len(mismatched)}/{len(SWEEP_RUNS)} sweeps identical between 1 and 4 workers"
           + (f" (differ: {', '.join(mismatched)})" if mismatched else ""))
