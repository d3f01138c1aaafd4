"""Monte Carlo BER sweeps, AO convergence probes and result export.

Each symbol slot draws its own channel, bits and unit-variance noise from
streams keyed by ``(master_seed, slot, purpose)``.  The same noise draw is
scaled to every SNR point, and the precoder is computed once per slot, so the
curves use common random numbers across SNR.  Slots are independent tasks;
per-slot error counts are summed, so any worker count gives the same totals.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .channel import RngStream, complex_normal, sample_channel
from .constellation import SUPPORTED_ORDERS, build_constellation, map_bits
from .detection import (
    EffectiveChannel,
    combine_and_demod,
    mld_decide,
    qr_mld_detect,
    qrm_mld_detect,
)
from .errors import ConfigurationError
from .precoding import (
    bd_precoder,
    build_ci_geometry,
    joint_design_ao,
    sdp_precoder,
    selector_matrix,
    slp_closed_form,
    ssvmp_precoder,
)

SCHEMES = ("traditional_slp", "joint_design", "ssvmp", "sdp", "bd")
DETECTORS = ("mld", "qr_mld", "qrm_mld", "linear_combiner")
CSV_FIELDS = ("scheme", "detector", "snr_db", "slots", "bit_errors", "bits_total", "ber", "seed",
              "wall_time_ms")


@dataclass
class SimConfig:
    N_T: int = 16
    N_R: int = 8
    L: int = 4
    K: int = 2
    order: int = 16
    scheme: str = "ssvmp"
    detector: str = "mld"
    M: int = 8
    snr_db_list: list[float] = field(default_factory=lambda: [0.0, 5.0, 10.0, 15.0, 20.0, 25.0,
                                                             30.0, 35.0])
    p: float = 1.0
    kappa: float = 1e-5
    slots: int = 2000
    master_seed: int = 0
    workers: int = 1

    def validate(self) -> "SimConfig":
        for name in ("N_T", "N_R", "L", "K", "M", "slots", "workers"):
            if int(getattr(self, name)) < 1:
                raise ConfigurationError(f"{name} must be a positive integer")
        if self.order not in SUPPORTED_ORDERS:
            raise ConfigurationError(f"order must be one of {SUPPORTED_ORDERS}")
        if self.L > self.N_R:
            raise ConfigurationError("L must not exceed N_R")
        if self.N_T < self.K * self.L:
            raise ConfigurationError("N_T must be at least K*L")
        if self.scheme not in SCHEMES:
            raise ConfigurationError(f"scheme must be one of {SCHEMES}")
        if self.detector not in DETECTORS:
            raise ConfigurationError(f"detector must be one of {DETECTORS}")
        if self.detector == "linear_combiner" and self.scheme != "joint_design":
            raise ConfigurationError("linear_combiner detection needs the joint_design scheme")
        if self.p < 0 or self.kappa <= 0:
            raise ConfigurationError("p must be nonnegative and kappa positive")
        if not self.snr_db_list:
            raise ConfigurationError("snr_db_list must not be empty")
        return self

    @classmethod
    def from_dict(cls, data: dict) -> "SimConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ConfigurationError(f"unknown config fields: {sorted(unknown)}")
        cfg = cls(**data)
        cfg.snr_db_list = [float(v) for v in cfg.snr_db_list]
        return cfg


@dataclass
class BerRecord:
    scheme: str
    detector: str
    snr_db: float
    slots: int
    bit_errors: int
    bits_total: int
    ber: float
    seed: int
    wall_time_ms: float

    @property
    def std_error(self) -> float:
        """Binomial standard error of ``ber`` (bits treated as independent)."""
        return float(np.sqrt(max(self.ber * (1 - self.ber), 0.0) / self.bits_total))


@dataclass
class ConvergenceTrace:
    p: float
    t: list[float]
    deltas: list[float]

    @property
    def iterations(self) -> int:
        return len(self.deltas)


def _precode(cfg: SimConfig, H, s, c):
    """Returns ``(x, receivers)``; ``receivers[k]`` is an EffectiveChannel or ``(W_k, gain)``."""
    K, L = cfg.K, cfg.L
    if cfg.scheme == "bd":
        Pk = bd_precoder(H, cfg.p, L)
        x = sum(P @ s[k * L:(k + 1) * L] for k, P in enumerate(Pk))
        return x, [EffectiveChannel.from_precoder(Hk, Pk[k]) for k, Hk in enumerate(H.per_user)]
    if cfg.scheme == "traditional_slp":
        out = slp_closed_form(build_ci_geometry(selector_matrix(H, L), H, s, c), cfg.p)
    elif cfg.scheme == "ssvmp":
        out = ssvmp_precoder(H, s, c, cfg.p)
    elif cfg.scheme == "sdp":
        out = sdp_precoder(s, c, cfg.p, K, L, cfg.N_T)
    else:
        out, comb, _ = joint_design_ao(H, s, c, cfg.p, cfg.kappa)
        if cfg.detector == "linear_combiner":
            return out.P @ s, list(zip(comb.per_user, comb.gains))
    P = out.P
    return P @ s, [EffectiveChannel.from_precoder(Hk, P[:, k * L:(k + 1) * L], K)
                   for k, Hk in enumerate(H.per_user)]


def _slot_errors(cfg: SimConfig, slot: int, sigmas: np.ndarray) -> np.ndarray:
    c = build_constellation(cfg.order)
    K, L, N_R = cfg.K, cfg.L, cfg.N_R
    H = sample_channel(K, N_R, cfg.N_T, RngStream(cfg.master_seed, slot, "channel"))
    bits = RngStream(cfg.master_seed, slot, "bits").generator().integers(
        0, 2, K * L * c.bits_per_symbol)
    s = map_bits(bits, c)
    x, receivers = _precode(cfg, H, s, c)
    noise = complex_normal(RngStream(cfg.master_seed, slot, "noise").generator(), (K * N_R,))
    r = H.stacked @ x
    Y = r[:, None] + noise[:, None] * sigmas[None, :]
    errors = np.zeros(sigmas.size, dtype=np.int64)
    table = c.bit_table
    for k in range(K):
        Yk = Y[k * N_R:(k + 1) * N_R]
        sent = bits[k * L * c.bits_per_symbol:(k + 1) * L * c.bits_per_symbol]
        rx = receivers[k]
        if cfg.detector == "mld":
            idx, _ = mld_decide(Yk, rx, c)
        elif cfg.detector == "qr_mld":
            idx = np.array([qr_mld_detect(Yk[:, j], rx, c).indices for j in range(sigmas.size)])
        elif cfg.detector == "qrm_mld":
            idx = np.array([qrm_mld_detect(Yk[:, j], rx, c, M=cfg.M).indices
                            for j in range(sigmas.size)])
        else:
            Wk, gain = rx
            idx = np.array([combine_and_demod(Yk[:, j], Wk, c, gain).indices
                            for j in range(sigmas.size)])
        got = table[idx].reshape(sigmas.size, -1)
        errors += np.sum(got != sent[None, :], axis=1)
    return errors


def run_ber_sweep(cfg: SimConfig) -> list[BerRecord]:
    """BER at every SNR point of ``cfg``; records in the order of ``snr_db_list``."""
    cfg.validate()
    start = time.perf_counter()
    snr = np.asarray(cfg.snr_db_list, dtype=float)
    # transmit SNR rho = p_ref / sigma^2 with a 1 W reference
    sigmas = np.sqrt(10.0 ** (-snr / 10.0))
    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            per_slot = list(pool.map(lambda i: _slot_errors(cfg, i, sigmas), range(cfg.slots)))
    else:
        per_slot = [_slot_errors(cfg, i, sigmas) for i in range(cfg.slots)]
    errors = np.sum(per_slot, axis=0)
    elapsed_ms = (time.perf_counter() - start) * 1e3
    bits_total = cfg.slots * cfg.K * cfg.L * int(np.log2(cfg.order))
    return [BerRecord(cfg.scheme, cfg.detector, float(v), cfg.slots, int(e), bits_total,
                      int(e) / bits_total, cfg.master_seed, elapsed_ms / snr.size)
            for v, e in zip(snr, errors)]


def run_convergence_probe(cfg: SimConfig, p_list) -> list[ConvergenceTrace]:
    """AO margin trace for each power on one fixed channel and symbol vector."""
    cfg.validate()
    c = build_constellation(cfg.order)
    H = sample_channel(cfg.K, cfg.N_R, cfg.N_T, RngStream(cfg.master_seed, 0, "instance"))
    bits = RngStream(cfg.master_seed, 0, "bits").generator().integers(
        0, 2, cfg.K * cfg.L * c.bits_per_symbol)
    s = map_bits(bits, c)
    traces = []
    for p in p_list:
        _, _, trace = joint_design_ao(H, s, c, float(p), cfg.kappa)
        traces.append(ConvergenceTrace(float(p), [float(v) for v in trace],
                                       [float(v) for v in np.abs(np.diff(trace))]))
    return traces


def export_results(records, path, format: str = "csv") -> Path:
    """Write BER records (or convergence traces) as CSV or JSON."""
    if format not in ("csv", "json"):
        raise ConfigurationError(f"unknown format {format!r}")
    path = Path(path)
    rows = [dataclasses.asdict(r) for r in records]
    traces = bool(records) and isinstance(records[0], ConvergenceTrace)
    try:
        with open(path, "w", newline="") as fh:
            _write(fh, rows, format, traces)
    except OSError as exc:
        raise OSError(f"cannot write results to {path}: {exc.strerror}") from exc
    return path


def _write(fh, rows, format: str, traces: bool) -> None:
    if format == "json":
        json.dump(rows, fh, indent=2)
        fh.write("\n")
        return
    if traces:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["p", "iteration", "t", "delta"])
        for row in rows:
            for i, (t, d) in enumerate(zip(row["t"][1:], row["deltas"]), start=1):
                w.writerow([row["p"], i, repr(t), repr(d)])
        return
    w = csv.DictWriter(fh, fieldnames=CSV_FIELDS, lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})


def load_records(path) -> list[BerRecord]:
    """Read BER records back from a CSV or JSON file written by :func:`export_results`."""
    path = Path(path)
    text = path.read_text()
    if path.suffix == ".json" or text.lstrip().startswith("["):
        return [BerRecord(**row) for row in json.loads(text)]
    out = []
    for row in csv.DictReader(text.splitlines()):
        out.append(BerRecord(row["scheme"], row["detector"], float(row["snr_db"]),
                             int(row["slots"]), int(row["bit_errors"]), int(row["bits_total"]),
                             float(row["ber"]), int(row["seed"]), float(row["wall_time_ms"])))
    return out
