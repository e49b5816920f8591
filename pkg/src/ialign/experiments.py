"""Sum-rate versus SNR sweeps on iid Rayleigh channels.

Noise power is fixed at 1 and the per-user power is ``10^(snr/10)``. Rates
are reported in bits per channel use. Realization ``r`` uses the channel
drawn with seed ``seed + r`` at every SNR point, so curves are compared on
common channels.
"""
from __future__ import annotations

import csv
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .channel import InterferenceChannel, covariances, gen_rayleigh, sum_rate_bits
from .transceiver import AlgoConfig, leakage_min_baseline, run_sum_rate, run_unselfish

log = logging.getLogger(__name__)

ALGORITHMS = ("sum-rate", "unselfish", "leakage")
CSV_COLUMNS = ["alg", "snr_db", "mean_sumrate_bits", "stderr", "realizations", "seed"]


@dataclass
class SweepConfig:
    """Sweep definition.

    ``warm_start`` runs the unselfish algorithm through the SNR points in
    ascending order, starting each point from the previous point's
    beamformers (the first point starts from zero beamformers).
    """

    K: int
    M: int
    N: int
    snr_db: List[float]
    dof: Optional[List[int]] = None
    realizations: int = 20
    seed: int = 0
    algorithms: List[str] = field(default_factory=lambda: list(ALGORITHMS))
    max_outer: int = 500
    tol: float = 1e-6
    leakage_iters: int = 1000
    warm_start: bool = True

    def __post_init__(self):
        self.snr_db = [float(x) for x in self.snr_db]
        if not self.snr_db:
            raise ValueError("snr_db must be non-empty")
        if self.realizations < 1:
            raise ValueError("realizations must be at least 1")
        bad = set(self.algorithms) - set(ALGORITHMS)
        if bad:
            raise ValueError(f"unknown algorithms {sorted(bad)}")
        if self.dof is None:
            self.dof = [1] * self.K
        if len(self.dof) != self.K:
            raise ValueError("dof needs one entry per user")

    @classmethod
    def from_dict(cls, data: dict) -> "SweepConfig":
        return cls(**data)

    @classmethod
    def load(cls, path) -> "SweepConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        return asdict(self)


def snr_to_power(snr_db: float) -> float:
    return 10.0 ** (snr_db / 10.0)


def _one_realization(cfg: SweepConfig, r: int) -> Dict[Tuple[str, float], float]:
    """Sum rates (bits) of every algorithm at every SNR for realization `r`; NaN on failure."""
    base = gen_rayleigh(cfg.K, cfg.M, cfg.N, 1.0, 1.0, seed=cfg.seed + r)
    out: Dict[Tuple[str, float], float] = {}
    order = sorted(cfg.snr_db)
    algo = AlgoConfig(tol=cfg.tol, max_outer=cfg.max_outer)

    if "leakage" in cfg.algorithms:
        # receive and (normalized) transmit directions do not depend on the common power level
        try:
            v, _, _ = leakage_min_baseline(base, cfg.dof, cfg.leakage_iters, seed=cfg.seed + r)
        except Exception as exc:  # noqa: BLE001 - one failed cell must not stop the sweep
            log.warning("leakage failed on realization %d: %s", r, exc)
            v = None
        for snr in order:
            if v is None:
                out[("leakage", snr)] = math.nan
                continue
            ch = base.with_power([snr_to_power(snr)] * cfg.K)
            out[("leakage", snr)] = sum_rate_bits(ch, covariances([np.sqrt(ch.p[k]) * v[k] for k in range(cfg.K)]))

    if "sum-rate" in cfg.algorithms:
        for snr in order:
            ch = base.with_power([snr_to_power(snr)] * cfg.K)
            try:
                q, _ = run_sum_rate(ch, algo)
                out[("sum-rate", snr)] = sum_rate_bits(ch, q)
            except Exception as exc:  # noqa: BLE001
                log.warning("sum-rate failed on realization %d at %g dB: %s", r, snr, exc)
                out[("sum-rate", snr)] = math.nan

    if "unselfish" in cfg.algorithms:
        v = None
        for snr in order:
            ch = base.with_power([snr_to_power(snr)] * cfg.K)
            try:
                v, _ = run_unselfish(ch, cfg.dof, algo, v0=v if cfg.warm_start else None)
                out[("unselfish", snr)] = sum_rate_bits(ch, covariances(v))
            except Exception as exc:  # noqa: BLE001
                log.warning("unselfish failed on realization %d at %g dB: %s", r, snr, exc)
                out[("unselfish", snr)] = math.nan
                v = None
    return out


def worker_count() -> int:
    """Parallel workers: ``IA_THREADS`` if set, capped by the CPU count."""
    cpus = os.cpu_count() or 1
    env = os.environ.get("IA_THREADS")
    if env:
        try:
            return max(1, min(int(env), cpus))
        except ValueError:
            raise ValueError(f"IA_THREADS must be an integer, got {env!r}") from None
    return cpus


def run_sweep(cfg: SweepConfig, workers: Optional[int] = None) -> List[dict]:
    """Run every algorithm at every SNR point; one result row per (alg, snr)."""
    workers = worker_count() if workers is None else max(1, workers)
    reals = range(cfg.realizations)
    if workers == 1:
        per = [_one_realization(cfg, r) for r in reals]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            per = list(pool.map(_one_realization, [cfg] * cfg.realizations, reals))
    rows = []
    for alg in ALGORITHMS:
        if alg not in cfg.algorithms:
            continue
        for snr in cfg.snr_db:
            vals = np.array([p[(alg, snr)] for p in per])
            ok = vals[np.isfinite(vals)]
            n = ok.size
            rows.append({
                "alg": alg,
                "snr_db": snr,
                "mean_sumrate_bits": float(ok.mean()) if n else math.nan,
                "stderr": float(ok.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0 if n else math.nan,
                "realizations": int(n),
                "seed": cfg.seed,
            })
    return rows


def write_csv(rows: Sequence[dict], path) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        out.writeheader()
        for row in rows:
            out.writerow({k: row[k] for k in CSV_COLUMNS})


def read_csv(path) -> List[dict]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    for row in rows:
        row["snr_db"] = float(row["snr_db"])
        row["mean_sumrate_bits"] = float(row["mean_sumrate_bits"])
        row["stderr"] = float(row["stderr"])
        row["realizations"] = int(row["realizations"])
        row["seed"] = int(row["seed"])
    return rows


def curve(rows: Sequence[dict], alg: str) -> Dict[float, float]:
    return {r["snr_db"]: r["mean_sumrate_bits"] for r in rows if r["alg"] == alg}


def slope_per_10db(rows: Sequence[dict], alg: str, lo: float, hi: float) -> float:
    """Least-squares slope of the mean curve over ``[lo, hi]`` dB, in bits per 10 dB."""
    pts = sorted((s, m) for s, m in curve(rows, alg).items() if lo <= s <= hi)
    if len(pts) < 2:
        raise ValueError("need at least two SNR points in range")
    x, y = np.array(pts).T
    return float(np.polyfit(x, y, 1)[0] * 10.0)
