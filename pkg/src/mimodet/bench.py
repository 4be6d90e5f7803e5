"""Monte Carlo SER sweep harness.

Determinism contract: for a fixed (seed, workers) the produced CSV is
byte-identical across runs. Every task draws from an RNG stream keyed by
(seed, snr-index, worker-id, round-index), so results are independent of
task scheduling; only the configured worker count changes the stream
layout.
"""

from __future__ import annotations

import concurrent.futures as cf
import math
from dataclasses import dataclass, field

import numpy as np

from .channel import (
    Constellation,
    constellation_from_json,
    constellation_to_json,
    make_rng,
    random_transmission,
    sample_channel,
    snr_to_sigma2,
)
from .detectors import EpConfig, ep_detect, ml_detect, mmse_detect
from .errors import ConfigError
from .gepnet import gepnet_detect, load_gepnet
from .weights_io import read_bundle

DETECTORS = ("mmse", "ml", "ep", "gepnet")

CSV_HEADER = "snr_db,trials,symbol_errors,ser"


@dataclass(frozen=True)
class SweepConfig:
    n_t: int
    n_r: int
    constellation: Constellation
    detector: str
    snr_start: float
    snr_stop: float
    snr_step: float
    mod_label: str = "qam"
    weights_path: str | None = None
    min_trials: int = 10_000
    min_errors: int = 100
    max_trials: int = 1_000_000
    seed: int = 0
    workers: int = 1
    out_path: str | None = None
    ep_iterations: int = 10
    damping: float = 0.7

    def __post_init__(self):
        if self.detector not in DETECTORS:
            raise ConfigError(f"unknown detector {self.detector!r}")
        if self.snr_step <= 0:
            raise ConfigError("snr_step must be > 0")
        if self.snr_stop < self.snr_start:
            raise ConfigError("snr_stop must be >= snr_start")
        if self.min_trials < 1:
            raise ConfigError("min_trials must be >= 1")
        if self.max_trials < self.min_trials:
            raise ConfigError("max_trials must be >= min_trials")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.detector == "ep" and self.constellation.source != "qam":
            raise ConfigError("the EP detector requires a QAM constellation")
        if self.detector == "gepnet" and not self.weights_path:
            raise ConfigError("detector=gepnet needs a weights path")

    @property
    def m(self) -> int:
        return self.constellation.order

    def snr_points(self) -> list[float]:
        count = int(math.floor((self.snr_stop - self.snr_start) / self.snr_step + 1e-9)) + 1
        return [self.snr_start + i * self.snr_step for i in range(count)]


@dataclass(frozen=True)
class SerPoint:
    snr_db: float
    trials: int         # transmissions; each carries n_t symbol decisions
    symbol_errors: int
    n_t: int

    @property
    def ser(self) -> float:
        return self.symbol_errors / (self.trials * self.n_t) if self.trials else 0.0

    @property
    def standard_error(self) -> float:
        """Binomial standard error of the SER estimate."""
        n = self.trials * self.n_t
        if n == 0:
            return 0.0
        p = self.symbol_errors / n
        return math.sqrt(max(p * (1.0 - p), 0.0) / n)


# Per-process cache of constructed detector contexts, keyed by the task
# spec; lives at module level so process-pool workers reuse it.
_CTX_CACHE: dict = {}


def _detector_ctx(spec: tuple):
    ctx = _CTX_CACHE.get(spec)
    if ctx is None:
        detector, mod_json, weights_path, ep_iters, damping = spec
        constellation = constellation_from_json(mod_json)
        if detector == "gepnet":
            weights, gcfg, bundle_c = load_gepnet(read_bundle(weights_path))
            if not np.allclose(bundle_c.points, constellation.points, atol=1e-6):
                raise ConfigError(
                    "configured constellation disagrees with the weight bundle's"
                )
            run = lambda y, ch: gepnet_detect(y, ch, bundle_c, weights, gcfg)
        elif detector == "ep":
            ep_cfg = EpConfig(iterations=ep_iters, damping=damping)
            run = lambda y, ch: ep_detect(y, ch, constellation, ep_cfg)
        elif detector == "ml":
            run = lambda y, ch: ml_detect(y, ch, constellation)
        else:
            run = lambda y, ch: mmse_detect(y, ch, constellation)
        ctx = (constellation, run)
        _CTX_CACHE[spec] = ctx
    return ctx


def _run_chunk(
    spec: tuple,
    n_t: int,
    n_r: int,
    seed: int,
    snr_idx: int,
    snr_db: float,
    worker_id: int,
    round_idx: int,
    chunk: int,
) -> tuple[int, int]:
    """Simulate ``chunk`` i.i.d. transmissions; returns (trials, errors)."""
    constellation, run = _detector_ctx(spec)
    rng = make_rng(seed, snr_idx, worker_id, round_idx)
    sigma2 = snr_to_sigma2(snr_db, n_t, n_r)
    errors = 0
    for _ in range(chunk):
        ch = sample_channel(rng, n_t, n_r, sigma2)
        sample = random_transmission(rng, constellation, ch)
        result = run(sample.y, ch)
        errors += int(np.count_nonzero(result.messages != sample.messages))
    return chunk, errors


def run_sweep(cfg: SweepConfig) -> list[SerPoint]:
    """Run the sweep; writes the CSV when ``out_path`` is set.

    Each SNR point accumulates rounds of ``workers`` chunks until at least
    min_trials trials ran and either min_errors symbol errors were seen or
    max_trials is reached.
    """
    spec = (
        cfg.detector,
        constellation_to_json(cfg.constellation),
        cfg.weights_path,
        cfg.ep_iterations,
        cfg.damping,
    )
    _detector_ctx(spec)  # validate weights/constellation before spawning work

    pool = None
    if cfg.workers > 1:
        pool = cf.ProcessPoolExecutor(max_workers=cfg.workers)
    try:
        points = []
        chunk = (cfg.min_trials + cfg.workers - 1) // cfg.workers
        for snr_idx, snr_db in enumerate(cfg.snr_points()):
            trials = errors = 0
            round_idx = 0
            while True:
                this_chunk = min(chunk, max(1, (cfg.max_trials - trials + cfg.workers - 1) // cfg.workers))
                args = [
                    (spec, cfg.n_t, cfg.n_r, cfg.seed, snr_idx, snr_db, w, round_idx, this_chunk)
                    for w in range(cfg.workers)
                ]
                if pool is None:
                    results = [_run_chunk(*a) for a in args]
                else:
                    results = list(pool.map(_run_chunk_star, args))
                for t, e in results:
                    trials += t
                    errors += e
                round_idx += 1
                if trials >= cfg.min_trials and (
                    errors >= cfg.min_errors or trials >= cfg.max_trials
                ):
                    break
            points.append(
                SerPoint(snr_db=snr_db, trials=trials, symbol_errors=errors, n_t=cfg.n_t)
            )
    finally:
        if pool is not None:
            pool.shutdown()

    if cfg.out_path:
        write_csv(cfg, points, cfg.out_path)
    return points


def _run_chunk_star(args):
    return _run_chunk(*args)


def format_csv(cfg: SweepConfig, points: list[SerPoint]) -> str:
    lines = [
        "# mimodet ser sweep",
        f"# detector={cfg.detector} nt={cfg.n_t} nr={cfg.n_r} m={cfg.m}"
        f" mod={cfg.mod_label} seed={cfg.seed} workers={cfg.workers}",
        f"# min_trials={cfg.min_trials} min_errors={cfg.min_errors}"
        f" max_trials={cfg.max_trials}",
        CSV_HEADER,
    ]
    for p in points:
        lines.append(f"{p.snr_db:.6g},{p.trials},{p.symbol_errors},{p.ser:.6g}")
    return "\n".join(lines) + "\n"


def write_csv(cfg: SweepConfig, points: list[SerPoint], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_csv(cfg, points))
