"""Joint optimization of the modulator and the detector."""

from __future__ import annotations

import math
import time

import torch

from .config import TrainConfig
from .data import received, sample_batch
from .export import export_model
from .model import GepnetDetector, Modulator, NetSizes, cross_entropy_loss


class DivergenceError(RuntimeError):
    pass


def build_models(cfg: TrainConfig) -> tuple[Modulator, GepnetDetector]:
    sizes = NetSizes(
        m=cfg.m, n_t=cfg.n_t, n_r=cfg.n_r, feat_size=cfg.feat_size,
        hidden1=cfg.hidden1, hidden2=cfg.hidden2,
        readout1=cfg.readout1, readout2=cfg.readout2, mod_width=cfg.mod_width,
        iterations=cfg.iterations, gnn_rounds=cfg.gnn_rounds, damping=cfg.damping,
    )
    modulator = Modulator(cfg.m, width=cfg.mod_width)
    detector = GepnetDetector(sizes)
    if cfg.float64:
        modulator.double()
        detector.double()
    return modulator, detector


def train_step(modulator, detector, batch, opt=None):
    """One optimization step on a pre-drawn batch; returns the loss value."""
    messages0, h_real, sigma2, noise = batch
    table, x = modulator(messages0)
    y = received(h_real, x, sigma2, noise)
    logp, _ = detector(h_real, y, sigma2, table)
    loss = cross_entropy_loss(logp, messages0)
    if opt is not None:
        opt.zero_grad(set_to_none=True)
        loss.backward()
        opt.step()
    return float(loss.detach())


def _log_line(msg: str) -> None:
    print(msg, flush=True)


def train(cfg: TrainConfig, bundle_path=None, json_path=None, log=_log_line):
    """Full training run; exports the bundle + constellation JSON when paths
    are given. Returns (modulator, detector, epoch_losses)."""
    torch.manual_seed(cfg.seed)
    gen = torch.Generator().manual_seed(cfg.seed + 1)
    modulator, detector = build_models(cfg)
    params = list(modulator.parameters()) + list(detector.parameters())
    opt = torch.optim.Adam(params, lr=cfg.learning_rate)

    epoch_losses = []
    initial = None  # first-batch loss, before any optimizer step can distort it
    bad_epochs = 0
    for epoch in range(cfg.epochs):
        t0 = time.time()
        total = 0.0
        for _ in range(cfg.batches_per_epoch):
            batch = sample_batch(
                gen, cfg.batch_size, cfg.n_t, cfg.n_r, cfg.m,
                cfg.snr_lo_db, cfg.snr_hi_db,
            )
            step_loss = train_step(modulator, detector, batch, opt)
            if initial is None:
                initial = step_loss
            total += step_loss
        mean_loss = total / cfg.batches_per_epoch
        epoch_losses.append(mean_loss)
        if not math.isfinite(mean_loss) or mean_loss > 10.0 * initial:
            bad_epochs += 1
            if bad_epochs >= 5:
                raise DivergenceError(
                    f"loss {mean_loss:.4g} exceeded 10x the initial {initial:.4g} "
                    f"for 5 consecutive epochs (epoch {epoch + 1})"
                )
        else:
            bad_epochs = 0
        log(f"epoch {epoch + 1}/{cfg.epochs}  loss {mean_loss:.4f}  "
            f"({time.time() - t0:.1f}s)")

    if bundle_path is not None:
        export_model(cfg, modulator, detector, bundle_path,
                     json_path or str(bundle_path) + ".json")
    return modulator, detector, epoch_losses
