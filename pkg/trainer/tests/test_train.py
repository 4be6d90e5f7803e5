"""Training-loop behaviour: gradient flow, divergence guard."""

import pytest
import torch

from mimotrain.config import TrainConfig
from mimotrain.data import sample_batch
from mimotrain.train import DivergenceError, build_models, train, train_step

SMALL = TrainConfig(
    m=16, n_t=2, n_r=8, feat_size=4, hidden1=16, hidden2=8, readout1=16,
    readout2=8, mod_width=32, iterations=3, gnn_rounds=1, batch_size=32,
    snr_lo_db=15.0, snr_hi_db=15.0, seed=1,
)


def test_modulator_alone_learns_through_frozen_detector():
    # random frozen detector, trainable modulator, fixed 15 dB: the loss
    # over 500 batches must drop below the initial level (gradient flows
    # through the channel into the constellation)
    torch.manual_seed(4)
    mod, det = build_models(SMALL)
    for p in det.parameters():
        p.requires_grad_(False)
    opt = torch.optim.Adam(mod.parameters(), lr=1e-3)
    gen = torch.Generator().manual_seed(5)
    losses = []
    for _ in range(500):
        batch = sample_batch(gen, SMALL.batch_size, SMALL.n_t, SMALL.n_r,
                             SMALL.m, SMALL.snr_lo_db, SMALL.snr_hi_db)
        losses.append(train_step(mod, det, batch, opt))
    first = sum(losses[:50]) / 50
    last = sum(losses[-50:]) / 50
    assert last < first, (first, last)


def test_joint_training_reduces_loss():
    cfg = TrainConfig(
        m=16, n_t=2, n_r=8, feat_size=4, hidden1=16, hidden2=8, readout1=16,
        readout2=8, mod_width=32, iterations=3, gnn_rounds=1, batch_size=32,
        epochs=2, batches_per_epoch=120, snr_lo_db=5.0, snr_hi_db=15.0, seed=2,
    )
    _, _, losses = train(cfg, log=lambda *_: None)
    assert losses[-1] < losses[0]


def test_divergence_detector_aborts():
    cfg = TrainConfig(
        m=4, n_t=2, n_r=4, feat_size=4, hidden1=6, hidden2=5, readout1=6,
        readout2=5, mod_width=8, iterations=2, gnn_rounds=1, batch_size=8,
        epochs=12, batches_per_epoch=2, learning_rate=30.0, seed=0,
    )
    with pytest.raises(DivergenceError):
        train(cfg, log=lambda *_: None)
