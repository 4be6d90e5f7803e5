"""Modulator, GRU cell, and loss semantics."""

import math

import pytest
import torch

from mimotrain.model import GruCell, Modulator, cross_entropy_loss


def test_constellation_unit_power_any_init():
    for seed in range(5):
        torch.manual_seed(seed)
        mod = Modulator(16, width=32)
        with torch.no_grad():
            table = mod.constellation()
        power = float((table**2).sum(dim=1).mean())
        assert abs(power - 1.0) < 1e-6


def test_symbol_equals_constellation_row():
    torch.manual_seed(1)
    mod = Modulator(16, width=32)
    messages0 = torch.tensor([[3, 11], [0, 15]])
    table, x = mod(messages0)
    # same network, same normalization factor: exact equality
    assert torch.equal(x[0, 0], table[3, 0]) and torch.equal(x[0, 2], table[3, 1])
    assert torch.equal(x[1, 1], table[15, 0]) and torch.equal(x[1, 3], table[15, 1])


def test_zero_weight_modulator_collapses_to_bias_direction():
    mod = Modulator(4, width=8)
    with torch.no_grad():
        for layer in mod.net:
            if isinstance(layer, torch.nn.Linear):
                layer.weight.zero_()
                layer.bias.zero_()
        mod.net[-1].bias.copy_(torch.tensor([0.3, -0.4]))
    table = mod.constellation()
    # all points identical; normalization puts them on the unit circle
    assert torch.allclose(table, table[0].expand_as(table))
    assert abs(float((table[0] ** 2).sum()) - 1.0) < 1e-6
    assert torch.allclose(table[0], torch.tensor([0.6, -0.8]), atol=1e-6)


def test_gru_cell_convention():
    torch.manual_seed(2)
    cell = GruCell(3, 4).double()
    h = torch.randn(1, 4, dtype=torch.float64)
    x = torch.randn(1, 3, dtype=torch.float64)
    z = torch.sigmoid(x @ cell.update_x.T + h @ cell.update_h.T + cell.update_b)
    r = torch.sigmoid(x @ cell.reset_x.T + h @ cell.reset_h.T + cell.reset_b)
    n = torch.tanh(x @ cell.cand_x.T + r * (h @ cell.cand_h.T) + cell.cand_b)
    torch.testing.assert_close(cell(h, x), (1 - z) * n + z * h)


def test_gru_zero_cell_halves_hidden():
    cell = GruCell(3, 4)
    with torch.no_grad():
        for p in cell.parameters():
            p.zero_()
    h = torch.tensor([[0.4, -0.2, 0.8, 0.1]])
    torch.testing.assert_close(cell(h, torch.ones(1, 3)), h / 2)


def test_loss_uniform_predictions():
    logp = torch.full((7, 2, 16), math.log(1.0 / 16.0))
    s = torch.randint(0, 16, (7, 2))
    loss = cross_entropy_loss(logp, s)
    assert abs(float(loss) - 2.0 * math.log(16.0)) < 1e-6


def test_loss_one_hot_limit():
    s = torch.randint(0, 16, (5, 2))
    logits = torch.full((5, 2, 16), -40.0)
    logits.scatter_(2, s.unsqueeze(2), 40.0)
    logp = torch.log_softmax(logits, dim=2)
    assert float(cross_entropy_loss(logp, s)) < 1e-6


def test_loss_user_permutation_invariant():
    torch.manual_seed(3)
    logp = torch.log_softmax(torch.randn(4, 3, 16), dim=2)
    s = torch.randint(0, 16, (4, 3))
    perm = torch.tensor([2, 0, 1])
    a = cross_entropy_loss(logp, s)
    b = cross_entropy_loss(logp[:, perm], s[:, perm])
    torch.testing.assert_close(a, b)
