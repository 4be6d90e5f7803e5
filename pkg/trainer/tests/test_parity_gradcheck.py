"""Cross-component parity and the finite-difference gradient check."""

import shutil

import pytest
import torch

from mimotrain.config import TrainConfig
from mimotrain.export import META_GRU, export_model, read_gepw, write_gepw
from mimotrain.gradcheck import run_gradcheck
from mimotrain.parity import run_parity
from mimotrain.train import build_models

ENGINE = shutil.which("mimodet")

needs_engine = pytest.mark.skipif(ENGINE is None, reason="mimodet CLI not installed")


@needs_engine
def test_parity_random_init_bundle(tmp_path):
    cfg = TrainConfig()
    torch.manual_seed(7)
    mod, det = build_models(cfg)
    path = tmp_path / "r.gepw"
    export_model(cfg, mod, det, path, tmp_path / "c.json")
    report = run_parity(path, n_samples=100, seed=11)
    assert report["engine_rc"] == 0
    assert report["max_abs_dev"] <= 1e-4
    assert report["decision_mismatches"] == 0


@needs_engine
def test_parity_reports_convention_incompatibility(tmp_path):
    cfg = TrainConfig(
        m=4, n_t=2, n_r=4, feat_size=4, hidden1=6, hidden2=5, readout1=6,
        readout2=5, mod_width=8,
    )
    torch.manual_seed(8)
    mod, det = build_models(cfg)
    path = tmp_path / "r.gepw"
    export_model(cfg, mod, det, path, tmp_path / "c.json")
    metadata, tensors = read_gepw(path)
    metadata[META_GRU] = "legacy-convention"
    bad = tmp_path / "bad.gepw"
    write_gepw(bad, metadata, tensors)

    from mimotrain.parity import _engine_probs

    rc, err, _, _ = _engine_probs(bad, [], 2, 4, engine=ENGINE)
    assert rc != 0
    assert "convention" in err.lower()


def test_gradcheck_passes():
    results = run_gradcheck()
    assert results
    assert max(r[4] for r in results) <= 1e-3
