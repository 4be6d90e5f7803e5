"""Sweep harness, complexity report, and CLI surface tests."""

import json

import numpy as np
import pytest

from mimodet import bench, cli
from mimodet.channel import (
    load_constellation,
    make_rng,
    modulate,
    qam_constellation,
    sample_channel,
    snr_to_sigma2,
    transmit,
)
from mimodet.complexity import complexity_report
from mimodet.errors import ConfigError
from mimodet.gepnet import GepnetConfig, gepnet_detect, load_gepnet, random_weights
from mimodet.weights_io import read_bundle, write_bundle

SMALL_GNN = GepnetConfig(
    iterations=2, gnn_rounds=1, feat_size=4, hidden1=8, hidden2=6, readout1=8, readout2=6
)


def test_complexity_reference_values():
    rep = complexity_report(m=16, k=8, n=8)
    assert rep["ml_total"] == 4_718_592
    assert rep["readout_message_per_iter"] == 45_056
    assert rep["estimation_message_per_iter"] == 384
    assert rep["estimation_symbol_per_iter"] == 96


def test_complexity_requires_square_m_for_sqrt_terms():
    with pytest.raises(ConfigError):
        complexity_report(m=15, k=8, n=8)


def test_sweep_config_validation():
    c = qam_constellation(16)
    with pytest.raises(ConfigError):
        bench.SweepConfig(2, 8, c, "nope", 0, 10, 5)
    with pytest.raises(ConfigError):
        bench.SweepConfig(2, 8, c, "mmse", 0, 10, -1)
    with pytest.raises(ConfigError):
        bench.SweepConfig(2, 8, c, "gepnet", 0, 10, 5)  # no weights
    from mimodet.channel import Constellation

    learned = Constellation(points=c.points, source="learned")
    with pytest.raises(ConfigError):
        bench.SweepConfig(2, 8, learned, "ep", 0, 10, 5)


def _quick_cfg(tmp_path, detector="mmse", **kw):
    defaults = dict(
        n_t=2,
        n_r=8,
        constellation=qam_constellation(16),
        detector=detector,
        snr_start=0.0,
        snr_stop=10.0,
        snr_step=5.0,
        mod_label="qam16",
        min_trials=300,
        min_errors=0,
        max_trials=300,
        seed=7,
        workers=1,
        out_path=str(tmp_path / "out.csv"),
    )
    defaults.update(kw)
    return bench.SweepConfig(**defaults)


def test_sweep_csv_deterministic_and_well_formed(tmp_path):
    cfg = _quick_cfg(tmp_path)
    points = bench.run_sweep(cfg)
    first = (tmp_path / "out.csv").read_bytes()
    bench.run_sweep(cfg)
    assert (tmp_path / "out.csv").read_bytes() == first

    text = first.decode()
    lines = [l for l in text.splitlines() if not l.startswith("#")]
    assert lines[0] == "snr_db,trials,symbol_errors,ser"
    snrs = [float(l.split(",")[0]) for l in lines[1:]]
    assert snrs == sorted(snrs) == [0.0, 5.0, 10.0]
    for p in points:
        assert p.trials >= cfg.min_trials
        assert 0.0 <= p.ser <= 1.0


def test_sweep_respects_min_errors_stopping(tmp_path):
    cfg = _quick_cfg(
        tmp_path, snr_start=0.0, snr_stop=0.0, min_trials=200, min_errors=40,
        max_trials=20_000,
    )
    (point,) = bench.run_sweep(cfg)
    assert point.symbol_errors >= 40
    assert point.trials >= 200


def test_sweep_multiworker_determinism(tmp_path):
    cfg1 = _quick_cfg(tmp_path, workers=2, min_trials=200, max_trials=200,
                      out_path=str(tmp_path / "w2a.csv"))
    cfg2 = _quick_cfg(tmp_path, workers=2, min_trials=200, max_trials=200,
                      out_path=str(tmp_path / "w2b.csv"))
    bench.run_sweep(cfg1)
    bench.run_sweep(cfg2)
    assert (tmp_path / "w2a.csv").read_bytes() == (tmp_path / "w2b.csv").read_bytes()


def test_noiseless_all_classical_detectors_zero_ser(tmp_path):
    for detector in ("mmse", "ml", "ep"):
        cfg = _quick_cfg(
            tmp_path,
            detector=detector,
            snr_start=60.0,
            snr_stop=60.0,
            min_trials=1000,
            max_trials=1000,
            out_path=None,
        )
        (point,) = bench.run_sweep(cfg)
        assert point.symbol_errors == 0, detector


def test_sweep_gepnet_runs_with_random_bundle(tmp_path):
    c = qam_constellation(16)
    bundle = random_weights(SMALL_GNN, c, 2, 8, seed=5)
    path = tmp_path / "w.gepw"
    write_bundle(bundle, str(path))
    cfg = _quick_cfg(
        tmp_path, detector="gepnet", weights_path=str(path), min_trials=50,
        max_trials=50, snr_start=10.0, snr_stop=10.0,
    )
    (point,) = bench.run_sweep(cfg)
    assert point.trials == 50


def test_cli_simulate_and_csv(tmp_path):
    out = tmp_path / "ser.csv"
    rc = cli.main([
        "simulate", "--nt", "2", "--nr", "8", "--mod", "qam16", "--detector", "mmse",
        "--snr-start", "0", "--snr-stop", "5", "--snr-step", "5",
        "--min-trials", "200", "--min-errors", "0", "--max-trials", "200",
        "--seed", "1", "--out", str(out),
    ])
    assert rc == 0
    assert out.read_text().startswith("# mimodet ser sweep")


def test_cli_config_error_exit_code(tmp_path):
    rc = cli.main([
        "simulate", "--nt", "2", "--nr", "8", "--mod", "qam9", "--detector", "mmse",
        "--snr-start", "0", "--snr-stop", "5", "--out", str(tmp_path / "x.csv"),
    ])
    assert rc == 2
    rc = cli.main([
        "simulate", "--nt", "2", "--nr", "8", "--mod", "qam16", "--detector", "gepnet",
        "--snr-start", "0", "--snr-stop", "5", "--out", str(tmp_path / "x.csv"),
    ])
    assert rc == 2


def test_cli_io_error_exit_code(tmp_path):
    rc = cli.main([
        "simulate", "--nt", "2", "--nr", "8", "--mod", "qam16", "--detector", "gepnet",
        "--weights", str(tmp_path / "missing.gepw"),
        "--snr-start", "0", "--snr-stop", "5", "--out", str(tmp_path / "x.csv"),
    ])
    assert rc == 3


def test_cli_complexity(capsys):
    rc = cli.main(["complexity", "--m", "16", "--k", "8", "--n", "8"])
    assert rc == 0
    out = capsys.readouterr().out
    assert "4718592" in out and "45056" in out


def test_cli_export_constellation(tmp_path):
    c = qam_constellation(16)
    bundle = random_weights(SMALL_GNN, c, 2, 8, seed=2)
    wpath = tmp_path / "w.gepw"
    write_bundle(bundle, str(wpath))
    out = tmp_path / "cons.json"
    rc = cli.main(["export-constellation", "--weights", str(wpath), "--out", str(out)])
    assert rc == 0
    back = load_constellation(out)
    np.testing.assert_allclose(back.points, c.points, atol=1e-7)
    csv_lines = (tmp_path / "cons.json.csv").read_text().splitlines()
    assert csv_lines[0] == "label,re,im"
    assert len(csv_lines) == 17


def test_cli_detect_matches_library(tmp_path):
    c = qam_constellation(4)
    bundle = random_weights(SMALL_GNN, c, 2, 4, seed=3)
    wpath = tmp_path / "w.gepw"
    write_bundle(bundle, str(wpath))
    weights, gcfg, bc = load_gepnet(read_bundle(str(wpath)))

    rng = make_rng(9)
    samples = []
    expected = []
    for _ in range(5):
        inst = sample_channel(rng, 2, 4, snr_to_sigma2(10.0, 2, 4))
        s = rng.integers(1, 5, size=2)
        y = transmit(modulate(s, c), inst, rng)
        samples.append(
            {
                "h_re": inst.h_cplx.real.tolist(),
                "h_im": inst.h_cplx.imag.tolist(),
                "y": y.tolist(),
                "sigma2": inst.sigma2,
            }
        )
        expected.append(gepnet_detect(y, inst, bc, weights, gcfg))

    infile = tmp_path / "samples.json"
    infile.write_text(json.dumps({"n_t": 2, "n_r": 4, "samples": samples}))
    outfile = tmp_path / "probs.json"
    rc = cli.main(["detect", "--weights", str(wpath), "--in", str(infile), "--out", str(outfile)])
    assert rc == 0
    got = json.loads(outfile.read_text())
    for g, e in zip(got["samples"], expected):
        assert g["messages"] == [int(v) for v in e.messages]
        np.testing.assert_allclose(np.asarray(g["probs"]), e.probs, atol=1e-6)
