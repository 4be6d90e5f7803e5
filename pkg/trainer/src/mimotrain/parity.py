"""Cross-implementation parity: trainer forward vs. the engine CLI.

Random (y, H, sigma2) samples go through the training-side forward pass and
through `mimodet detect`; the report carries the max probability deviation
and any hard-decision disagreements on non-borderline samples.
"""

from __future__ import annotations

import json
import subprocess
import tempfile
from pathlib import Path

import numpy as np
import torch

from .export import import_bundle

BORDERLINE_MARGIN = 1e-3


def _engine_probs(bundle_path, samples, n_t, n_r, engine="mimodet"):
    with tempfile.TemporaryDirectory() as tmp:
        infile = Path(tmp) / "samples.json"
        outfile = Path(tmp) / "probs.json"
        infile.write_text(json.dumps({"n_t": n_t, "n_r": n_r, "samples": samples}))
        proc = subprocess.run(
            [engine, "detect", "--weights", str(bundle_path),
             "--in", str(infile), "--out", str(outfile)],
            capture_output=True, text=True,
        )
        if proc.returncode != 0:
            return proc.returncode, proc.stderr, None, None
        body = json.loads(outfile.read_text())
        probs = np.asarray([s["probs"] for s in body["samples"]])
        messages = np.asarray([s["messages"] for s in body["samples"]])
        return 0, "", probs, messages


def run_parity(bundle_path, n_samples: int = 100, seed: int = 0,
               snr_lo: float = 0.0, snr_hi: float = 15.0, engine: str = "mimodet"):
    """-> report dict; raises no exceptions on deviation (callers decide)."""
    sizes, modulator, detector = import_bundle(bundle_path)
    rng = np.random.default_rng(seed)
    with torch.no_grad():
        table = modulator.constellation()
    pts = table.numpy().astype(np.float64)

    samples = []
    h_all = np.empty((n_samples, 2 * sizes.n_r, 2 * sizes.n_t))
    y_all = np.empty((n_samples, 2 * sizes.n_r))
    s2_all = np.empty(n_samples)
    for i in range(n_samples):
        std = np.sqrt(1.0 / (2.0 * sizes.n_r))
        h_re = rng.normal(0.0, std, (sizes.n_r, sizes.n_t))
        h_im = rng.normal(0.0, std, (sizes.n_r, sizes.n_t))
        h_real = np.block([[h_re, -h_im], [h_im, h_re]])
        snr = rng.uniform(snr_lo, snr_hi)
        sigma2 = (sizes.n_t / sizes.n_r) * 10.0 ** (-snr / 10.0)
        msg0 = rng.integers(0, sizes.m, sizes.n_t)
        x = np.concatenate([pts[msg0, 0], pts[msg0, 1]])
        y = h_real @ x + rng.normal(0.0, np.sqrt(sigma2), 2 * sizes.n_r)
        h_all[i], y_all[i], s2_all[i] = h_real, y, sigma2
        samples.append({
            "h_re": h_re.tolist(), "h_im": h_im.tolist(),
            "y": y.tolist(), "sigma2": float(sigma2),
        })

    with torch.no_grad():
        logp, _ = detector(
            torch.from_numpy(h_all), torch.from_numpy(y_all),
            torch.from_numpy(s2_all), table,
        )
        ours = logp.exp().numpy().astype(np.float64)
    ours_msgs = ours.argmax(axis=2) + 1

    rc, err, engine_probs, engine_msgs = _engine_probs(
        bundle_path, samples, sizes.n_t, sizes.n_r, engine=engine
    )
    if rc != 0:
        return {"engine_rc": rc, "engine_error": err.strip(), "n": n_samples}

    max_dev = float(np.max(np.abs(ours - engine_probs)))
    sorted_p = np.sort(engine_probs, axis=2)
    margin = sorted_p[:, :, -1] - sorted_p[:, :, -2]
    borderline = margin <= BORDERLINE_MARGIN
    mismatch = (ours_msgs != engine_msgs) & ~borderline
    return {
        "engine_rc": 0,
        "n": n_samples,
        "max_abs_dev": max_dev,
        "decision_mismatches": int(mismatch.sum()),
        "borderline_decisions": int(borderline.sum()),
    }
