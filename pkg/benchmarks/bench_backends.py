#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure-numpy fallback.

Covers the two hot kernels directly plus end-to-end detector throughput.
The GNN detector is deliberately absent here: its runtime is dominated by
BLAS matmuls, which both backends share.

Run after building the extension:  python3 benchmarks/bench_backends.py
"""

import time

import numpy as np

from mimodet._kernels import pyref
from mimodet.channel import (
    make_rng,
    modulate,
    qam_constellation,
    sample_channel,
    snr_to_sigma2,
    transmit,
)

try:
    from mimodet._kernels import _cext
except ImportError:
    _cext = None


def timeit(fn, reps):
    fn()  # warm up
    t0 = time.perf_counter()
    for _ in range(reps):
        fn()
    return (time.perf_counter() - t0) / reps


def bench_ml_search(n_t, n_r, m, reps):
    rng = make_rng(0)
    c = qam_constellation(m)
    inst = sample_channel(rng, n_t, n_r, snr_to_sigma2(10.0, n_t, n_r))
    s = rng.integers(1, m + 1, size=n_t)
    y = transmit(modulate(s, c), inst, rng)
    args = (inst.h_real, y, c.points.real, c.points.imag, n_t)
    rows = []
    t_py = timeit(lambda: pyref.ml_search(*args), reps)
    rows.append(("python", t_py))
    if _cext is not None:
        assert _cext.ml_search(*args) == pyref.ml_search(*args)
        rows.append(("cext", timeit(lambda: _cext.ml_search(*args), reps)))
    return rows


def bench_pam_posterior(k, levels, reps):
    rng = np.random.default_rng(1)
    mu = rng.normal(size=k)
    v = np.abs(rng.normal(size=k)) + 0.05
    a = np.linspace(-1, 1, levels)
    rows = [("python", timeit(lambda: pyref.pam_posterior(mu, v, a), reps))]
    if _cext is not None:
        rows.append(("cext", timeit(lambda: _cext.pam_posterior(mu, v, a), reps)))
    return rows


def bench_detector(detector, n_t, n_r, m, trials):
    import importlib
    import os
    import subprocess
    import sys

    # run in a subprocess so the backend env var takes effect at import
    code = (
        "import time, numpy as np\n"
        "from mimodet import _kernels\n"
        "from mimodet.channel import make_rng, modulate, qam_constellation, "
        "sample_channel, snr_to_sigma2, transmit\n"
        "from mimodet.detectors import ep_detect, ml_detect\n"
        f"c = qam_constellation({m}); rng = make_rng(3)\n"
        f"sigma2 = snr_to_sigma2(12.0, {n_t}, {n_r})\n"
        "samples = []\n"
        f"for _ in range({trials}):\n"
        f"    inst = sample_channel(rng, {n_t}, {n_r}, sigma2)\n"
        f"    s = rng.integers(1, {m} + 1, size={n_t})\n"
        "    samples.append((inst, transmit(modulate(s, c), inst, rng)))\n"
        f"det = {detector}_detect\n"
        "t0 = time.perf_counter()\n"
        "for inst, y in samples:\n"
        "    det(y, inst, c)\n"
        "dt = time.perf_counter() - t0\n"
        f"print(_kernels.BACKEND, dt / {trials})\n"
    )
    rows = []
    for backend in ("py", "c") if _cext is not None else ("py",):
        env = dict(os.environ, MIMODET_BACKEND=backend)
        out = subprocess.run(
            [sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True
        )
        name, per = out.stdout.split()
        rows.append((name, float(per)))
    return rows


def show(title, rows, unit=1e6, unit_name="us"):
    print(f"\n{title}")
    base = rows[0][1]
    for name, t in rows:
        speedup = base / t if t else float("inf")
        print(f"  {name:<8}{t * unit:10.2f} {unit_name}   x{speedup:.2f}")


def main():
    if _cext is None:
        print("compiled backend not available; showing python-only timings")
    show("ml_search 2x8 16-QAM (256 hypotheses)", bench_ml_search(2, 8, 16, 2000))
    show("ml_search 4x4 16-QAM (65536 hypotheses)", bench_ml_search(4, 4, 16, 30))
    show("pam_posterior K=8, 4 levels", bench_pam_posterior(8, 4, 5000))
    show("ml_detect end-to-end 2x8 16-QAM (per trial)", bench_detector("ml", 2, 8, 16, 2000))
    show("ep_detect end-to-end 2x8 16-QAM (per trial)", bench_detector("ep", 2, 8, 16, 400))


if __name__ == "__main__":
    main()
