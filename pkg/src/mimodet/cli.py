"""Command-line interface.

Exit codes: 0 success, 2 configuration error, 3 I/O error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import re
import sys

import numpy as np

from . import bench, complexity
from .channel import (
    ChannelInstance,
    Constellation,
    load_constellation,
    qam_constellation,
    real_equivalent,
)
from .errors import (
    BudgetExceededError,
    BundleError,
    ConfigError,
    InvalidOrderError,
    LabelError,
    MimodetError,
    NumericError,
    ShapeError,
    UnsupportedConstellationError,
)
from .gepnet import gepnet_detect, load_gepnet
from .weights_io import bundle_constellation, read_bundle

_CONFIG_ERRORS = (
    ConfigError,
    InvalidOrderError,
    LabelError,
    UnsupportedConstellationError,
    BudgetExceededError,
    ShapeError,
)


def _parse_mod(spec: str) -> tuple[Constellation, str]:
    match = re.fullmatch(r"qam(\d+)", spec)
    if match:
        return qam_constellation(int(match.group(1))), spec
    if spec.startswith("json:"):
        return load_constellation(spec[5:]), spec
    raise ConfigError(f"--mod must be qam<M> or json:PATH, got {spec!r}")


def _cmd_simulate(args) -> int:
    constellation, label = _parse_mod(args.mod)
    cfg = bench.SweepConfig(
        n_t=args.nt,
        n_r=args.nr,
        constellation=constellation,
        detector=args.detector,
        snr_start=args.snr_start,
        snr_stop=args.snr_stop,
        snr_step=args.snr_step,
        mod_label=label,
        weights_path=args.weights,
        min_trials=args.min_trials,
        min_errors=args.min_errors,
        max_trials=args.max_trials,
        seed=args.seed,
        workers=args.workers,
        out_path=args.out,
        ep_iterations=args.ep_iterations,
        damping=args.damping,
    )
    points = bench.run_sweep(cfg)
    for p in points:
        print(f"snr={p.snr_db:g} dB  trials={p.trials}  errors={p.symbol_errors}  ser={p.ser:.6g}")
    print(f"wrote {args.out}")
    return 0


def _cmd_complexity(args) -> int:
    report = complexity.complexity_report(
        args.m, args.k, args.n, s_u=args.su, r1=args.nr1, r2=args.nr2
    )
    width = max(len(k) for k in report)
    for key, val in report.items():
        print(f"{key:<{width}}  {val}")
    return 0


def _cmd_export_constellation(args) -> int:
    bundle = read_bundle(args.weights)
    c = bundle_constellation(bundle)
    with open(args.out, "w", encoding="utf-8") as fh:
        from .channel import constellation_to_json

        fh.write(constellation_to_json(c))
        fh.write("\n")
    csv_path = args.csv or args.out + ".csv"
    with open(csv_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("label,re,im\n")
        for i, p in enumerate(c.points, start=1):
            fh.write(f"{i},{p.real!r},{p.imag!r}\n")
    print(f"wrote {args.out} and {csv_path}")
    return 0


def _cmd_detect(args) -> int:
    """Batch detection over samples given in a JSON file; used by the
    trainer for cross-implementation parity checks.

    Input: {"n_t": int, "n_r": int, "samples": [{"h_re": [[..]], "h_im":
    [[..]], "y": [..N reals..], "sigma2": float}, ...]}
    Output: {"samples": [{"messages": [..], "probs": [[..M..] per user]}]}
    """
    weights, gcfg, constellation = load_gepnet(read_bundle(args.weights))
    with open(args.infile, "r", encoding="utf-8") as fh:
        req = json.load(fh)
    out = []
    for s in req["samples"]:
        h_cplx = np.asarray(s["h_re"], dtype=np.float64) + 1j * np.asarray(
            s["h_im"], dtype=np.float64
        )
        ch = ChannelInstance(
            h_cplx=h_cplx, h_real=real_equivalent(h_cplx), sigma2=float(s["sigma2"])
        )
        res = gepnet_detect(np.asarray(s["y"], dtype=np.float64), ch, constellation, weights, gcfg)
        out.append(
            {
                "messages": [int(v) for v in res.messages],
                "probs": [[float(p) for p in row] for row in res.probs],
            }
        )
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump({"samples": out}, fh)
    print(f"wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mimodet", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="Monte Carlo SER sweep")
    sim.add_argument("--nt", type=int, required=True)
    sim.add_argument("--nr", type=int, required=True)
    sim.add_argument("--mod", required=True, help="qam<M> or json:PATH")
    sim.add_argument("--detector", required=True, choices=bench.DETECTORS)
    sim.add_argument("--weights", default=None)
    sim.add_argument("--snr-start", type=float, required=True)
    sim.add_argument("--snr-stop", type=float, required=True)
    sim.add_argument("--snr-step", type=float, default=5.0)
    sim.add_argument("--min-trials", type=int, default=10_000)
    sim.add_argument("--min-errors", type=int, default=100)
    sim.add_argument("--max-trials", type=int, default=1_000_000)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--workers", type=int, default=1)
    sim.add_argument("--ep-iterations", type=int, default=10)
    sim.add_argument("--damping", type=float, default=0.7)
    sim.add_argument("--out", required=True)
    sim.set_defaults(fn=_cmd_simulate)

    comp = sub.add_parser("complexity", help="multiplication-count report")
    comp.add_argument("--m", type=int, required=True)
    comp.add_argument("--k", type=int, required=True)
    comp.add_argument("--n", type=int, required=True)
    comp.add_argument("--su", type=int, default=8)
    comp.add_argument("--nr1", type=int, default=128)
    comp.add_argument("--nr2", type=int, default=64)
    comp.set_defaults(fn=_cmd_complexity)

    exp = sub.add_parser("export-constellation", help="bundle -> JSON + CSV points")
    exp.add_argument("--weights", required=True)
    exp.add_argument("--out", required=True)
    exp.add_argument("--csv", default=None)
    exp.set_defaults(fn=_cmd_export_constellation)

    det = sub.add_parser("detect", help="batch detection from a JSON sample file")
    det.add_argument("--weights", required=True)
    det.add_argument("--in", dest="infile", required=True)
    det.add_argument("--out", required=True)
    det.set_defaults(fn=_cmd_detect)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except _CONFIG_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, BundleError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (NumericError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
