"""Trainer CLI: train / parity / gradcheck."""

from __future__ import annotations

import argparse
import json
import sys

from .config import TrainConfig, parse_config_file
from .gradcheck import run_gradcheck
from .parity import run_parity
from .train import train


def _cmd_train(args) -> int:
    cfg = parse_config_file(args.config) if args.config else TrainConfig()
    bundle = args.out or f"{cfg.out_prefix}.gepw"
    json_path = args.constellation or f"{cfg.out_prefix}_constellation.json"
    train(cfg, bundle_path=bundle, json_path=json_path)
    print(f"wrote {bundle} and {json_path}")
    return 0


def _cmd_parity(args) -> int:
    report = run_parity(args.weights, n_samples=args.samples, seed=args.seed,
                        engine=args.engine)
    print(json.dumps(report, indent=2))
    if report["engine_rc"] != 0:
        print("engine refused the bundle", file=sys.stderr)
        return 3
    ok = report["max_abs_dev"] <= 1e-4 and report["decision_mismatches"] == 0
    return 0 if ok else 1


def _cmd_gradcheck(args) -> int:
    results = run_gradcheck()
    worst = max(r[4] for r in results)
    print(f"gradcheck passed: {len(results)} entries, worst rel err {worst:.2g}")
    return 0


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="mimotrain", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    tr = sub.add_parser("train", help="run training and export the bundle")
    tr.add_argument("--config", default=None, help="key=value config file")
    tr.add_argument("--out", default=None, help="bundle path (.gepw)")
    tr.add_argument("--constellation", default=None, help="constellation JSON path")
    tr.set_defaults(fn=_cmd_train)

    pa = sub.add_parser("parity", help="trainer-vs-engine forward comparison")
    pa.add_argument("--weights", required=True)
    pa.add_argument("--samples", type=int, default=100)
    pa.add_argument("--seed", type=int, default=0)
    pa.add_argument("--engine", default="mimodet")
    pa.set_defaults(fn=_cmd_parity)

    gc = sub.add_parser("gradcheck", help="finite-difference gradient check")
    gc.set_defaults(fn=_cmd_gradcheck)

    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except AssertionError as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
