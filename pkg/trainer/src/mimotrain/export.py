"""GEPW weight-bundle and constellation-JSON emission.

This module implements the wire format itself (little-endian "GEPW"
framing, float32 tensors) rather than importing the inference engine: the
byte format and the metadata keys are the contract between the two
packages, and this side must be able to produce it standalone. A minimal
reader lives here too, for round-trip tests and for loading exported
bundles back into torch modules.
"""

from __future__ import annotations

import json
import struct

import numpy as np
import torch

from .config import TrainConfig
from .model import GRU_CONVENTION, LEAKY_SLOPE, GepnetDetector, Modulator, NetSizes

MAGIC = b"GEPW"
FORMAT_VERSION = 1

META_M = "modulation_order"
META_NT = "users_trained"
META_NR = "rx_antennas_trained"
META_SU = "node_feat_size"
META_L = "gnn_rounds"
META_T = "ep_iters"
META_ETA = "damping"
META_SLOPE = "leaky_relu_slope"
META_GRU = "gru_convention"
META_SOURCE = "constellation_source"
META_SNR_RANGE = "train_snr_range_db"
META_SEED = "train_seed"

GRU_GATES = ("update", "reset", "cand")


def _f32(t: torch.Tensor) -> np.ndarray:
    return t.detach().cpu().to(torch.float32).numpy()


def collect_tensors(modulator: Modulator, detector: GepnetDetector):
    """Named float32 tensors in the engine's schema, constellation included."""
    tensors = [
        ("node_init.weight", _f32(detector.node_init.weight)),
        ("node_init.bias", _f32(detector.node_init.bias)),
        ("node_update.weight", _f32(detector.node_update.weight)),
        ("node_update.bias", _f32(detector.node_update.bias)),
    ]
    linears = [m for m in detector.msg_mlp if isinstance(m, torch.nn.Linear)]
    for i, lin in enumerate(linears):
        tensors += [(f"msg_mlp.{i}.weight", _f32(lin.weight)),
                    (f"msg_mlp.{i}.bias", _f32(lin.bias))]
    linears = [m for m in detector.readout if isinstance(m, torch.nn.Linear)]
    for i, lin in enumerate(linears):
        tensors += [(f"readout_mlp.{i}.weight", _f32(lin.weight)),
                    (f"readout_mlp.{i}.bias", _f32(lin.bias))]
    for gate in GRU_GATES:
        tensors += [
            (f"gru.{gate}.input_weight", _f32(getattr(detector.gru, f"{gate}_x"))),
            (f"gru.{gate}.hidden_weight", _f32(getattr(detector.gru, f"{gate}_h"))),
            (f"gru.{gate}.bias", _f32(getattr(detector.gru, f"{gate}_b"))),
        ]
    with torch.no_grad():
        table = modulator.constellation()
    tensors.append(("constellation", _f32(table)))
    linears = [m for m in modulator.net if isinstance(m, torch.nn.Linear)]
    for i, lin in enumerate(linears):
        tensors += [(f"modulator_mlp.{i}.weight", _f32(lin.weight)),
                    (f"modulator_mlp.{i}.bias", _f32(lin.bias))]
    return tensors


def bundle_metadata(cfg: TrainConfig) -> dict[str, str]:
    return {
        META_M: str(cfg.m),
        META_NT: str(cfg.n_t),
        META_NR: str(cfg.n_r),
        META_SU: str(cfg.feat_size),
        META_L: str(cfg.gnn_rounds),
        META_T: str(cfg.iterations),
        META_ETA: repr(cfg.damping),
        META_SLOPE: repr(LEAKY_SLOPE),
        META_GRU: GRU_CONVENTION,
        META_SOURCE: "learned",
        META_SNR_RANGE: f"{cfg.snr_lo_db:g}..{cfg.snr_hi_db:g}",
        META_SEED: str(cfg.seed),
    }


def write_gepw(path, metadata: dict[str, str], tensors) -> None:
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", FORMAT_VERSION))
        fh.write(struct.pack("<I", len(metadata)))
        for key, val in metadata.items():
            kb, vb = key.encode(), val.encode()
            fh.write(struct.pack("<I", len(kb)) + kb)
            fh.write(struct.pack("<I", len(vb)) + vb)
        fh.write(struct.pack("<I", len(tensors)))
        for name, arr in tensors:
            arr = np.ascontiguousarray(arr, dtype=np.float32)
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"tensor {name!r} contains NaN/Inf")
            nb = name.encode()
            fh.write(struct.pack("<I", len(nb)) + nb)
            fh.write(struct.pack("<I", arr.ndim))
            for d in arr.shape:
                fh.write(struct.pack("<I", d))
            fh.write(arr.astype("<f4", copy=False).tobytes(order="C"))


def read_gepw(path):
    """-> (metadata, list of (name, np.ndarray float32))."""
    with open(path, "rb") as fh:
        data = fh.read()
    pos = 0

    def take(n):
        nonlocal pos
        if pos + n > len(data):
            raise ValueError(f"truncated bundle at byte {pos}")
        out = data[pos : pos + n]
        pos += n
        return out

    def u32():
        return struct.unpack("<I", take(4))[0]

    if take(4) != MAGIC:
        raise ValueError("bad magic")
    if u32() != FORMAT_VERSION:
        raise ValueError("unsupported version")
    metadata = {}
    for _ in range(u32()):
        key = take(u32()).decode()
        metadata[key] = take(u32()).decode()
    tensors = []
    for _ in range(u32()):
        name = take(u32()).decode()
        dims = tuple(u32() for _ in range(u32()))
        count = int(np.prod(dims)) if dims else 1
        arr = np.frombuffer(take(4 * count), dtype="<f4").reshape(dims)
        tensors.append((name, arr.astype(np.float32)))
    return metadata, tensors


def export_model(cfg: TrainConfig, modulator: Modulator, detector: GepnetDetector,
                 bundle_path, json_path) -> None:
    """Write the weight bundle and the standalone constellation JSON."""
    write_gepw(bundle_path, bundle_metadata(cfg), collect_tensors(modulator, detector))
    with torch.no_grad():
        table = _f32(modulator.constellation())
    body = {
        "M": cfg.m,
        "source": "learned",
        "points": [[float(r), float(i)] for r, i in table],
    }
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(body, fh)
        fh.write("\n")


def import_bundle(path) -> tuple[NetSizes, Modulator, GepnetDetector]:
    """Rebuild torch modules from an exported bundle (for parity checks)."""
    metadata, tensors = read_gepw(path)
    if metadata.get(META_GRU) != GRU_CONVENTION:
        raise ValueError("bundle uses a different GRU convention")
    t = dict(tensors)
    sizes = NetSizes(
        m=int(metadata[META_M]),
        n_t=int(metadata[META_NT]),
        n_r=int(metadata[META_NR]),
        feat_size=int(metadata[META_SU]),
        hidden1=t["gru.update.hidden_weight"].shape[0],
        hidden2=t["msg_mlp.1.weight"].shape[0],
        readout1=t["readout_mlp.0.weight"].shape[0],
        readout2=t["readout_mlp.1.weight"].shape[0],
        mod_width=t["modulator_mlp.0.weight"].shape[0] if "modulator_mlp.0.weight" in t else 128,
        iterations=int(metadata[META_T]),
        gnn_rounds=int(metadata[META_L]),
        damping=float(metadata[META_ETA]),
    )
    detector = GepnetDetector(sizes)
    with torch.no_grad():
        detector.node_init.weight.copy_(torch.from_numpy(t["node_init.weight"]))
        detector.node_init.bias.copy_(torch.from_numpy(t["node_init.bias"]))
        detector.node_update.weight.copy_(torch.from_numpy(t["node_update.weight"]))
        detector.node_update.bias.copy_(torch.from_numpy(t["node_update.bias"]))
        linears = [m for m in detector.msg_mlp if isinstance(m, torch.nn.Linear)]
        for i, lin in enumerate(linears):
            lin.weight.copy_(torch.from_numpy(t[f"msg_mlp.{i}.weight"]))
            lin.bias.copy_(torch.from_numpy(t[f"msg_mlp.{i}.bias"]))
        linears = [m for m in detector.readout if isinstance(m, torch.nn.Linear)]
        for i, lin in enumerate(linears):
            lin.weight.copy_(torch.from_numpy(t[f"readout_mlp.{i}.weight"]))
            lin.bias.copy_(torch.from_numpy(t[f"readout_mlp.{i}.bias"]))
        for gate in GRU_GATES:
            getattr(detector.gru, f"{gate}_x").copy_(
                torch.from_numpy(t[f"gru.{gate}.input_weight"]))
            getattr(detector.gru, f"{gate}_h").copy_(
                torch.from_numpy(t[f"gru.{gate}.hidden_weight"]))
            getattr(detector.gru, f"{gate}_b").copy_(
                torch.from_numpy(t[f"gru.{gate}.bias"]))
    modulator = Modulator(sizes.m, width=sizes.mod_width,
                          slope=float(metadata[META_SLOPE]))
    if "modulator_mlp.0.weight" in t:
        with torch.no_grad():
            linears = [m for m in modulator.net if isinstance(m, torch.nn.Linear)]
            for i, lin in enumerate(linears):
                lin.weight.copy_(torch.from_numpy(t[f"modulator_mlp.{i}.weight"]))
                lin.bias.copy_(torch.from_numpy(t[f"modulator_mlp.{i}.bias"]))
    return sizes, modulator, detector
