"""Bit-exact serialization of trained parameters ("GEPW" format).

Layout, all integers little-endian u32, floats IEEE-754 binary32 LE:

    magic "GEPW" | version | metadata-count
    | per entry: keylen, key (utf-8), vallen, value (utf-8)
    | tensor-count
    | per tensor: namelen, name (utf-8), ndim, dims..., data (row-major)

A bundle that declares the detector config in its metadata (all REQUIRED_META
keys present) is additionally validated for tensor completeness and shape
consistency on read; bundles without that metadata only get structural and
finiteness checks, so the format stays usable for plain tensor snapshots.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass, field

import numpy as np

from .channel import Constellation
from .errors import (
    BundleFormatError,
    CorruptWeightsError,
    IncompleteBundleError,
    NormalizationError,
    TruncatedBundleError,
)

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
META_SOURCE = "constellation_source"  # optional; "qam" | "learned"

REQUIRED_META = (
    META_M,
    META_NT,
    META_NR,
    META_SU,
    META_L,
    META_T,
    META_ETA,
    META_SLOPE,
    META_GRU,
)

GRU_GATES = ("update", "reset", "cand")

MODULATOR_LAYERS = 4


@dataclass
class WeightBundle:
    """Named, shaped float32 tensors plus string metadata."""

    metadata: dict[str, str] = field(default_factory=dict)
    tensors: list[tuple[str, np.ndarray]] = field(default_factory=list)
    version: int = FORMAT_VERSION

    def tensor(self, name: str) -> np.ndarray:
        for n, t in self.tensors:
            if n == name:
                return t
        raise IncompleteBundleError(f"bundle has no tensor {name!r}")

    def has_tensor(self, name: str) -> bool:
        return any(n == name for n, _ in self.tensors)


def _validate_bundle(bundle: WeightBundle) -> None:
    names = [n for n, _ in bundle.tensors]
    if len(set(names)) != len(names):
        raise BundleFormatError("duplicate tensor names in bundle")
    for name, tensor in bundle.tensors:
        arr = np.asarray(tensor)
        if arr.dtype != np.float32:
            raise BundleFormatError(f"tensor {name!r} must be float32")
        if not np.all(np.isfinite(arr)):
            raise CorruptWeightsError(f"tensor {name!r} contains NaN/Inf")
    for k, v in bundle.metadata.items():
        if not isinstance(k, str) or not isinstance(v, str):
            raise BundleFormatError("metadata keys and values must be strings")


def write_bundle(bundle: WeightBundle, sink) -> None:
    """Serialize to a path or binary file object. The bundle is validated
    before any bytes are written."""
    _validate_bundle(bundle)
    if declares_config(bundle):
        validate_gepnet_bundle(bundle)

    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<I", bundle.version))
    buf.write(struct.pack("<I", len(bundle.metadata)))
    for key, val in bundle.metadata.items():
        kb, vb = key.encode("utf-8"), val.encode("utf-8")
        buf.write(struct.pack("<I", len(kb)))
        buf.write(kb)
        buf.write(struct.pack("<I", len(vb)))
        buf.write(vb)
    buf.write(struct.pack("<I", len(bundle.tensors)))
    for name, tensor in bundle.tensors:
        nb = name.encode("utf-8")
        arr = np.ascontiguousarray(tensor, dtype=np.float32)
        buf.write(struct.pack("<I", len(nb)))
        buf.write(nb)
        buf.write(struct.pack("<I", arr.ndim))
        for d in arr.shape:
            buf.write(struct.pack("<I", d))
        buf.write(arr.astype("<f4", copy=False).tobytes(order="C"))

    payload = buf.getvalue()
    if hasattr(sink, "write"):
        sink.write(payload)
    else:
        with open(sink, "wb") as fh:
            fh.write(payload)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.data):
            raise TruncatedBundleError(f"stream ended while reading {what}", self.pos)
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def u32(self, what: str) -> int:
        return struct.unpack("<I", self.take(4, what))[0]


def read_bundle(source) -> WeightBundle:
    """Parse a bundle from a path, binary file object, or bytes."""
    if isinstance(source, (bytes, bytearray)):
        data = bytes(source)
    elif hasattr(source, "read"):
        data = source.read()
    else:
        with open(source, "rb") as fh:
            data = fh.read()

    r = _Reader(data)
    magic = r.take(4, "magic")
    if magic != MAGIC:
        raise BundleFormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    version = r.u32("version")
    if version != FORMAT_VERSION:
        raise BundleFormatError(f"unsupported format version {version}")

    metadata: dict[str, str] = {}
    for _ in range(r.u32("metadata count")):
        key = r.take(r.u32("metadata key length"), "metadata key").decode("utf-8")
        val = r.take(r.u32("metadata value length"), "metadata value").decode("utf-8")
        metadata[key] = val

    tensors: list[tuple[str, np.ndarray]] = []
    for _ in range(r.u32("tensor count")):
        name = r.take(r.u32("tensor name length"), "tensor name").decode("utf-8")
        ndim = r.u32(f"ndim of {name!r}")
        dims = tuple(r.u32(f"dim of {name!r}") for _ in range(ndim))
        count = int(np.prod(dims, dtype=np.int64)) if dims else 1
        raw = r.take(4 * count, f"data of {name!r}")
        arr = np.frombuffer(raw, dtype="<f4").reshape(dims).astype(np.float32)
        if not np.all(np.isfinite(arr)):
            raise CorruptWeightsError(f"tensor {name!r} contains NaN/Inf")
        tensors.append((name, arr))
    if r.pos != len(data):
        raise BundleFormatError(f"{len(data) - r.pos} trailing bytes after last tensor")

    bundle = WeightBundle(metadata=metadata, tensors=tensors, version=version)
    if declares_config(bundle):
        validate_gepnet_bundle(bundle)
    return bundle


def declares_config(bundle: WeightBundle) -> bool:
    return all(k in bundle.metadata for k in REQUIRED_META)


def _meta_int(bundle: WeightBundle, key: str) -> int:
    try:
        return int(bundle.metadata[key])
    except ValueError as exc:
        raise IncompleteBundleError(f"metadata {key!r} is not an integer") from exc


def required_tensor_shapes(bundle: WeightBundle) -> dict[str, tuple[int, ...]]:
    """Expected shape of every required tensor, derived from the declared
    metadata plus the hidden sizes recorded in the tensors themselves."""
    m = _meta_int(bundle, META_M)
    s_u = _meta_int(bundle, META_SU)

    def rows(name: str) -> int:
        t = bundle.tensor(name)
        if t.ndim != 2:
            raise IncompleteBundleError(f"tensor {name!r} must be 2-d, got shape {t.shape}")
        return t.shape[0]

    h1 = rows("gru.update.hidden_weight")
    h2 = rows("msg_mlp.1.weight")
    r1 = rows("readout_mlp.0.weight")
    r2 = rows("readout_mlp.1.weight")
    rows("node_init.weight")
    node_in = bundle.tensor("node_init.weight").shape[1]
    if node_in not in (3, 5):
        raise IncompleteBundleError(
            f"node_init.weight declares {node_in} input features, expected 3 or 5"
        )

    shapes = {
        "node_init.weight": (s_u, node_in),
        "node_init.bias": (s_u,),
        "node_update.weight": (s_u, h1),
        "node_update.bias": (s_u,),
        "msg_mlp.0.weight": (h1, 2 * s_u + 2),
        "msg_mlp.0.bias": (h1,),
        "msg_mlp.1.weight": (h2, h1),
        "msg_mlp.1.bias": (h2,),
        "msg_mlp.2.weight": (s_u, h2),
        "msg_mlp.2.bias": (s_u,),
        "readout_mlp.0.weight": (r1, 2 * s_u),
        "readout_mlp.0.bias": (r1,),
        "readout_mlp.1.weight": (r2, r1),
        "readout_mlp.1.bias": (r2,),
        "readout_mlp.2.weight": (m, r2),
        "readout_mlp.2.bias": (m,),
        "constellation": (m, 2),
    }
    for gate in GRU_GATES:
        shapes[f"gru.{gate}.input_weight"] = (h1, s_u + 2)
        shapes[f"gru.{gate}.hidden_weight"] = (h1, h1)
        shapes[f"gru.{gate}.bias"] = (h1,)
    return shapes


def modulator_tensor_shapes(bundle: WeightBundle) -> dict[str, tuple[int, ...]]:
    m = _meta_int(bundle, META_M)
    widths = []
    for i in range(3):
        t = bundle.tensor(f"modulator_mlp.{i}.weight")
        if t.ndim != 2:
            raise IncompleteBundleError(
                f"tensor 'modulator_mlp.{i}.weight' must be 2-d, got shape {t.shape}"
            )
        widths.append(t.shape[0])
    dims_in = [m] + widths
    dims_out = widths + [2]
    shapes = {}
    for i in range(MODULATOR_LAYERS):
        shapes[f"modulator_mlp.{i}.weight"] = (dims_out[i], dims_in[i])
        shapes[f"modulator_mlp.{i}.bias"] = (dims_out[i],)
    return shapes


def validate_gepnet_bundle(bundle: WeightBundle) -> None:
    """Reject bundles whose declared config conflicts with tensor shapes or
    whose required tensor set is incomplete."""
    missing = [k for k in REQUIRED_META if k not in bundle.metadata]
    if missing:
        raise IncompleteBundleError(f"metadata keys missing: {missing}")
    for key in (META_M, META_NT, META_NR, META_SU, META_L, META_T):
        if _meta_int(bundle, key) < 1:
            raise IncompleteBundleError(f"metadata {key!r} must be positive")
    try:
        float(bundle.metadata[META_ETA])
        float(bundle.metadata[META_SLOPE])
    except ValueError as exc:
        raise IncompleteBundleError("damping/slope metadata must be numeric") from exc

    expected = required_tensor_shapes(bundle)
    if bundle.has_tensor("modulator_mlp.0.weight"):
        expected.update(modulator_tensor_shapes(bundle))
    for name, shape in expected.items():
        if not bundle.has_tensor(name):
            raise IncompleteBundleError(f"required tensor {name!r} missing")
        got = bundle.tensor(name).shape
        if got != shape:
            raise IncompleteBundleError(
                f"tensor {name!r} has shape {got}, expected {shape}"
            )


def bundle_constellation(bundle: WeightBundle) -> Constellation:
    """The authoritative constellation stored in the bundle."""
    pts = np.asarray(bundle.tensor("constellation"), dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise IncompleteBundleError("constellation tensor must have shape [M, 2]")
    power = float(np.mean(pts[:, 0] ** 2 + pts[:, 1] ** 2))
    if abs(power - 1.0) > 1e-5:
        raise NormalizationError(
            f"constellation average power {power:.8f} violates unit-power contract"
        )
    source = bundle.metadata.get(META_SOURCE, "learned")
    return Constellation(points=pts[:, 0] + 1j * pts[:, 1], source=source)


def export_constellation(bundle_or_points) -> str:
    """Channel-schema JSON for a bundle's constellation tensor or a raw
    point array. Refuses (rather than renormalizes) power violations."""
    from .channel import constellation_to_json

    if isinstance(bundle_or_points, WeightBundle):
        c = bundle_constellation(bundle_or_points)
    else:
        pts = np.asarray(bundle_or_points)
        if np.iscomplexobj(pts):
            cplx = pts.astype(np.complex128)
        else:
            if pts.ndim != 2 or pts.shape[1] != 2:
                raise NormalizationError("expected complex points or an [M, 2] array")
            cplx = pts[:, 0] + 1j * pts[:, 1]
        power = float(np.mean(np.abs(cplx) ** 2))
        if abs(power - 1.0) > 1e-5:
            raise NormalizationError(
                f"average power {power:.8f} violates unit-power contract"
            )
        c = Constellation(points=cplx, source="learned")
    return constellation_to_json(c)
