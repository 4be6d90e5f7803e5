"""Forward-only neural primitives: dense layers, GRU cell, softmax family.

Everything here is pure float32 inference code (no autodiff). Accumulations
inside matmuls may run in higher precision depending on the BLAS, which is
why downstream tolerances are 1e-6 rather than exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import ShapeError

# Convention tag recorded in weight bundles. A bundle trained under a
# different GRU gate convention must be refused, not reinterpreted.
GRU_CONVENTION = "zrn/sigmoid-tanh/newstate=(1-z)*n+z*h/single-bias/v1"

DEFAULT_LEAKY_SLOPE = 0.01


class Activation(Enum):
    NONE = "none"
    RELU = "relu"
    LEAKY_RELU = "leaky_relu"
    LOG_SOFTMAX = "log_softmax"


def _as_f32(x) -> np.ndarray:
    return np.ascontiguousarray(np.asarray(x, dtype=np.float32))


@dataclass(frozen=True)
class DenseLayer:
    """Affine map ``activation(W @ x + b)`` with W of shape [out, in]."""

    weight: np.ndarray
    bias: np.ndarray
    activation: Activation = Activation.NONE
    leaky_slope: float = DEFAULT_LEAKY_SLOPE

    def __post_init__(self):
        object.__setattr__(self, "weight", _as_f32(self.weight))
        object.__setattr__(self, "bias", _as_f32(self.bias))
        if self.weight.ndim != 2 or self.bias.ndim != 1:
            raise ShapeError("dense layer expects 2-d weight and 1-d bias")
        if self.bias.shape[0] != self.weight.shape[0]:
            raise ShapeError(
                f"bias length {self.bias.shape[0]} != out dim {self.weight.shape[0]}"
            )

    @property
    def in_dim(self) -> int:
        return self.weight.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weight.shape[0]


def apply_activation(z: np.ndarray, act: Activation, leaky_slope: float) -> np.ndarray:
    if act is Activation.NONE:
        return z
    if act is Activation.RELU:
        return np.maximum(z, 0.0)
    if act is Activation.LEAKY_RELU:
        return np.where(z >= 0.0, z, np.float32(leaky_slope) * z)
    if act is Activation.LOG_SOFTMAX:
        return log_softmax(z)
    raise ValueError(f"unknown activation {act!r}")


def dense_forward(layer: DenseLayer, x: np.ndarray) -> np.ndarray:
    """Apply one dense layer to ``x`` (last axis is the feature axis).

    Accepts a single vector [in] or a batch [..., in]; returns [..., out].
    """
    x = _as_f32(x)
    if x.shape[-1] != layer.in_dim:
        raise ShapeError(f"input dim {x.shape[-1]} != layer in dim {layer.in_dim}")
    z = x @ layer.weight.T + layer.bias
    return apply_activation(z, layer.activation, layer.leaky_slope)


def mlp_forward(layers: list[DenseLayer], x: np.ndarray) -> np.ndarray:
    for layer in layers:
        x = dense_forward(layer, x)
    return x


@dataclass(frozen=True)
class GruCell:
    """Single GRU cell with one bias per gate.

    Gate convention (must match the trainer's export, see GRU_CONVENTION):

        z = sigmoid(Wz_x @ x + Wz_h @ h + bz)        update gate
        r = sigmoid(Wr_x @ x + Wr_h @ h + br)        reset gate
        n = tanh(Wn_x @ x + r * (Wn_h @ h) + bn)     candidate
        h' = (1 - z) * n + z * h
    """

    update_x: np.ndarray
    update_h: np.ndarray
    update_b: np.ndarray
    reset_x: np.ndarray
    reset_h: np.ndarray
    reset_b: np.ndarray
    cand_x: np.ndarray
    cand_h: np.ndarray
    cand_b: np.ndarray

    def __post_init__(self):
        for name in self.__dataclass_fields__:
            object.__setattr__(self, name, _as_f32(getattr(self, name)))
        h, i = self.update_x.shape
        for name in ("update_x", "reset_x", "cand_x"):
            if getattr(self, name).shape != (h, i):
                raise ShapeError(f"{name} shape {getattr(self, name).shape} != {(h, i)}")
        for name in ("update_h", "reset_h", "cand_h"):
            if getattr(self, name).shape != (h, h):
                raise ShapeError(f"{name} shape {getattr(self, name).shape} != {(h, h)}")
        for name in ("update_b", "reset_b", "cand_b"):
            if getattr(self, name).shape != (h,):
                raise ShapeError(f"{name} shape {getattr(self, name).shape} != {(h,)}")

    @property
    def input_size(self) -> int:
        return self.update_x.shape[1]

    @property
    def hidden_size(self) -> int:
        return self.update_x.shape[0]


def _sigmoid(z: np.ndarray) -> np.ndarray:
    # Split by sign to avoid exp overflow in float32.
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def gru_forward(cell: GruCell, hidden_prev: np.ndarray, x: np.ndarray) -> np.ndarray:
    """One GRU step. Batched over leading axes; feature axis last."""
    x = _as_f32(x)
    h = _as_f32(hidden_prev)
    if x.shape[-1] != cell.input_size:
        raise ShapeError(f"input dim {x.shape[-1]} != cell input {cell.input_size}")
    if h.shape[-1] != cell.hidden_size:
        raise ShapeError(f"hidden dim {h.shape[-1]} != cell hidden {cell.hidden_size}")
    z = _sigmoid(x @ cell.update_x.T + h @ cell.update_h.T + cell.update_b)
    r = _sigmoid(x @ cell.reset_x.T + h @ cell.reset_h.T + cell.reset_b)
    n = np.tanh(x @ cell.cand_x.T + r * (h @ cell.cand_h.T) + cell.cand_b)
    return (1.0 - z) * n + z * h


def log_softmax(v: np.ndarray) -> np.ndarray:
    """Numerically stable log-softmax along the last axis."""
    v = np.asarray(v)
    shifted = v - np.max(v, axis=-1, keepdims=True)
    lse = np.log(np.sum(np.exp(shifted), axis=-1, keepdims=True))
    return shifted - lse


def softmax(v: np.ndarray) -> np.ndarray:
    return np.exp(log_softmax(v))
