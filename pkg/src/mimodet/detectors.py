"""Baseline MU-MIMO detectors: MMSE, exhaustive ML, classical EP."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels, epcore
from .channel import ChannelInstance, Constellation, nearest_labels, split_complex
from .errors import BudgetExceededError, ShapeError, UnsupportedConstellationError

# Exhaustive search refuses above this many hypotheses.
ML_BUDGET = 1 << 24


@dataclass(frozen=True)
class DetectionResult:
    """Hard decisions (1-based labels) plus optional per-user probabilities
    over the M messages and numeric diagnostics."""

    messages: np.ndarray
    probs: np.ndarray | None = None
    diagnostics: dict = field(default_factory=dict)


@dataclass(frozen=True)
class EpConfig:
    iterations: int = 10
    damping: float = 0.7
    whole_matrix_fallback: bool = False

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if not 0.0 <= self.damping < 1.0:
            raise ValueError("damping must lie in [0, 1)")


def _check_dims(y: np.ndarray, channel: ChannelInstance) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (channel.h_real.shape[0],):
        raise ShapeError(f"y has shape {y.shape}, channel expects ({channel.h_real.shape[0]},)")
    return y


def mmse_detect(y, channel: ChannelInstance, c: Constellation) -> DetectionResult:
    """LMMSE soft estimate followed by nearest-point slicing.

    The regulariser is 2*sigma2*I because each real symbol component has
    prior variance 1/2 under the unit-average-power constellation.
    """
    y = _check_dims(y, channel)
    h = channel.h_real
    k = h.shape[1]
    a = h.T @ h + 2.0 * channel.sigma2 * np.eye(k)
    x_soft = np.linalg.solve(a, h.T @ y)
    return DetectionResult(messages=nearest_labels(split_complex(x_soft), c))


def ml_detect(y, channel: ChannelInstance, c: Constellation) -> DetectionResult:
    """Exhaustive maximum-likelihood search over all M^N_T message tuples;
    ties resolve to the lexicographically smallest tuple."""
    y = _check_dims(y, channel)
    n_t = channel.n_t
    m = c.order
    if m**n_t > ML_BUDGET:
        raise BudgetExceededError(
            f"{m}^{n_t} hypotheses exceed the search budget of {ML_BUDGET}"
        )
    best = _kernels.ml_search(channel.h_real, y, c.points.real, c.points.imag, n_t)
    digits = (best // m ** (n_t - 1 - np.arange(n_t))) % m
    return DetectionResult(messages=digits.astype(np.int64) + 1)


def separable_alphabet(c: Constellation) -> np.ndarray:
    """Real per-component alphabet of a square QAM constellation."""
    if c.source != "qam":
        raise UnsupportedConstellationError(
            "EP needs a separable QAM constellation; learned sets are unsupported"
        )
    return np.unique(c.points.real)


def ep_detect(
    y, channel: ChannelInstance, c: Constellation, cfg: EpConfig = EpConfig()
) -> DetectionResult:
    """Classical EP detection on the real-equivalent model.

    Each iteration: observation update (shared with the GNN detector), a
    discrete posterior over the per-component PAM alphabet, moment matching
    with the non-positive-precision fallback, then damping.
    """
    y = _check_dims(y, channel)
    alphabet = separable_alphabet(c)
    k = channel.h_real.shape[1]
    state = epcore.init_state(k)
    probs = mean = None
    for _ in range(cfg.iterations):
        state = epcore.observation_update(state, channel.h_real, y, channel.sigma2)
        probs, mean, var = _kernels.pam_posterior(state.cav_mean, state.cav_var, alphabet)
        state = epcore.moment_match_and_damp(
            mean, var, state, cfg.damping, cfg.whole_matrix_fallback
        )

    messages = nearest_labels(split_complex(mean), c)
    return DetectionResult(
        messages=messages,
        probs=_label_probs(probs, c, alphabet),
        diagnostics={
            "cavity_clamps": state.cavity_clamps,
            "fallback_reverts": state.fallback_reverts,
        },
    )


def _label_probs(comp_probs: np.ndarray, c: Constellation, alphabet: np.ndarray) -> np.ndarray:
    """Combine per-component posteriors into per-user message probabilities
    (product of the real and imaginary marginals)."""
    n_t = comp_probs.shape[0] // 2
    re_idx = np.searchsorted(alphabet, c.points.real)
    im_idx = np.searchsorted(alphabet, c.points.imag)
    out = comp_probs[:n_t, re_idx] * comp_probs[n_t:, im_idx]
    out /= out.sum(axis=1, keepdims=True)
    return out
