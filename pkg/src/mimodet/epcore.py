"""Shared expectation-propagation machinery.

The classical EP detector and the GNN-enhanced detector use the identical
observation update and moment-matching/damping code paths; only the stage
that refines the cavity distribution into a posterior differs (discrete
Gaussian posterior vs. learned readout).

All state arithmetic here is float64.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import cho_factor, cho_solve

# Variance floor applied before any reciprocal; cavity guard on the
# denominator of the cavity-variance formula.
VAR_FLOOR = 1e-8
CAVITY_EPS = 1e-10


@dataclass(frozen=True)
class EpState:
    """Per-iteration EP quantities for the K real symbol components.

    prec/prec_mean are the natural parameters of the factorised Gaussian
    prior (precision and precision*mean); post_* the matched posterior
    marginals; cav_* the cavity (extrinsic) mean and variance.
    """

    prec: np.ndarray
    prec_mean: np.ndarray
    post_var: np.ndarray
    post_mean: np.ndarray
    cav_mean: np.ndarray
    cav_var: np.ndarray
    iteration: int = 0
    cavity_clamps: int = 0
    fallback_reverts: int = 0


def init_state(k: int) -> EpState:
    """Initial state: unit precision, zero mean."""
    z = np.zeros(k)
    return EpState(
        prec=np.ones(k),
        prec_mean=z.copy(),
        post_var=np.ones(k),
        post_mean=z.copy(),
        cav_mean=z.copy(),
        cav_var=np.ones(k),
    )


def observation_update(
    state: EpState, h_real: np.ndarray, y: np.ndarray, sigma2: float
) -> EpState:
    """Posterior marginals under the Gaussian prior, then the cavity
    mean/variance with the component's own factor removed.

    Sigma = (H^T H / sigma2 + diag(prec))^-1
    mu    = Sigma (H^T y / sigma2 + prec_mean)
    cav_var_k  = Sigma_kk / (1 - Sigma_kk * prec_k)
    cav_mean_k = cav_var_k * (mu_k / Sigma_kk - prec_mean_k)
    """
    h = np.asarray(h_real, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    a = h.T @ h / sigma2 + np.diag(state.prec)
    rhs = h.T @ y / sigma2 + state.prec_mean
    cf = cho_factor(a, lower=True)
    sigma = cho_solve(cf, np.eye(a.shape[0]))
    post_var = np.diag(sigma).copy()
    post_mean = sigma @ rhs

    denom = 1.0 - post_var * state.prec
    bad = denom <= CAVITY_EPS
    cav_var = np.where(bad, VAR_FLOOR, post_var / np.where(bad, 1.0, denom))
    cav_var = np.maximum(cav_var, VAR_FLOOR)
    cav_mean = cav_var * (post_mean / post_var - state.prec_mean)
    return replace(
        state,
        post_var=post_var,
        post_mean=post_mean,
        cav_var=cav_var,
        cav_mean=cav_mean,
        cavity_clamps=state.cavity_clamps + int(np.count_nonzero(bad)),
    )


def moment_match_and_damp(
    mean_hat: np.ndarray,
    var_hat: np.ndarray,
    state: EpState,
    damping: float,
    whole_matrix_fallback: bool = False,
) -> EpState:
    """Match the refined posterior moments, revert non-positive precisions,
    then damp against the previous natural parameters.

    The revert is per component by default; ``whole_matrix_fallback`` reverts
    every component as soon as one precision turns non-positive.
    """
    var_hat = np.maximum(np.asarray(var_hat, dtype=np.float64), VAR_FLOOR)
    cav_var = np.maximum(state.cav_var, VAR_FLOOR)
    prec_new = 1.0 / var_hat - 1.0 / cav_var
    pm_new = np.asarray(mean_hat, dtype=np.float64) / var_hat - state.cav_mean / cav_var

    bad = prec_new <= 0.0
    if whole_matrix_fallback and bad.any():
        bad = np.ones_like(bad)
    prec_new = np.where(bad, state.prec, prec_new)
    pm_new = np.where(bad, state.prec_mean, pm_new)

    prec = (1.0 - damping) * prec_new + damping * state.prec
    prec_mean = (1.0 - damping) * pm_new + damping * state.prec_mean
    return replace(
        state,
        prec=prec,
        prec_mean=prec_mean,
        iteration=state.iteration + 1,
        fallback_reverts=state.fallback_reverts + int(np.count_nonzero(bad)),
    )
