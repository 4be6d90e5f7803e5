"""Pure-numpy kernels; reference semantics for the compiled extension.

Both implementations must agree on argmin scan order (lexicographic over
message tuples, first minimum wins) so that backend choice never changes
detection results beyond float rounding on exact ties.
"""

from __future__ import annotations

import numpy as np

_CHUNK = 1 << 16


def ml_search(h_real, y, re_pts, im_pts, n_t: int) -> int:
    """Index (lexicographic, last user fastest) of the message tuple
    minimising ||y - H x(s)||^2 over all M^n_t hypotheses."""
    h = np.asarray(h_real, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    re_pts = np.asarray(re_pts, dtype=np.float64)
    im_pts = np.asarray(im_pts, dtype=np.float64)
    m = re_pts.size
    total = m**n_t
    strides = m ** (n_t - 1 - np.arange(n_t))

    best_idx = 0
    best_d = np.inf
    for lo in range(0, total, _CHUNK):
        idx = np.arange(lo, min(lo + _CHUNK, total), dtype=np.int64)
        digits = (idx[:, None] // strides) % m
        x = np.concatenate([re_pts[digits], im_pts[digits]], axis=1)
        resid = x @ h.T - y
        d = np.einsum("ij,ij->i", resid, resid)
        k = int(np.argmin(d))
        if d[k] < best_d:
            best_d = float(d[k])
            best_idx = int(idx[k])
    return best_idx


def pam_posterior(cav_mean, cav_var, alphabet):
    """Per-component discrete posterior over a real alphabet under a Gaussian
    likelihood N(cav_mean_k, cav_var_k), with its mean and variance.

    Returns (probs [K, A], mean [K], var [K]), all float64.
    """
    cav_mean = np.asarray(cav_mean, dtype=np.float64)
    cav_var = np.asarray(cav_var, dtype=np.float64)
    alphabet = np.asarray(alphabet, dtype=np.float64)
    logits = -((alphabet[None, :] - cav_mean[:, None]) ** 2) / (2.0 * cav_var[:, None])
    logits -= logits.max(axis=1, keepdims=True)
    probs = np.exp(logits)
    probs /= probs.sum(axis=1, keepdims=True)
    mean = probs @ alphabet
    var = np.einsum("ka,ka->k", probs, (alphabet[None, :] - mean[:, None]) ** 2)
    return probs, mean, var
