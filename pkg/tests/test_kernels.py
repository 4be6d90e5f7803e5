"""Backend-parity and correctness tests for the hot kernels."""

import itertools

import numpy as np
import pytest

from mimodet._kernels import pyref

try:
    from mimodet._kernels import _cext
except ImportError:
    _cext = None

BACKENDS = [pyref] + ([_cext] if _cext is not None else [])


def _brute_force_ml(h, y, re, im, n_t):
    m = re.size
    best_idx, best_d = 0, np.inf
    for idx, digits in enumerate(itertools.product(range(m), repeat=n_t)):
        d = np.asarray(digits)
        x = np.concatenate([re[d], im[d]])
        dist = float(np.sum((y - h @ x) ** 2))
        if dist < best_d:
            best_idx, best_d = idx, dist
    return best_idx


@pytest.mark.parametrize("impl", BACKENDS, ids=lambda i: i.__name__.split(".")[-1])
def test_ml_search_matches_brute_force(impl):
    rng = np.random.default_rng(0)
    for _ in range(25):
        n_t = int(rng.integers(1, 4))
        m = int(rng.choice([2, 4, 8]))
        n = 2 * int(rng.integers(n_t, n_t + 3))
        h = rng.normal(size=(n, 2 * n_t))
        y = rng.normal(size=n)
        re = rng.normal(size=m)
        im = rng.normal(size=m)
        got = impl.ml_search(h, y, re, im, n_t)
        assert got == _brute_force_ml(h, y, re, im, n_t)


@pytest.mark.skipif(_cext is None, reason="compiled backend unavailable")
def test_ml_search_backends_agree():
    rng = np.random.default_rng(1)
    for _ in range(50):
        n_t = int(rng.integers(1, 5))
        m = int(rng.choice([4, 16]))
        h = rng.normal(size=(8, 2 * n_t))
        y = rng.normal(size=8)
        re = rng.normal(size=m)
        im = rng.normal(size=m)
        assert pyref.ml_search(h, y, re, im, n_t) == _cext.ml_search(h, y, re, im, n_t)


@pytest.mark.parametrize("impl", BACKENDS, ids=lambda i: i.__name__.split(".")[-1])
def test_pam_posterior_moments(impl):
    alphabet = np.array([-3.0, -1.0, 1.0, 3.0]) / np.sqrt(5.0)
    cav_mean = np.array([0.0, 10.0, -0.4])
    cav_var = np.array([1.0, 0.01, 0.25])
    probs, mean, var = impl.pam_posterior(cav_mean, cav_var, alphabet)
    np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-12)
    # symmetric cavity at 0 -> zero mean
    assert abs(mean[0]) < 1e-12
    # a cavity far beyond the largest level collapses onto it
    np.testing.assert_allclose(probs[1], [0, 0, 0, 1], atol=1e-12)
    np.testing.assert_allclose(mean[1], alphabet[-1], atol=1e-12)
    assert var[1] < 1e-12
    # direct-formula oracle for the generic component
    w = np.exp(-((alphabet - cav_mean[2]) ** 2) / (2 * cav_var[2]))
    w /= w.sum()
    np.testing.assert_allclose(probs[2], w, rtol=1e-12)
    np.testing.assert_allclose(mean[2], w @ alphabet, rtol=1e-12)
    np.testing.assert_allclose(var[2], w @ (alphabet - w @ alphabet) ** 2, rtol=1e-12)


@pytest.mark.skipif(_cext is None, reason="compiled backend unavailable")
def test_pam_posterior_backends_agree():
    rng = np.random.default_rng(2)
    for _ in range(50):
        k = int(rng.integers(1, 10))
        a = np.sort(rng.normal(size=int(rng.integers(2, 9))))
        mu = rng.normal(scale=2.0, size=k)
        v = np.abs(rng.normal(size=k)) + 1e-6
        p1, m1, v1 = pyref.pam_posterior(mu, v, a)
        p2, m2, v2 = _cext.pam_posterior(mu, v, a)
        np.testing.assert_allclose(p1, p2, rtol=1e-12, atol=1e-15)
        np.testing.assert_allclose(m1, m2, rtol=1e-12, atol=1e-15)
        np.testing.assert_allclose(v1, v2, rtol=1e-12, atol=1e-15)
