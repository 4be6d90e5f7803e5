# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels; semantics mirror mimodet._kernels.pyref."""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, exp

cnp.import_array()


def ml_search(h_real, y, re_pts, im_pts, Py_ssize_t n_t):
    """Index (lexicographic, last user fastest) of the message tuple
    minimising ||y - H x(s)||^2 over all M^n_t hypotheses."""
    cdef double[:, ::1] h = np.ascontiguousarray(h_real, dtype=np.float64)
    cdef double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef double[::1] re = np.ascontiguousarray(re_pts, dtype=np.float64)
    cdef double[::1] im = np.ascontiguousarray(im_pts, dtype=np.float64)
    cdef Py_ssize_t n = h.shape[0]
    cdef Py_ssize_t m = re.shape[0]
    cdef Py_ssize_t total = 1
    cdef Py_ssize_t u, i, s, pos
    for u in range(n_t):
        total *= m

    # contrib[u, s, i]: column-pair contribution of user u sending symbol s.
    cdef cnp.ndarray[cnp.float64_t, ndim=3] contrib_arr = np.empty((n_t, m, n))
    cdef double[:, :, ::1] contrib = contrib_arr
    for u in range(n_t):
        for s in range(m):
            for i in range(n):
                contrib[u, s, i] = h[i, u] * re[s] + h[i, u + n_t] * im[s]

    cdef cnp.ndarray[cnp.int64_t, ndim=1] digits_arr = np.zeros(n_t, dtype=np.int64)
    cdef long long[::1] digits = digits_arr
    cdef cnp.ndarray[cnp.float64_t, ndim=1] acc_arr = np.zeros(n)
    cdef double[::1] acc = acc_arr  # running H x(s) for the current tuple
    for u in range(n_t):
        for i in range(n):
            acc[i] += contrib[u, 0, i]

    cdef double best_d = INFINITY
    cdef Py_ssize_t best_idx = 0
    cdef Py_ssize_t idx
    cdef double d, r
    for idx in range(total):
        d = 0.0
        for i in range(n):
            r = yv[i] - acc[i]
            d += r * r
        if d < best_d:
            best_d = d
            best_idx = idx
        # odometer step: advance last digit, handle carries
        if idx + 1 < total:
            pos = n_t - 1
            while True:
                s = digits[pos]
                for i in range(n):
                    acc[i] -= contrib[pos, s, i]
                if s + 1 < m:
                    digits[pos] = s + 1
                    for i in range(n):
                        acc[i] += contrib[pos, s + 1, i]
                    break
                digits[pos] = 0
                for i in range(n):
                    acc[i] += contrib[pos, 0, i]
                pos -= 1
    return int(best_idx)


def pam_posterior(cav_mean, cav_var, alphabet):
    """Per-component discrete posterior over a real alphabet under a Gaussian
    likelihood N(cav_mean_k, cav_var_k), with its mean and variance."""
    cdef double[::1] mu = np.ascontiguousarray(cav_mean, dtype=np.float64)
    cdef double[::1] v = np.ascontiguousarray(cav_var, dtype=np.float64)
    cdef double[::1] a = np.ascontiguousarray(alphabet, dtype=np.float64)
    cdef Py_ssize_t k = mu.shape[0]
    cdef Py_ssize_t na = a.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] probs_arr = np.empty((k, na))
    cdef cnp.ndarray[cnp.float64_t, ndim=1] mean_arr = np.empty(k)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] var_arr = np.empty(k)
    cdef double[:, ::1] probs = probs_arr
    cdef double[::1] mean = mean_arr
    cdef double[::1] var = var_arr
    cdef Py_ssize_t j, i
    cdef double hi, t, tot, mk, vk
    for j in range(k):
        hi = -INFINITY
        for i in range(na):
            t = a[i] - mu[j]
            t = -(t * t) / (2.0 * v[j])
            probs[j, i] = t
            if t > hi:
                hi = t
        tot = 0.0
        for i in range(na):
            t = exp(probs[j, i] - hi)
            probs[j, i] = t
            tot += t
        mk = 0.0
        for i in range(na):
            probs[j, i] /= tot
            mk += probs[j, i] * a[i]
        vk = 0.0
        for i in range(na):
            t = a[i] - mk
            vk += probs[j, i] * t * t
        mean[j] = mk
        var[j] = vk
    return probs_arr, mean_arr, var_arr
