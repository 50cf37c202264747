"""Hot loops for the Gaussian two-point estimator and prefix averaging.

Each kernel exists twice: a numba ``@njit`` version and a plain numpy one.
Set ``NSSADDLE_DISABLE_NUMBA=1`` before import to force the numpy path.
Both paths consume the generator in the same order (per sample: the ``d``
direction coordinates, then any noise draws), so they agree up to the
order of floating-point summation.
"""

from __future__ import annotations

import os

import numpy as np

_DISABLED = os.environ.get("NSSADDLE_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}

try:
    if _DISABLED:
        raise ImportError("numba disabled by NSSADDLE_DISABLE_NUMBA")
    from numba import njit

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False

# numpy path draws at most this many samples per generator call
_CHUNK = 1 << 15


def backend() -> str:
    return "numba" if HAVE_NUMBA else "numpy"


# ---------------------------------------------------------------- numpy path


def _two_point_sum_np(rng, p, centers, scale, lin, consts, nu, m, sigma, independent):
    # sum_i sum_j (F_i(p + nu u) - F_i(p)) / nu * u with
    # F_i(q) = scale*|q - centers[i]|^2 + q.lin + consts[i] (+ value noise).
    # Shared noise cancels inside a pair, so it is only drawn when independent.
    d = p.shape[0]
    extra = 2 if (independent and sigma > 0.0) else 0
    acc = np.zeros(d)
    for i in range(centers.shape[0]):
        base_off = p - centers[i]
        v0 = scale * (base_off @ base_off) + p @ lin + consts[i]
        left = m
        while left > 0:
            k = min(left, _CHUNK)
            left -= k
            draws = rng.standard_normal((k, d + extra))
            u = draws[:, :d]
            off = base_off + nu * u
            v1 = scale * np.einsum("ij,ij->i", off, off) + (p + nu * u) @ lin + consts[i]
            if extra:
                diff = (v1 + sigma * draws[:, d]) - (v0 + sigma * draws[:, d + 1])
            else:
                diff = v1 - v0
            acc += (diff / nu) @ u
    return acc


def _kahan_prefix_mean_np(values):
    n, d = values.shape
    out = np.empty((n, d))
    s = np.zeros(d)
    c = np.zeros(d)
    for t in range(n):
        y = values[t] - c
        tmp = s + y
        c = (tmp - s) - y
        s = tmp
        out[t] = s / (t + 1)
    return out


# ---------------------------------------------------------------- numba path

if HAVE_NUMBA:

    @njit(cache=True)
    def _two_point_sum_nb(rng, p, centers, scale, lin, consts, nu, m, sigma, independent):
        d = p.shape[0]
        noisy = independent and sigma > 0.0
        acc = np.zeros(d)
        u = np.empty(d)
        p_lin = 0.0
        for k in range(d):
            p_lin += p[k] * lin[k]
        for i in range(centers.shape[0]):
            sq0 = 0.0
            for k in range(d):
                o = p[k] - centers[i, k]
                sq0 += o * o
            v0 = scale * sq0 + p_lin + consts[i]
            for _ in range(m):
                for k in range(d):
                    u[k] = rng.standard_normal()
                sq1 = 0.0
                shifted_lin = 0.0
                for k in range(d):
                    q = p[k] + nu * u[k]
                    o = q - centers[i, k]
                    sq1 += o * o
                    shifted_lin += q * lin[k]
                v1 = scale * sq1 + shifted_lin + consts[i]
                if noisy:
                    xi1 = rng.standard_normal()
                    xi0 = rng.standard_normal()
                    diff = (v1 + sigma * xi1) - (v0 + sigma * xi0)
                else:
                    diff = v1 - v0
                w = diff / nu
                for k in range(d):
                    acc[k] += w * u[k]
        return acc

    @njit(cache=True)
    def _kahan_prefix_mean_nb(values):
        n, d = values.shape
        out = np.empty((n, d))
        s = np.zeros(d)
        c = np.zeros(d)
        for t in range(n):
            for k in range(d):
                y = values[t, k] - c[k]
                tmp = s[k] + y
                c[k] = (tmp - s[k]) - y
                s[k] = tmp
                out[t, k] = s[k] / (t + 1)
        return out

    two_point_sum = _two_point_sum_nb
    kahan_prefix_mean = _kahan_prefix_mean_nb
else:
    two_point_sum = _two_point_sum_np
    kahan_prefix_mean = _kahan_prefix_mean_np
