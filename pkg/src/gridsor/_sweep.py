"""Compiled Gauss-Seidel / SOR sweeps over CSR-style adjacency arrays.

Each node ``i`` is updated from ``K[i]`` plus the weighted sum of its
neighbours' current values, visiting nodes in ``order``.  Neighbours with
a smaller position have already been refreshed during the sweep.
"""

import numba
import numpy as np


@numba.njit(cache=True, nogil=True)
def gs_sweep(order, indptr, indices, weight, K, V):
    max_delta = 0.0
    for i in order:
        acc = 0.0
        for p in range(indptr[i], indptr[i + 1]):
            acc += weight[p] * V[indices[p]]
        acc += K[i]
        d = abs(acc - V[i])
        if d > max_delta:
            max_delta = d
        V[i] = acc
    return max_delta


@numba.njit(cache=True, nogil=True)
def sor_sweep(order, indptr, indices, weight, K, V, omega):
    max_delta = 0.0
    for i in order:
        acc = 0.0
        for p in range(indptr[i], indptr[i + 1]):
            acc += weight[p] * V[indices[p]]
        acc += K[i]
        new = omega * acc + (1.0 - omega) * V[i]
        d = abs(new - V[i])
        if d > max_delta:
            max_delta = d
        V[i] = new
    return max_delta


def as_order(n_or_indices) -> np.ndarray:
    if np.ndim(n_or_indices) == 0:
        return np.arange(int(n_or_indices), dtype=np.int64)
    return np.asarray(n_or_indices, dtype=np.int64)
