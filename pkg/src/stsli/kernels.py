"""Compactly supported kernels and the kernel weight matrices W and U."""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import _hot
from .geometry import Metric


class Kernel(str, enum.Enum):
    QUADRATIC = "quadratic"
    TRIANGULAR = "triangular"
    SPHERICAL = "spherical"

    @property
    def code(self):
        return _CODES[self]


_CODES = {
    Kernel.QUADRATIC: _hot.QUADRATIC,
    Kernel.TRIANGULAR: _hot.TRIANGULAR,
    Kernel.SPHERICAL: _hot.SPHERICAL,
}


def kernel_eval(kernel, u):
    """Evaluate ``kernel`` at ``u >= 0``; zero for ``u >= 1``.

    Quadratic ``1 - u**2``, triangular ``1 - u``, spherical
    ``1 - 1.5 u + 0.5 u**3``.
    """
    kernel = Kernel(kernel)
    arr = np.asarray(u, dtype=float)
    if not np.isfinite(arr).all() or (arr < 0).any():
        raise ValueError("kernel argument must be finite and non-negative")
    out = _hot.kern_array(kernel.code, arr)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True, eq=False)
class WeightMatrix:
    """Raw weights ``W``, normalized weights ``U = W / l1_norm`` (both CSR)."""

    W: sp.csr_matrix
    U: sp.csr_matrix
    l1_norm: float
    include_diagonal: bool = True

    @property
    def n(self):
        return self.W.shape[0]


def normalize(W, include_diagonal=True):
    """Divide by the entry-wise L1 norm.

    With ``include_diagonal=False`` the self-weights are dropped from both
    the norm and ``U`` (sensitivity switch; the default keeps them).
    """
    W = sp.csr_matrix(W)
    W.eliminate_zeros()
    W.sort_indices()
    if include_diagonal:
        Wn = W
    else:
        Wn = W.tolil()
        Wn.setdiag(0.0)
        Wn = Wn.tocsr()
        Wn.eliminate_zeros()
    norm = float(np.abs(Wn.data).sum())
    if not norm > 0:
        raise ValueError("degenerate weights")
    U = Wn / norm
    return WeightMatrix(W, sp.csr_matrix(U), norm, include_diagonal)


def build_weights(dataset, bw, metric, kernel=Kernel.QUADRATIC, include_diagonal=True):
    """Kernel weights over all point pairs; entry (n, k) uses the bandwidths of n."""
    kernel = Kernel(kernel)
    n = len(dataset)
    indptr, indices, data = _hot.weight_csr(
        dataset.s, dataset.t, bw.h_s, bw.h_t, metric.code, metric.alpha, kernel.code
    )
    W = sp.csr_matrix((data, indices, indptr), shape=(n, n))
    return normalize(W, include_diagonal)


def kernel_matrix(coords, h, kernel=Kernel.QUADRATIC):
    """Square matrix K(|c_i - c_j| / h_i) for one factor (space or time) of a grid."""
    kernel = Kernel(kernel)
    c = np.asarray(coords, dtype=float)
    if c.ndim == 1:
        c = c[:, None]
    h = np.broadcast_to(np.asarray(h, dtype=float), (c.shape[0],))
    d = np.sqrt(((c[:, None, :] - c[None, :, :]) ** 2).sum(-1))
    return sp.csr_matrix(_hot.kern_array(kernel.code, d / h[:, None]))


def build_weights_gridded(spatial_kernel_matrix, temporal_kernel_matrix, include_diagonal=True):
    """W = K_s (x) K_t for data on a full location-major grid."""
    Ks = sp.csr_matrix(spatial_kernel_matrix)
    Kt = sp.csr_matrix(temporal_kernel_matrix)
    if Ks.shape[0] != Ks.shape[1] or Kt.shape[0] != Kt.shape[1]:
        raise ValueError("kernel factors must be square")
    return normalize(sp.kron(Ks, Kt, format="csr"), include_diagonal)


def grid_weights(locations, times, h_s, h_t, kernel=Kernel.QUADRATIC, include_diagonal=True):
    """Gridded fast path from per-location and per-time bandwidths."""
    Ks = kernel_matrix(locations, h_s, kernel)
    Kt = kernel_matrix(times, h_t, kernel)
    return build_weights_gridded(Ks, Kt, include_diagonal)


def average_squared_increments(U, residuals):
    """sum_{n,k} u_{n,k} (x_n - x_k)^2 using only the stored entries of U."""
    if isinstance(U, WeightMatrix):
        U = U.U
    U = sp.coo_matrix(U)
    x = np.asarray(residuals, dtype=float)
    if x.shape[0] != U.shape[0]:
        raise ValueError("residual length does not match U")
    return float(np.sum(U.data * (x[U.row] - x[U.col]) ** 2))


def is_separable_grid(dataset):
    """True if the points form a full location-major grid (each location at every time)."""
    locs, inv = dataset.locations()
    stamps = np.unique(dataset.t)
    n_loc, n_t = locs.shape[0], stamps.shape[0]
    if n_loc * n_t != len(dataset):
        return False
    inv = inv.reshape(n_loc, n_t)
    if not (inv == inv[:, :1]).all() or np.unique(inv[:, 0]).shape[0] != n_loc:
        return False
    return bool((dataset.t.reshape(n_loc, n_t) == stamps).all())


__all__ = [
    "Kernel",
    "Metric",
    "WeightMatrix",
    "kernel_eval",
    "build_weights",
    "build_weights_gridded",
    "grid_weights",
    "kernel_matrix",
    "average_squared_increments",
    "normalize",
    "is_separable_grid",
]
