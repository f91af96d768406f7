"""SLI precision matrix from normalized kernel weights.

J = (1/lambda) * (c0 I + c1 J1), with J1 the graph Laplacian of U + U^T:
off-diagonal -(u_nk + u_kn), diagonal sum_{l != n} (u_nl + u_ln).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .geometry import STDataset, bandwidths_from_scales, knn_scales, query_knn_scales, Bandwidths
from .kernels import Kernel, WeightMatrix, build_weights
from .sparse_linalg import SparseSymMatrix


@dataclass(frozen=True)
class PrecisionParams:
    lam: float
    c1: float

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lambda must be positive")
        if not self.c1 >= 0:
            raise ValueError("c1 must be non-negative")


def laplacian(U):
    """Increment matrix J1; self-weights on the diagonal of U drop out."""
    if isinstance(U, WeightMatrix):
        U = U.U
    S = sp.csr_matrix(U + U.T)
    S.setdiag(0.0)
    S.eliminate_zeros()
    deg = np.asarray(S.sum(axis=1)).ravel()
    J1 = sp.diags(deg) - S
    J1 = sp.csr_matrix(J1)
    J1.sort_indices()
    return J1


def assemble_Jtilde(U, c1, c0=None):
    """lambda-free precision c0 I + c1 J1 (c0 defaults to 1/N)."""
    if isinstance(U, WeightMatrix):
        U = U.U
    n = U.shape[0]
    if c0 is None:
        c0 = 1.0 / n
    Jt = sp.csr_matrix(c0 * sp.identity(n, format="csr") + c1 * laplacian(U))
    Jt.sort_indices()
    return Jt


def assemble_J(U, params, tilde=False):
    """Training precision J = (I/N + c1 J1) / lambda, or lambda*J when ``tilde``."""
    Jt = assemble_Jtilde(U, params.c1)
    return SparseSymMatrix(Jt if tilde else Jt / params.lam)


def sparsity_index(J):
    A = J.csr if isinstance(J, SparseSymMatrix) else sp.csr_matrix(J)
    return A.nnz / float(A.shape[0]) ** 2


@dataclass(frozen=True, eq=False)
class BlockPrecision:
    """Precision over samples (first N) followed by targets (last P).

    ``Jtilde`` is the lambda-free combined matrix; the block properties
    include the 1/lambda factor.
    """

    Jtilde: sp.csr_matrix
    N: int
    P: int
    c0: float
    lam: float
    weights: WeightMatrix | None = None

    def _block(self, rows, cols, tilde=False):
        A = self.Jtilde[rows][:, cols]
        return sp.csr_matrix(A if tilde else A / self.lam)

    @property
    def _S(self):
        return slice(0, self.N)

    @property
    def _G(self):
        return slice(self.N, self.N + self.P)

    @property
    def J_SS(self):
        return self._block(self._S, self._S)

    @property
    def J_SG(self):
        return self._block(self._S, self._G)

    @property
    def J_GS(self):
        return self._block(self._G, self._S)

    @property
    def J_GG(self):
        return self._block(self._G, self._G)

    def tilde_GS(self):
        return self._block(self._G, self._S, tilde=True)

    def tilde_GG(self):
        return self._block(self._G, self._G, tilde=True)

    def full(self):
        return sp.csr_matrix(self.Jtilde / self.lam)


def check_disjoint(samples, targets):
    if len(targets) == 0 or len(samples) == 0:
        return
    a = samples.coords()
    b = targets.coords()
    both = np.vstack([a, b])
    _, inv, counts = np.unique(both, axis=0, return_inverse=True, return_counts=True)
    inv = inv.reshape(-1)
    if np.any(counts[inv[len(a):]] > 1):
        raise ValueError("target in sample set")


def combined_bandwidths(samples, targets, spec, metric, sample_scales=None):
    """Bandwidths for samples then targets; targets are measured against samples only."""
    if sample_scales is None:
        sample_scales = knn_scales(samples, spec.K_s, spec.K_t)
    ds, dt = sample_scales
    if len(targets):
        qs, qt = query_knn_scales(samples, targets.s, targets.t, spec.K_s, spec.K_t)
        ds = np.concatenate([ds, qs])
        dt = np.concatenate([dt, qt])
    return bandwidths_from_scales(ds, dt, spec, metric)


def assemble_blocks(
    sample_set,
    target_points,
    spec,
    metric,
    kernel=Kernel.QUADRATIC,
    params=None,
    c0_mode="combined",
    include_diagonal=True,
    sample_scales=None,
):
    """Block precision over samples and targets with one combined normalization.

    ``c0_mode``: ``"combined"`` uses 1/(N+P), ``"samples"`` uses 1/N.
    """
    targets = target_points
    if not isinstance(targets, STDataset):
        targets = STDataset(*targets)
    check_disjoint(sample_set, targets)
    n, p = len(sample_set), len(targets)
    bw = combined_bandwidths(sample_set, targets, spec, metric, sample_scales)
    both = STDataset(
        np.vstack([sample_set.s, targets.s.reshape(p, sample_set.dim)]),
        np.concatenate([sample_set.t, targets.t]),
    )
    wm = build_weights(both, bw, metric, kernel, include_diagonal)
    if c0_mode == "combined":
        c0 = 1.0 / (n + p)
    elif c0_mode == "samples":
        c0 = 1.0 / n
    else:
        raise ValueError(f"unknown c0 mode {c0_mode!r}")
    Jt = assemble_Jtilde(wm.U, params.c1, c0)
    return BlockPrecision(Jt, n, p, c0, params.lam, wm)


__all__ = [
    "PrecisionParams",
    "BlockPrecision",
    "Bandwidths",
    "laplacian",
    "assemble_J",
    "assemble_Jtilde",
    "assemble_blocks",
    "combined_bandwidths",
    "check_disjoint",
    "sparsity_index",
]
