"""Sparse symmetric factorizations: Cholesky (default) with an LU fallback."""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.sparse.csgraph import reverse_cuthill_mckee

from . import _hot


class NotPositiveDefinite(np.linalg.LinAlgError):
    pass


class SingularMatrix(np.linalg.LinAlgError):
    pass


class FactorKind(str, enum.Enum):
    CHOLESKY = "cholesky"
    LU = "lu"


@dataclass(frozen=True, eq=False)
class SparseSymMatrix:
    """CSR storage for a symmetric matrix; ``symmetric`` asserts the pattern is."""

    csr: sp.csr_matrix
    symmetric: bool = True

    def __post_init__(self):
        A = sp.csr_matrix(self.csr, dtype=float)
        if A.shape[0] != A.shape[1]:
            raise ValueError("matrix must be square")
        if not np.isfinite(A.data).all():
            raise ValueError("matrix entries must be finite")
        A.sort_indices()
        object.__setattr__(self, "csr", A)

    @property
    def n(self):
        return self.csr.shape[0]

    @property
    def nnz(self):
        return self.csr.nnz

    def toarray(self):
        return self.csr.toarray()


def as_sparse_sym(A, check=True, tol=0.0):
    if isinstance(A, SparseSymMatrix):
        return A
    A = sp.csr_matrix(A, dtype=float)
    if check:
        asym = abs(A - A.T)
        if asym.nnz and asym.max() > tol * max(1.0, abs(A).max()):
            raise ValueError("matrix is not symmetric")
    return SparseSymMatrix(A)


def fill_reducing_order(A, method="rcm"):
    n = A.shape[0]
    if method == "natural":
        return np.arange(n)
    if method == "rcm":
        return np.asarray(reverse_cuthill_mckee(sp.csr_matrix(A), symmetric_mode=True), dtype=np.int64)
    raise ValueError(f"unknown ordering {method!r}")


class Factorization:
    """Reusable factorization of a symmetric matrix.

    Cholesky: ``P A P^T = L L^T`` with ``perm`` the row order of ``P A``.
    LU: a SuperLU object with the determinant sign tracked.
    """

    def __init__(self, kind, n, perm, logdet, sign=1.0, chol=None, lu=None):
        self.kind = FactorKind(kind)
        self.n = n
        self.perm = perm
        self._logdet = logdet
        self.sign = sign
        self._chol = chol
        self._lu = lu

    @property
    def nnz(self):
        if self._chol is not None:
            return int(self._chol[0][-1])
        return int(self._lu.L.nnz + self._lu.U.nnz)

    def solve(self, b):
        b = np.asarray(b, dtype=float)
        if b.shape[0] != self.n:
            raise ValueError("right-hand side dimension mismatch")
        if self.kind is FactorKind.LU:
            return self._lu.solve(b)
        Lp, Li, Lx = self._chol
        cols = b.reshape(self.n, -1)
        out = np.empty_like(cols)
        for j in range(cols.shape[1]):
            y = np.ascontiguousarray(cols[self.perm, j])
            _hot.chol_solve_inplace(self.n, Lp, Li, Lx, y)
            out[self.perm, j] = y
        return out.reshape(b.shape)

    def log_determinant(self):
        return self._logdet

    def diag_inverse(self):
        """diag(A^{-1}) by per-column solves."""
        out = np.empty(self.n)
        e = np.zeros(self.n)
        for i in range(self.n):
            e[i] = 1.0
            out[i] = self.solve(e)[i]
            e[i] = 0.0
        return out


def factorize(A, kind=FactorKind.CHOLESKY, ordering="rcm", spd=True):
    """Factor a symmetric sparse matrix.

    Cholesky raises :class:`NotPositiveDefinite` on a non-positive pivot,
    which doubles as the SPD test.  LU raises :class:`SingularMatrix` on a
    zero pivot and, when ``spd`` is set, :class:`NotPositiveDefinite` if
    the determinant sign comes out negative.
    """
    A = as_sparse_sym(A, check=False).csr
    n = A.shape[0]
    kind = FactorKind(kind)
    if n == 0:
        return Factorization(kind, 0, np.zeros(0, dtype=np.int64), 0.0, chol=(np.zeros(1, dtype=np.int64), np.zeros(0, dtype=np.int64), np.zeros(0)))
    if kind is FactorKind.LU:
        return _factorize_lu(A, spd)
    perm = fill_reducing_order(A, ordering)
    Ap = A[perm][:, perm].tocsc()
    Ap.sort_indices()
    Lp, Li, Lx, failed = _hot.cholesky_csc(n, Ap.indptr, Ap.indices, Ap.data)
    if failed >= 0:
        raise NotPositiveDefinite("not positive definite")
    logdet = 2.0 * float(np.sum(np.log(Lx[Lp[:-1]])))
    return Factorization(kind, n, perm, logdet, chol=(Lp, Li, Lx))


def _factorize_lu(A, spd):
    n = A.shape[0]
    try:
        lu = spla.splu(sp.csc_matrix(A), permc_spec="MMD_AT_PLUS_A")
    except RuntimeError as exc:
        raise SingularMatrix("singular") from exc
    du = lu.U.diagonal()
    if np.any(du == 0):
        raise SingularMatrix("singular")
    sign = float(np.prod(np.sign(du)))
    sign *= _perm_sign(lu.perm_r) * _perm_sign(lu.perm_c)
    if spd and sign < 0:
        raise NotPositiveDefinite("not positive definite")
    logdet = float(np.sum(np.log(np.abs(du))))
    return Factorization(FactorKind.LU, n, np.asarray(lu.perm_c), logdet, sign=sign, lu=lu)


def _perm_sign(perm):
    perm = np.asarray(perm)
    seen = np.zeros(perm.shape[0], dtype=bool)
    sign = 1.0
    for i in range(perm.shape[0]):
        if seen[i]:
            continue
        j, length = i, 0
        while not seen[j]:
            seen[j] = True
            j = perm[j]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


def solve(F, b):
    return F.solve(b)


def log_determinant(F):
    return F.log_determinant()


def is_spd(A):
    try:
        factorize(A)
    except NotPositiveDefinite:
        return False
    return True
