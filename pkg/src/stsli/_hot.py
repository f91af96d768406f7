"""Hot inner loops.

Each kernel exists twice: a numba version (loop code, compiled) and a
fallback (vectorized numpy where the algorithm allows it, otherwise the
same loop code interpreted).  The public wrappers at the bottom dispatch on
:func:`stsli._accel.get_backend`.
"""
import math

import numpy as np

from . import _accel
from ._accel import njit, prange

QUADRATIC, TRIANGULAR, SPHERICAL = 0, 1, 2
COMPOSITE, SEPARABLE = 0, 1

_ROW_CHUNK = 256


# ---------------------------------------------------------------- kernels


@njit(cache=True)
def _kern_scalar(code, u):
    if u >= 1.0:
        return 0.0
    if code == QUADRATIC:
        return 1.0 - u * u
    if code == TRIANGULAR:
        return 1.0 - u
    return 1.0 - 1.5 * u + 0.5 * u * u * u


def kern_array(code, u):
    u = np.asarray(u, dtype=float)
    if code == QUADRATIC:
        v = 1.0 - u * u
    elif code == TRIANGULAR:
        v = 1.0 - u
    else:
        v = 1.0 - 1.5 * u + 0.5 * u * u * u
    return np.where(u < 1.0, v, 0.0)


# ---------------------------------------------------------------- kNN


@njit(cache=True, parallel=True)
def _kth_members_nb(coords, k):
    m, q = coords.shape
    out = np.empty(m)
    for i in prange(m):
        d = np.empty(m - 1)
        c = 0
        for j in range(m):
            if j == i:
                continue
            acc = 0.0
            for a in range(q):
                diff = coords[i, a] - coords[j, a]
                acc += diff * diff
            d[c] = math.sqrt(acc)
            c += 1
        out[i] = np.partition(d, k - 1)[k - 1]
    return out


@njit(cache=True, parallel=True)
def _kth_queries_nb(coords, queries, k):
    # candidates coinciding exactly with the query are skipped; returns inf
    # when fewer than k remain
    m, q = coords.shape
    p = queries.shape[0]
    out = np.empty(p)
    for i in prange(p):
        d = np.empty(m)
        c = 0
        for j in range(m):
            acc = 0.0
            for a in range(q):
                diff = queries[i, a] - coords[j, a]
                acc += diff * diff
            if acc > 0.0:
                d[c] = math.sqrt(acc)
                c += 1
        if c < k:
            out[i] = np.inf
        else:
            out[i] = np.partition(d[:c], k - 1)[k - 1]
    return out


def _pairwise(a, b):
    diff = a[:, None, :] - b[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


def _kth_members_np(coords, k):
    m = coords.shape[0]
    out = np.empty(m)
    for lo in range(0, m, _ROW_CHUNK):
        hi = min(lo + _ROW_CHUNK, m)
        d = _pairwise(coords[lo:hi], coords)
        d[np.arange(hi - lo), np.arange(lo, hi)] = np.inf
        out[lo:hi] = np.partition(d, k - 1, axis=1)[:, k - 1]
    return out


def _kth_queries_np(coords, queries, k):
    p = queries.shape[0]
    out = np.empty(p)
    for lo in range(0, p, _ROW_CHUNK):
        hi = min(lo + _ROW_CHUNK, p)
        d = _pairwise(queries[lo:hi], coords)
        d[d == 0.0] = np.inf
        out[lo:hi] = np.partition(d, k - 1, axis=1)[:, k - 1]
    return out


def kth_distance_members(coords, k):
    """K-th smallest distance from each row of ``coords`` to the other rows."""
    coords = np.ascontiguousarray(coords, dtype=float)
    if coords.shape[0] - 1 < k:
        raise ValueError("insufficient neighbors")
    if _accel.use_numba():
        return _kth_members_nb(coords, k)
    return _kth_members_np(coords, k)


def kth_distance_queries(coords, queries, k):
    """K-th smallest distance from each query to the non-coincident ``coords``."""
    coords = np.ascontiguousarray(coords, dtype=float)
    queries = np.ascontiguousarray(queries, dtype=float)
    if coords.shape[0] < k:
        raise ValueError("insufficient neighbors")
    if _accel.use_numba():
        out = _kth_queries_nb(coords, queries, k)
    else:
        out = _kth_queries_np(coords, queries, k)
    if np.isinf(out).any():
        raise ValueError("insufficient neighbors")
    return out


# ---------------------------------------------------------------- weights


@njit(cache=True)
def _row_weights(n, s, t, hs, ht, metric, alpha, kcode, cols, vals):
    npts, d = s.shape
    c = 0
    h = hs[n]
    h2 = h * h
    for k in range(npts):
        tau = t[n] - t[k]
        if metric == SEPARABLE:
            if abs(tau) >= ht[n]:
                continue
        r2 = 0.0
        for a in range(d):
            diff = s[n, a] - s[k, a]
            r2 += diff * diff
        if metric == COMPOSITE:
            q2 = r2 + alpha * alpha * tau * tau
            if q2 >= h2:
                continue
            w = _kern_scalar(kcode, math.sqrt(q2) / h)
        else:
            if r2 >= h2:
                continue
            w = _kern_scalar(kcode, math.sqrt(r2) / h) * _kern_scalar(
                kcode, abs(tau) / ht[n]
            )
        if w > 0.0:
            if vals.shape[0] > 0:
                cols[c] = k
                vals[c] = w
            c += 1
    return c


@njit(cache=True, parallel=True)
def _weights_nb(s, t, hs, ht, metric, alpha, kcode):
    npts = s.shape[0]
    counts = np.zeros(npts, dtype=np.int64)
    dummy_i = np.empty(0, dtype=np.int64)
    dummy_v = np.empty(0)
    for n in prange(npts):
        counts[n] = _row_weights(n, s, t, hs, ht, metric, alpha, kcode, dummy_i, dummy_v)
    indptr = np.zeros(npts + 1, dtype=np.int64)
    for n in range(npts):
        indptr[n + 1] = indptr[n] + counts[n]
    indices = np.empty(indptr[npts], dtype=np.int64)
    data = np.empty(indptr[npts])
    for n in prange(npts):
        lo = indptr[n]
        hi = indptr[n + 1]
        _row_weights(n, s, t, hs, ht, metric, alpha, kcode, indices[lo:hi], data[lo:hi])
    return indptr, indices, data


def _weights_np(s, t, hs, ht, metric, alpha, kcode):
    npts = s.shape[0]
    indptr = [np.zeros(1, dtype=np.int64)]
    indices, data = [], []
    offset = 0
    for lo in range(0, npts, _ROW_CHUNK):
        hi = min(lo + _ROW_CHUNK, npts)
        diff = s[lo:hi, None, :] - s[None, :, :]
        r2 = np.einsum("ijk,ijk->ij", diff, diff)
        tau = t[lo:hi, None] - t[None, :]
        h = hs[lo:hi, None]
        if metric == COMPOSITE:
            q2 = r2 + alpha * alpha * tau * tau
            w = np.where(q2 < h * h, kern_array(kcode, np.sqrt(q2) / h), 0.0)
        else:
            inside = (r2 < h * h) & (np.abs(tau) < ht[lo:hi, None])
            ws = kern_array(kcode, np.sqrt(r2) / h)
            wt = kern_array(kcode, np.abs(tau) / ht[lo:hi, None])
            w = np.where(inside, ws * wt, 0.0)
        rows, cols = np.nonzero(w > 0.0)
        counts = np.bincount(rows, minlength=hi - lo)
        indptr.append(offset + np.cumsum(counts))
        offset += len(rows)
        indices.append(cols.astype(np.int64))
        data.append(w[rows, cols])
    return (
        np.concatenate(indptr),
        np.concatenate(indices) if indices else np.zeros(0, dtype=np.int64),
        np.concatenate(data) if data else np.zeros(0),
    )


def weight_csr(s, t, hs, ht, metric, alpha, kcode):
    """Raw kernel weights as CSR arrays; row n uses the bandwidths of point n."""
    s = np.ascontiguousarray(s, dtype=float)
    t = np.ascontiguousarray(t, dtype=float)
    hs = np.ascontiguousarray(hs, dtype=float)
    ht = np.ascontiguousarray(ht, dtype=float)
    if _accel.use_numba():
        return _weights_nb(s, t, hs, ht, metric, float(alpha), kcode)
    return _weights_np(s, t, hs, ht, metric, float(alpha), kcode)


# ---------------------------------------------------------------- sparse Cholesky
# Up-looking factorization over the upper triangle of a symmetric CSC
# matrix (for symmetric input, CSC column k == CSR row k).


def _etree_py(n, Ap, Ai):
    parent = np.full(n, -1, dtype=np.int64)
    ancestor = np.full(n, -1, dtype=np.int64)
    for k in range(n):
        for p in range(Ap[k], Ap[k + 1]):
            i = Ai[p]
            while i != -1 and i < k:
                inext = ancestor[i]
                ancestor[i] = k
                if inext == -1:
                    parent[i] = k
                i = inext
    return parent


def _ereach_py(Ap, Ai, k, parent, s, w, n):
    top = n
    w[k] = k
    for p in range(Ap[k], Ap[k + 1]):
        i = Ai[p]
        if i > k:
            continue
        length = 0
        while w[i] != k:
            s[length] = i
            length += 1
            w[i] = k
            i = parent[i]
        while length > 0:
            top -= 1
            length -= 1
            s[top] = s[length]
    return top


def _colcounts_py(n, Ap, Ai, parent):
    counts = np.ones(n, dtype=np.int64)
    s = np.empty(n, dtype=np.int64)
    w = np.full(n, -1, dtype=np.int64)
    for k in range(n):
        top = _ereach_py(Ap, Ai, k, parent, s, w, n)
        for j in range(top, n):
            counts[s[j]] += 1
    return counts


def _chol_numeric_py(n, Ap, Ai, Ax, parent, Lp):
    """Returns (Li, Lx, failed_column); failed_column is -1 on success."""
    Li = np.empty(Lp[n], dtype=np.int64)
    Lx = np.empty(Lp[n])
    c = Lp[:n].copy()
    x = np.zeros(n)
    s = np.empty(n, dtype=np.int64)
    w = np.full(n, -1, dtype=np.int64)
    for k in range(n):
        top = _ereach_py(Ap, Ai, k, parent, s, w, n)
        x[k] = 0.0
        for p in range(Ap[k], Ap[k + 1]):
            if Ai[p] <= k:
                x[Ai[p]] = Ax[p]
        d = x[k]
        x[k] = 0.0
        for t in range(top, n):
            i = s[t]
            lki = x[i] / Lx[Lp[i]]
            x[i] = 0.0
            for p in range(Lp[i] + 1, c[i]):
                x[Li[p]] -= Lx[p] * lki
            d -= lki * lki
            p = c[i]
            c[i] += 1
            Li[p] = k
            Lx[p] = lki
        if not d > 0.0:
            return Li, Lx, k
        p = c[k]
        c[k] += 1
        Li[p] = k
        Lx[p] = math.sqrt(d)
    return Li, Lx, -1


def _lsolve_py(n, Lp, Li, Lx, x):
    for j in range(n):
        x[j] /= Lx[Lp[j]]
        for p in range(Lp[j] + 1, Lp[j + 1]):
            x[Li[p]] -= Lx[p] * x[j]


def _ltsolve_py(n, Lp, Li, Lx, x):
    for j in range(n - 1, -1, -1):
        for p in range(Lp[j] + 1, Lp[j + 1]):
            x[j] -= Lx[p] * x[Li[p]]
        x[j] /= Lx[Lp[j]]


if _accel.HAVE_NUMBA:
    _etree_nb = njit(cache=True)(_etree_py)
    _ereach_nb = njit(cache=True)(_ereach_py)

    # the jitted drivers must call the jitted ereach, so they are rebuilt
    # from source with the name rebound
    @njit(cache=True)
    def _colcounts_nb(n, Ap, Ai, parent):
        counts = np.ones(n, dtype=np.int64)
        s = np.empty(n, dtype=np.int64)
        w = np.full(n, -1, dtype=np.int64)
        for k in range(n):
            top = _ereach_nb(Ap, Ai, k, parent, s, w, n)
            for j in range(top, n):
                counts[s[j]] += 1
        return counts

    @njit(cache=True)
    def _chol_numeric_nb(n, Ap, Ai, Ax, parent, Lp):
        Li = np.empty(Lp[n], dtype=np.int64)
        Lx = np.empty(Lp[n])
        c = Lp[:n].copy()
        x = np.zeros(n)
        s = np.empty(n, dtype=np.int64)
        w = np.full(n, -1, dtype=np.int64)
        for k in range(n):
            top = _ereach_nb(Ap, Ai, k, parent, s, w, n)
            x[k] = 0.0
            for p in range(Ap[k], Ap[k + 1]):
                if Ai[p] <= k:
                    x[Ai[p]] = Ax[p]
            d = x[k]
            x[k] = 0.0
            for t in range(top, n):
                i = s[t]
                lki = x[i] / Lx[Lp[i]]
                x[i] = 0.0
                for p in range(Lp[i] + 1, c[i]):
                    x[Li[p]] -= Lx[p] * lki
                d -= lki * lki
                p = c[i]
                c[i] += 1
                Li[p] = k
                Lx[p] = lki
            if not d > 0.0:
                return Li, Lx, k
            p = c[k]
            c[k] += 1
            Li[p] = k
            Lx[p] = math.sqrt(d)
        return Li, Lx, -1

    _lsolve_nb = njit(cache=True)(_lsolve_py)
    _ltsolve_nb = njit(cache=True)(_ltsolve_py)


def cholesky_csc(n, Ap, Ai, Ax):
    """Factor a symmetric matrix given in CSC form (upper part is read).

    Returns ``(Lp, Li, Lx, failed)`` with L lower triangular in CSC, diagonal
    stored first in each column.  ``failed`` is the first column with a
    non-positive pivot, or -1.
    """
    Ap = np.ascontiguousarray(Ap, dtype=np.int64)
    Ai = np.ascontiguousarray(Ai, dtype=np.int64)
    Ax = np.ascontiguousarray(Ax, dtype=float)
    if _accel.use_numba():
        parent = _etree_nb(n, Ap, Ai)
        counts = _colcounts_nb(n, Ap, Ai, parent)
    else:
        parent = _etree_py(n, Ap, Ai)
        counts = _colcounts_py(n, Ap, Ai, parent)
    Lp = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=Lp[1:])
    if _accel.use_numba():
        Li, Lx, failed = _chol_numeric_nb(n, Ap, Ai, Ax, parent, Lp)
    else:
        Li, Lx, failed = _chol_numeric_py(n, Ap, Ai, Ax, parent, Lp)
    return Lp, Li, Lx, int(failed)


def chol_solve_inplace(n, Lp, Li, Lx, x):
    """Overwrite ``x`` (1-D) with (L L^T)^{-1} x."""
    if _accel.use_numba():
        _lsolve_nb(n, Lp, Li, Lx, x)
        _ltsolve_nb(n, Lp, Li, Lx, x)
    else:
        _lsolve_py(n, Lp, Li, Lx, x)
        _ltsolve_py(n, Lp, Li, Lx, x)
