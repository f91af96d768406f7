"""Dense, loop-based reference implementations used as test oracles.

Nothing here calls into the package's sparse or jitted code; every
quantity is rebuilt from its defining formula.
"""
import math

import numpy as np
from scipy.stats import multivariate_normal


def kernel(kind, u):
    if u >= 1.0:
        return 0.0
    if kind == "quadratic":
        return 1.0 - u * u
    if kind == "triangular":
        return 1.0 - u
    return 1.0 - 1.5 * u + 0.5 * u**3


def kth_member(points, i, K):
    """K-th smallest distance from points[i] to the other distinct points (sort everything)."""
    pts = np.asarray(points, dtype=float).reshape(len(points), -1)
    row = []
    for j in range(pts.shape[0]):
        if j != i:
            row.append(math.sqrt(sum((a - b) ** 2 for a, b in zip(pts[i], pts[j]))))
    row.sort()
    return row[K - 1]


def scales(s, t, K_s, K_t):
    """Per-point kNN distances over distinct locations and distinct time stamps."""
    locs = np.unique(s, axis=0)
    stamps = np.unique(t)
    ds = np.empty(len(t))
    dt = np.empty(len(t))
    for n in range(len(t)):
        i = int(np.flatnonzero((locs == s[n]).all(axis=1))[0])
        ds[n] = kth_member(locs, i, K_s)
        j = int(np.flatnonzero(stamps == t[n])[0])
        dt[n] = kth_member(stamps[:, None], j, K_t)
    return ds, dt


def query_scales(s_ref, t_ref, s_q, t_q, K_s, K_t):
    """Scales of external points against reference coordinates, exact coincidences skipped."""
    locs = np.unique(s_ref, axis=0)
    stamps = np.unique(t_ref)
    ds = np.empty(len(t_q))
    dt = np.empty(len(t_q))
    for n in range(len(t_q)):
        d = sorted(float(np.linalg.norm(locs[j] - s_q[n])) for j in range(len(locs)))
        d = [v for v in d if v > 0]
        ds[n] = d[K_s - 1]
        d = sorted(abs(float(v - t_q[n])) for v in stamps)
        d = [v for v in d if v > 0]
        dt[n] = d[K_t - 1]
    return ds, dt


def weights(s, t, hs, ht, metric="separable", alpha=1.0, kind="quadratic"):
    """Raw W by a double loop; row n uses the bandwidths of point n."""
    n = len(t)
    W = np.zeros((n, n))
    for a in range(n):
        for b in range(n):
            r = math.sqrt(sum((x - y) ** 2 for x, y in zip(s[a], s[b])))
            tau = abs(t[a] - t[b])
            if metric == "composite":
                W[a, b] = kernel(kind, math.sqrt(r * r + alpha * alpha * tau * tau) / hs[a])
            else:
                W[a, b] = kernel(kind, r / hs[a]) * kernel(kind, tau / ht[a])
    return W


def normalized(W):
    return W / np.abs(W).sum()


def laplacian(U):
    n = U.shape[0]
    J1 = np.zeros((n, n))
    for a in range(n):
        for b in range(n):
            if a != b:
                J1[a, b] = -U[a, b] - U[b, a]
        J1[a, a] = sum(U[a, l] + U[l, a] for l in range(n) if l != a)
    return J1


def jtilde(U, c1, c0=None):
    n = U.shape[0]
    c0 = 1.0 / n if c0 is None else c0
    return c0 * np.eye(n) + c1 * laplacian(U)


def nll_from_density(resid, Jt, lam):
    """Negative Gaussian log-density with precision Jt/lam, shifted by N ln(2 pi)/2."""
    n = resid.shape[0]
    cov = lam * np.linalg.inv(Jt)
    cov = 0.5 * (cov + cov.T)
    lp = multivariate_normal(mean=np.zeros(n), cov=cov).logpdf(resid)
    return -lp - 0.5 * n * math.log(2 * math.pi)


def increments_hadamard(U, x):
    """sum_{nk} u_nk (x_n - x_k)^2 as 1^T (U o D) 1 with D the matrix of squared increments."""
    D = (x[:, None] - x[None, :]) ** 2
    return float(np.ones(len(x)) @ (U * D) @ np.ones(len(x)))


def random_instance(rng, n=30, n_times=5, side=10.0):
    """Scattered points with random locations and integer times (no duplicates)."""
    s = rng.uniform(0, side, size=(n, 2))
    t = rng.integers(1, n_times + 1, size=n).astype(float)
    x = rng.normal(10.0, 2.0, size=n)
    return s, t, x
