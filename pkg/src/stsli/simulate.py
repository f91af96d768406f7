"""Gaussian random fields with separable exponential space-time covariance.

Values are stored location-major: point ``i * n_times + j`` is location i at
time j, the same ordering the Kronecker weight path expects.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri
from scipy.spatial.distance import cdist

from .geometry import STDataset


@dataclass(frozen=True)
class GrfSpec:
    mean: float = 10.0
    variance: float = 5.0
    xi_s: float = 20.0
    xi_t: float = 10.0
    n_locations: int = 100
    domain_side: float = 100.0
    n_times: int = 50
    dt: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not (self.variance >= 0 and self.xi_s > 0 and self.xi_t > 0):
            raise ValueError("variance must be >= 0 and correlation lengths > 0")
        if not (self.domain_side > 0 and self.dt > 0):
            raise ValueError("domain_side and dt must be positive")
        if self.n_locations < 1 or self.n_times < 1:
            raise ValueError("need at least one location and one time")


def exponential_corr(dist_matrix, xi):
    if not xi > 0:
        raise ValueError("xi must be positive")
    return np.exp(-np.asarray(dist_matrix, dtype=float) / xi)


def _rng(seed):
    return np.random.Generator(np.random.Philox(seed))


def _normals(rng, shape):
    # inverse-CDF keeps the stream platform independent; 0 is excluded
    u = rng.random(shape)
    u[u == 0.0] = np.finfo(float).tiny
    return ndtri(u)


def simulate_grf(spec, locations=None):
    """One realization of the field on random locations x regular times.

    ``locations`` pins the sites (otherwise drawn uniformly in the square
    domain from the same seeded stream).
    """
    rng = _rng(spec.seed)
    if locations is None:
        locations = rng.random((spec.n_locations, 2)) * spec.domain_side
    else:
        locations = np.atleast_2d(np.asarray(locations, dtype=float))
    times = spec.dt * np.arange(1, spec.n_times + 1)
    n_s, n_t = locations.shape[0], times.shape[0]
    z = _normals(rng, (n_s, n_t))
    if spec.variance == 0:
        x = np.full((n_s, n_t), float(spec.mean))
    else:
        Ls = _chol(exponential_corr(cdist(locations, locations), spec.xi_s))
        Lt = _chol(exponential_corr(np.abs(times[:, None] - times[None, :]), spec.xi_t))
        x = spec.mean + np.sqrt(spec.variance) * (Ls @ z @ Lt.T)
    s = np.repeat(locations, n_t, axis=0)
    t = np.tile(times, n_s)
    return STDataset(s, t, x.reshape(-1))


def _chol(C):
    try:
        return np.linalg.cholesky(C)
    except np.linalg.LinAlgError as exc:
        raise ValueError("correlation matrix not positive definite (duplicate locations?)") from exc


def full_covariance(locations, times, variance, xi_s, xi_t):
    """Dense covariance of the location-major vector, built pairwise."""
    locations = np.atleast_2d(np.asarray(locations, dtype=float))
    times = np.asarray(times, dtype=float)
    s = np.repeat(locations, times.shape[0], axis=0)
    t = np.tile(times, locations.shape[0])
    r = cdist(s, s)
    tau = np.abs(t[:, None] - t[None, :])
    return variance * np.exp(-r / xi_s - tau / xi_t)
