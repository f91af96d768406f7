"""Space-time coordinates, distances and adaptive kNN bandwidths."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import _hot


class Metric(str, enum.Enum):
    COMPOSITE = "composite"
    SEPARABLE = "separable"


class STPoint(NamedTuple):
    s: np.ndarray
    t: float


@dataclass(frozen=True)
class MetricSpec:
    kind: Metric = Metric.SEPARABLE
    alpha: float = 1.0  # space units per time unit, composite only

    def __post_init__(self):
        object.__setattr__(self, "kind", Metric(self.kind))
        if self.kind is Metric.COMPOSITE and not self.alpha > 0:
            raise ValueError("alpha must be positive for the composite metric")

    @property
    def code(self):
        return _hot.COMPOSITE if self.kind is Metric.COMPOSITE else _hot.SEPARABLE


@dataclass(frozen=True)
class BandwidthSpec:
    mu_s: float = 1.0
    mu_t: float = 1.0
    K_s: int = 3
    K_t: int = 3

    def __post_init__(self):
        if not (self.mu_s > 0 and self.mu_t > 0):
            raise ValueError("bandwidth scales mu_s, mu_t must be positive")
        if int(self.K_s) != self.K_s or int(self.K_t) != self.K_t:
            raise ValueError("neighbor orders K_s, K_t must be integers")
        if self.K_s < 1 or self.K_t < 1:
            raise ValueError("neighbor orders K_s, K_t must be >= 1")


@dataclass(frozen=True)
class Bandwidths:
    h_s: np.ndarray
    h_t: np.ndarray

    def __post_init__(self):
        if not (np.all(self.h_s > 0) and np.all(self.h_t > 0)):
            raise ValueError("zero bandwidth distance")


@dataclass(frozen=True, eq=False)
class STDataset:
    """Sample coordinates ``s`` (N, d), times ``t`` (N,), values ``x`` (N,).

    ``x`` may be None for target sets.
    """

    s: np.ndarray
    t: np.ndarray
    x: np.ndarray | None = None
    _loc: tuple = field(default=None, init=False, repr=False)

    def __post_init__(self):
        s = np.atleast_2d(np.asarray(self.s, dtype=float))
        if s.shape[0] == 1 and np.ndim(self.s) == 1 and np.size(self.t) > 1:
            s = s.T
        t = np.asarray(self.t, dtype=float).reshape(-1)
        if s.shape[0] != t.shape[0]:
            raise ValueError("s and t lengths differ")
        if s.shape[1] < 1:
            raise ValueError("spatial dimension must be >= 1")
        if not (np.isfinite(s).all() and np.isfinite(t).all()):
            raise ValueError("coordinates must be finite")
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "t", t)
        if self.x is not None:
            x = np.asarray(self.x, dtype=float).reshape(-1)
            if x.shape[0] != t.shape[0]:
                raise ValueError("x length differs from coordinates")
            if not np.isfinite(x).all():
                raise ValueError("values must be finite")
            object.__setattr__(self, "x", x)

    def __len__(self):
        return self.t.shape[0]

    @property
    def dim(self):
        return self.s.shape[1]

    def coords(self):
        """(N, d+1) array with time as the last column."""
        return np.column_stack([self.s, self.t])

    def locations(self):
        """Distinct spatial locations and the inverse index into them."""
        if self._loc is None:
            uniq, inv = np.unique(self.s, axis=0, return_inverse=True)
            object.__setattr__(self, "_loc", (uniq, inv.reshape(-1)))
        return self._loc

    def subset(self, mask):
        return STDataset(self.s[mask], self.t[mask], None if self.x is None else self.x[mask])

    def check_unique(self):
        keys = np.unique(self.coords(), axis=0)
        if keys.shape[0] != len(self):
            raise ValueError("duplicate (s, t) rows in dataset")
        return self


def spatial_knn_distance(points, K, query_index=None, query_point=None):
    """K-th smallest Euclidean distance from a query to the other points.

    With ``query_index`` the query is a member and only that index is
    excluded; with ``query_point`` candidates coinciding with the query are
    skipped.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if (query_index is None) == (query_point is None):
        raise ValueError("give exactly one of query_index, query_point")
    if query_index is not None:
        d = np.linalg.norm(pts - pts[query_index], axis=1)
        d = np.delete(d, query_index)
    else:
        q = np.atleast_1d(np.asarray(query_point, dtype=float))
        d = np.linalg.norm(pts - q, axis=1)
        d = d[d > 0]
    if d.shape[0] < K:
        raise ValueError("insufficient neighbors")
    val = float(np.sort(d, kind="stable")[K - 1])
    if val == 0.0:
        raise ValueError("zero bandwidth distance")
    return val


def temporal_knn_distance(times, K, query):
    """K-th nearest distinct time stamp to ``query`` (the query's own stamp excluded)."""
    stamps = np.unique(np.asarray(times, dtype=float))
    d = np.abs(stamps - float(query))
    d = d[d > 0]
    if d.shape[0] < K:
        raise ValueError("insufficient neighbors")
    return float(np.sort(d)[K - 1])


def knn_scales(dataset, K_s, K_t):
    """Per-point K_s-NN spatial distance and K_t-NN temporal distance.

    Spatial neighbors are counted over distinct locations, temporal ones over
    distinct time stamps, so time series at fixed stations share one scale.
    """
    uniq, inv = dataset.locations()
    ds = _hot.kth_distance_members(uniq, int(K_s))
    if np.any(ds == 0):
        raise ValueError("zero bandwidth distance")
    stamps, tinv = np.unique(dataset.t, return_inverse=True)
    if stamps.shape[0] - 1 < K_t:
        # only the separable metric needs it; bandwidths_from_scales checks
        dt = np.full(stamps.shape[0], np.nan)
    else:
        dt = _hot.kth_distance_members(stamps[:, None], int(K_t))
    return ds[inv], dt[tinv.reshape(-1)]


def query_knn_scales(dataset, s, t, K_s, K_t):
    """kNN scales for external points measured against ``dataset``'s coordinates."""
    uniq, _ = dataset.locations()
    s = np.atleast_2d(np.asarray(s, dtype=float))
    t = np.asarray(t, dtype=float).reshape(-1)
    if s.shape[0] == 0:
        return np.zeros(0), np.zeros(0)
    locs, linv = np.unique(s, axis=0, return_inverse=True)
    ds = _hot.kth_distance_queries(uniq, locs, int(K_s))
    stamps = np.unique(dataset.t)
    tq, tinv = np.unique(t, return_inverse=True)
    try:
        dt = _hot.kth_distance_queries(stamps[:, None], tq[:, None], int(K_t))
    except ValueError:
        dt = np.full(tq.shape[0], np.nan)
    return ds[linv.reshape(-1)], dt[tinv.reshape(-1)]


def bandwidths_from_scales(ds, dt, spec, metric):
    h_s = spec.mu_s * ds
    if metric.kind is Metric.COMPOSITE:
        h_t = h_s / metric.alpha
    else:
        if np.isnan(dt).any():
            raise ValueError("insufficient neighbors")
        h_t = spec.mu_t * dt
    return Bandwidths(h_s, h_t)


def compute_bandwidths(dataset, spec, metric):
    if len(dataset) == 0:
        raise ValueError("empty dataset")
    ds, dt = knn_scales(dataset, spec.K_s, spec.K_t)
    return bandwidths_from_scales(ds, dt, spec, metric)


def scaled_st_distance(p1, p2, metric, h_s, h_t):
    """Kernel argument(s) between two points; a scalar for composite, a pair for separable."""
    if not (h_s > 0 and h_t > 0):
        raise ValueError("bandwidths must be positive")
    r = np.atleast_1d(np.asarray(p1[0], dtype=float)) - np.atleast_1d(np.asarray(p2[0], dtype=float))
    tau = float(p1[1]) - float(p2[1])
    r2 = float(r @ r)
    if metric.kind is Metric.COMPOSITE:
        return float(np.sqrt(r2 + metric.alpha**2 * tau**2) / h_s)
    return float(np.sqrt(r2) / h_s), abs(tau) / h_t
