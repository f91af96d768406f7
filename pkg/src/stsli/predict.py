"""SLI prediction, conditional variance and prediction intervals."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .geometry import STDataset
from .precision import assemble_blocks
from .sparse_linalg import NotPositiveDefinite, factorize
from .trend import evaluate_trend


@dataclass(frozen=True, eq=False)
class PredictionResult:
    targets: STDataset
    mean: np.ndarray
    variance: np.ndarray
    interval_low: np.ndarray
    interval_high: np.ndarray
    level: float

    def __len__(self):
        return self.mean.shape[0]


def z_score(level):
    """Two-sided standard normal quantile for coverage ``level``."""
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    return float(norm.ppf(0.5 + 0.5 * level))


def _as_targets(targets, dim):
    if isinstance(targets, STDataset):
        return targets
    s, t = targets
    t = np.asarray(t, dtype=float).reshape(-1)
    s = np.asarray(s, dtype=float).reshape(t.shape[0], dim)
    return STDataset(s, t)


def predict(model, targets, level=0.95, exact_variance=False, c0_mode="combined"):
    """Minimize the combined energy over the target values.

    mean = m(targets) - J_GG^{-1} J_GS x'.  The variance is 1 / J_GG[p, p]
    unless ``exact_variance`` asks for diag(J_GG^{-1}).  Both blocks are
    formed without the 1/lambda factor, so the mean does not depend on lambda.
    """
    z = z_score(level)
    data = model.data
    targets = _as_targets(targets, data.dim)
    p = len(targets)
    if p == 0:
        empty = np.zeros(0)
        return PredictionResult(targets, empty, empty, empty, empty, level)
    prm = model.params
    blocks = assemble_blocks(data, targets, prm.bandwidth, prm.metric, prm.kernel, prm.precision,
                             c0_mode=c0_mode, include_diagonal=prm.include_diagonal,
                             sample_scales=model.scales)
    gg = blocks.tilde_GG()
    gs = blocks.tilde_GS()
    try:
        fac = factorize(gg)
    except NotPositiveDefinite as exc:
        raise RuntimeError("internal invariant violated: J_GG not positive definite") from exc
    trend_g = evaluate_trend(prm.trend, targets.s, targets.t)
    mean = trend_g - fac.solve(gs @ model.residuals)
    lam = prm.precision.lam
    if exact_variance:
        var = lam * fac.diag_inverse()
    else:
        var = lam / gg.diagonal()
    half = z * np.sqrt(var)
    return PredictionResult(targets, mean, var, mean - half, mean + half, level)


def predict_slice(model, time, locations, level=0.95, **kwargs):
    """Predict every location at one time instant."""
    locs = np.asarray(locations, dtype=float)
    if locs.size == 0:
        locs = locs.reshape(0, model.data.dim)
    locs = locs.reshape(-1, model.data.dim)
    t = np.full(locs.shape[0], float(time))
    return predict(model, STDataset(locs, t), level, **kwargs)


def grid_locations(x, y):
    """Nodes of a regular 2-D grid from (start, stop, count) triples, x varying fastest."""
    xs = np.linspace(*x[:2], int(x[2]))
    ys = np.linspace(*y[:2], int(y[2]))
    gx, gy = np.meshgrid(xs, ys)
    return np.column_stack([gx.ravel(), gy.ravel()])
