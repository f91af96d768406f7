"""Validation metrics and one-slice-out cross-validation."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, fields

import numpy as np
from scipy.stats import rankdata

from .estimate import FittedModel, fit
from .predict import predict

log = logging.getLogger(__name__)

COLUMNS = ("ME", "MAE", "MARE", "RMSE", "RMSRE", "R", "R_S")


@dataclass(frozen=True)
class MetricSet:
    me: float
    mae: float
    mare: float
    rmse: float
    rmsre: float
    r_pearson: float
    r_spearman: float

    def as_row(self):
        return [getattr(self, f.name) for f in fields(self)]


def _pearson(a, b):
    a = a - a.mean()
    b = b - b.mean()
    den = np.sqrt((a @ a) * (b @ b))
    if den == 0:
        raise ValueError("degenerate correlation input")
    return float(np.clip((a @ b) / den, -1.0, 1.0))


def metrics(predicted, truth, strict=True):
    """ME, MAE, MARE, RMSE, RMSRE, Pearson R and Spearman R_S of ``predicted - truth``.

    Relative errors are +inf when ``truth`` has a zero.  With
    ``strict=False`` undefined correlations come back as NaN instead of
    raising.
    """
    p = np.asarray(predicted, dtype=float).reshape(-1)
    x = np.asarray(truth, dtype=float).reshape(-1)
    if p.shape != x.shape or p.size == 0:
        raise ValueError("predicted and truth must have equal nonzero length")
    e = p - x
    if np.any(x == 0):
        mare = rmsre = np.inf
    else:
        rel = e / x
        mare = float(np.mean(np.abs(rel)))
        rmsre = float(np.sqrt(np.mean(rel**2)))
    try:
        r = _pearson(p, x)
        rs = _pearson(rankdata(p), rankdata(x))
    except ValueError:
        if strict:
            raise
        r = rs = float("nan")
    return MetricSet(
        me=float(e.mean()),
        mae=float(np.abs(e).mean()),
        mare=mare,
        rmse=float(np.sqrt(np.mean(e**2))),
        rmsre=rmsre,
        r_pearson=r,
        r_spearman=rs,
    )


@dataclass(frozen=True, eq=False)
class SliceResult:
    time: float
    index: np.ndarray
    predicted: np.ndarray
    variance: np.ndarray
    metrics: MetricSet


@dataclass(frozen=True, eq=False)
class CvReport:
    per_slice: list
    aggregate: MetricSet
    n_slices: int
    predicted: np.ndarray
    truth: np.ndarray
    mode: str = "fixed"
    extra: dict = field(default_factory=dict)


def one_slice_out(model_or_config, dataset=None, mode="fixed", level=0.95, **fit_kwargs):
    """Hold out each time slice in turn and predict it from the others.

    ``mode="fixed"`` keeps the parameters of a fitted model (the default,
    pass a FittedModel); ``mode="refit"`` re-estimates on every reduced
    dataset (pass initial SliParams plus ``bounds``/``options``).
    """
    if mode not in ("fixed", "refit"):
        raise ValueError("mode must be 'fixed' or 'refit'")
    if isinstance(model_or_config, FittedModel):
        dataset = dataset if dataset is not None else model_or_config.data
        params = model_or_config.params
    else:
        params = model_or_config
    if dataset is None:
        raise ValueError("dataset required")
    stamps = np.unique(dataset.t)
    if stamps.shape[0] < 2:
        raise ValueError("a slice equal to the whole dataset cannot be held out")
    pred = np.empty(len(dataset))
    slices = []
    for t in stamps:
        held = dataset.t == t
        train = dataset.subset(~held)
        target = dataset.subset(held)
        if mode == "fixed":
            model = FittedModel.from_params(train, params, evaluate_nll=False)
        else:
            model = fit(train, params, **fit_kwargs)
        res = predict(model, (target.s, target.t), level)
        pred[held] = res.mean
        m = metrics(res.mean, target.x, strict=False)
        slices.append(SliceResult(float(t), np.flatnonzero(held), res.mean, res.variance, m))
        log.debug("slice t=%g rmse=%.4g", t, m.rmse)
    agg = metrics(pred, dataset.x, strict=False)
    return CvReport(slices, agg, len(slices), pred, dataset.x.copy(), mode)


def format_value(v):
    if np.isposinf(v):
        return "Inf"
    if np.isneginf(v):
        return "-Inf"
    if np.isnan(v):
        return "NaN"
    return f"{v:.4f}"


def format_table(report):
    """Plain-text table: one row per slice, then the pooled row."""
    head = ["slice", "t", "n", *COLUMNS]
    rows = [head]
    for i, sl in enumerate(report.per_slice):
        rows.append([str(i + 1), f"{sl.time:g}", str(sl.index.shape[0]), *map(format_value, sl.metrics.as_row())])
    rows.append(["pooled", "", str(report.truth.shape[0]), *map(format_value, report.aggregate.as_row())])
    widths = [max(len(r[j]) for r in rows) for j in range(len(head))]
    return "\n".join("  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in rows)
