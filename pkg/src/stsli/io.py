"""CSV sample/target/prediction files and the YAML model file."""
from __future__ import annotations

import csv
import hashlib
import os

import numpy as np
import yaml

from .estimate import FittedModel, SliParams
from .evaluate import COLUMNS, format_value
from .geometry import BandwidthSpec, MetricSpec, STDataset
from .kernels import Kernel
from .precision import PrecisionParams
from .trend import TrendModel

MODEL_FORMAT = "stsli-model/1"


class InputError(ValueError):
    """Malformed input file or configuration (usage error, exit status 2)."""


def _header(dim, extra):
    return [f"s{i + 1}" for i in range(dim)] + extra


def read_samples(path, require_values=True):
    """Read ``s1,...,sd,t,value`` (``value`` optional for targets)."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise InputError(f"{path}: empty file")
    head = [h.strip() for h in rows[0]]
    has_value = head[-1] == "value"
    n_coord = len(head) - (2 if has_value else 1)
    if n_coord < 1 or head != _header(n_coord, ["t", "value"] if has_value else ["t"]):
        raise InputError(f"{path}: header must be s1,...,sd,t[,value], got {','.join(head)}")
    if require_values and not has_value:
        raise InputError(f"{path}: missing value column")
    ncol = len(head)
    data = np.empty((len(rows) - 1, ncol))
    for i, row in enumerate(rows[1:]):
        if len(row) != ncol:
            raise InputError(f"{path}:{i + 2}: expected {ncol} columns, got {len(row)}")
        try:
            data[i] = [float(v) for v in row]
        except ValueError as exc:
            raise InputError(f"{path}:{i + 2}: {exc}") from exc
    if not np.isfinite(data).all():
        raise InputError(f"{path}: non-finite value")
    s, t = data[:, :n_coord], data[:, n_coord]
    x = data[:, n_coord + 1] if has_value else None
    ds = STDataset(s, t, x)
    try:
        ds.check_unique()
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from exc
    return ds


def _fmt(v):
    return repr(float(v))


def write_samples(path, dataset):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(_header(dataset.dim, ["t", "value"]))
        for srow, t, x in zip(dataset.s, dataset.t, dataset.x):
            w.writerow([*map(_fmt, srow), _fmt(t), _fmt(x)])


def write_predictions(path, result):
    tg = result.targets
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(_header(tg.dim, ["t", "mean", "variance", "lo", "hi"]))
        for i in range(len(result)):
            w.writerow([*map(_fmt, tg.s[i]), _fmt(tg.t[i]), _fmt(result.mean[i]),
                        _fmt(result.variance[i]), _fmt(result.interval_low[i]),
                        _fmt(result.interval_high[i])])


def write_metrics(path, report):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["slice", "t", "n", *COLUMNS])
        for i, sl in enumerate(report.per_slice):
            w.writerow([i + 1, f"{sl.time:.17g}", sl.index.shape[0],
                        *(_metric_cell(v) for v in sl.metrics.as_row())])
        w.writerow(["pooled", "", report.truth.shape[0],
                    *(_metric_cell(v) for v in report.aggregate.as_row())])


def _metric_cell(v):
    return format_value(v) if not np.isfinite(v) else repr(float(v))


def file_sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def params_to_dict(p):
    return {
        "trend": {
            "basis": [b.to_dict() for b in p.trend.basis],
            "coefficients": [float(v) for v in p.trend.coefficients],
        },
        "lambda": float(p.precision.lam),
        "c1": float(p.precision.c1),
        "bandwidth": {
            "mu_s": float(p.bandwidth.mu_s),
            "mu_t": float(p.bandwidth.mu_t),
            "K_s": int(p.bandwidth.K_s),
            "K_t": int(p.bandwidth.K_t),
        },
        "metric": {"kind": p.metric.kind.value, "alpha": float(p.metric.alpha)},
        "kernel": {"kind": p.kernel.value, "include_diagonal": bool(p.include_diagonal)},
    }


def params_from_dict(d):
    return SliParams(
        trend=TrendModel(tuple(d["trend"]["basis"]), d["trend"]["coefficients"]),
        precision=PrecisionParams(d["lambda"], d["c1"]),
        bandwidth=BandwidthSpec(**d["bandwidth"]),
        metric=MetricSpec(**d["metric"]),
        kernel=Kernel(d["kernel"]["kind"]),
        include_diagonal=d["kernel"].get("include_diagonal", True),
    )


def _plain(v):
    if isinstance(v, dict):
        return {k: _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, (np.floating, float)):
        return float(v)
    if isinstance(v, (np.integer, int)) and not isinstance(v, bool):
        return int(v)
    return v


def save_model(path, model, data_path):
    diag = {k: v for k, v in model.diagnostics.items() if k != "nll_trace"}
    doc = {
        "format": MODEL_FORMAT,
        "data": {
            "path": os.path.abspath(data_path),
            "sha256": file_sha256(data_path),
            "n": len(model.data),
            "dim": model.data.dim,
        },
        "params": params_to_dict(model.params),
        "nll": float(model.nll_at_optimum),
        "diagnostics": _plain(diag),
    }
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(doc, fh, sort_keys=False)


def load_model(path, check_data=True):
    """Rebuild a FittedModel from a model file and the sample file it references."""
    with open(path, encoding="utf-8") as fh:
        doc = yaml.safe_load(fh)
    if not isinstance(doc, dict) or doc.get("format") != MODEL_FORMAT:
        raise InputError(f"{path}: not a {MODEL_FORMAT} file")
    data_path = doc["data"]["path"]
    if not os.path.isabs(data_path):
        data_path = os.path.join(os.path.dirname(os.path.abspath(path)), data_path)
    if check_data and file_sha256(data_path) != doc["data"]["sha256"]:
        raise InputError(f"{path}: sample file {data_path} changed since the fit")
    data = read_samples(data_path)
    params = params_from_dict(doc["params"])
    return FittedModel.from_params(data, params, diagnostics=doc.get("diagnostics"))
