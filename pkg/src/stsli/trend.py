"""Trend bases, evaluation and least-squares initialization."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm


@dataclass(frozen=True)
class Basis:
    """One block of trend columns.

    kinds:
      ``constant``       -> [1]
      ``poly_time``      -> [t, t**2, ..., t**degree]
      ``periodic_time``  -> [t**j cos(2 pi t / period)]_{j<=deg}, then the sin block
      ``poly_space``     -> [s_a**j] for each axis a, j = 1..degree
    """

    kind: str
    degree: int = 1
    period: float = 24.0

    def __post_init__(self):
        if self.kind not in ("constant", "poly_time", "periodic_time", "poly_space"):
            raise ValueError(f"unknown basis kind {self.kind!r}")
        if self.kind == "poly_space" and not 1 <= self.degree <= 2:
            raise ValueError("poly_space degree must be 1 or 2")
        if self.kind != "constant" and self.degree < 0:
            raise ValueError("degree must be non-negative")
        if self.kind == "periodic_time" and not self.period > 0:
            raise ValueError("period must be positive")

    def columns(self, s, t):
        if self.kind == "constant":
            return [np.ones_like(t)]
        if self.kind == "poly_time":
            return [t**j for j in range(1, self.degree + 1)]
        if self.kind == "periodic_time":
            phase = 2.0 * np.pi * t / self.period
            env = [t**j for j in range(self.degree + 1)]
            return [e * np.cos(phase) for e in env] + [e * np.sin(phase) for e in env]
        return [s[:, a] ** j for a in range(s.shape[1]) for j in range(1, self.degree + 1)]

    def to_dict(self):
        d = {"kind": self.kind}
        if self.kind in ("poly_time", "periodic_time", "poly_space"):
            d["degree"] = self.degree
        if self.kind == "periodic_time":
            d["period"] = self.period
        return d


def parse_basis(items):
    out = []
    for item in items:
        if isinstance(item, Basis):
            out.append(item)
        elif isinstance(item, str):
            out.append(Basis(item))
        else:
            out.append(Basis(**item))
    return tuple(out)


def design_matrix(basis, s, t):
    s = np.atleast_2d(np.asarray(s, dtype=float))
    t = np.asarray(t, dtype=float).reshape(-1)
    if s.shape[0] != t.shape[0]:
        s = s.reshape(t.shape[0], -1)
    cols = [c for b in basis for c in b.columns(s, t)]
    return np.column_stack(cols) if cols else np.zeros((t.shape[0], 0))


@dataclass(frozen=True)
class TrendModel:
    basis: tuple = (Basis("constant"),)
    coefficients: np.ndarray = field(default_factory=lambda: np.zeros(1))

    def __post_init__(self):
        basis = parse_basis(self.basis)
        if not basis:
            raise ValueError("trend needs at least one basis function")
        object.__setattr__(self, "basis", basis)
        object.__setattr__(self, "coefficients", np.asarray(self.coefficients, dtype=float).reshape(-1))

    def with_coefficients(self, b):
        return TrendModel(self.basis, b)


def n_basis_terms(basis, dim):
    n = 0
    for b in parse_basis(basis):
        if b.kind == "constant":
            n += 1
        elif b.kind == "poly_time":
            n += b.degree
        elif b.kind == "periodic_time":
            n += 2 * (b.degree + 1)
        else:
            n += b.degree * dim
    return n


def evaluate_trend(model, s, t=None):
    """m_i = sum_k b_k f_k(s_i, t_i); ``s`` may be an STDataset."""
    if t is None:
        s, t = s.s, s.t
    F = design_matrix(model.basis, s, t)
    if F.shape[1] != model.coefficients.shape[0]:
        raise ValueError("coefficient count does not match basis")
    return F @ model.coefficients


def detrend(model, dataset):
    return dataset.x - evaluate_trend(model, dataset.s, dataset.t)


@dataclass(frozen=True)
class OlsFit:
    coefficients: np.ndarray
    stderr: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    residuals: np.ndarray


def ols_fit(basis, dataset, level=0.95, z=None):
    """Least-squares trend with normal-quantile confidence intervals.

    ``z`` overrides the quantile implied by ``level`` (e.g. 5 for +-5 s.e.).
    """
    basis = parse_basis(basis)
    F = design_matrix(basis, dataset.s, dataset.t)
    x = dataset.x
    n, k = F.shape
    if k == 0 or np.linalg.matrix_rank(F) < k:
        raise ValueError("collinear basis")
    b, *_ = np.linalg.lstsq(F, x, rcond=None)
    resid = x - F @ b
    dof = max(n - k, 1)
    s2 = float(resid @ resid) / dof
    cov = s2 * np.linalg.inv(F.T @ F)
    se = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    if z is None:
        z = norm.ppf(0.5 + level / 2.0)
    return OlsFit(b, se, b - z * se, b + z * se, resid)
