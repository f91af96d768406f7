"""Likelihood, lambda profiling, box-constrained Nelder-Mead and the fit driver."""
from __future__ import annotations

import logging
import math
from collections import OrderedDict
from dataclasses import dataclass, field, replace

import numpy as np

from .geometry import BandwidthSpec, Metric, MetricSpec, STDataset, bandwidths_from_scales, knn_scales
from .kernels import Kernel, WeightMatrix, build_weights
from .precision import PrecisionParams, assemble_Jtilde, sparsity_index
from .sparse_linalg import Factorization, NotPositiveDefinite, factorize
from .trend import TrendModel, design_matrix, ols_fit

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SliParams:
    trend: TrendModel
    precision: PrecisionParams
    bandwidth: BandwidthSpec = BandwidthSpec()
    metric: MetricSpec = MetricSpec()
    kernel: Kernel = Kernel.QUADRATIC
    include_diagonal: bool = True

    def __post_init__(self):
        object.__setattr__(self, "kernel", Kernel(self.kernel))

    def replace(self, b=None, lam=None, c1=None, mu_s=None, mu_t=None):
        trend = self.trend if b is None else self.trend.with_coefficients(b)
        prec = PrecisionParams(
            self.precision.lam if lam is None else lam,
            self.precision.c1 if c1 is None else c1,
        )
        bw = self.bandwidth
        if mu_s is not None or mu_t is not None:
            bw = replace(bw, mu_s=bw.mu_s if mu_s is None else mu_s, mu_t=bw.mu_t if mu_t is None else mu_t)
        return replace(self, trend=trend, precision=prec, bandwidth=bw)


@dataclass(frozen=True)
class Bounds:
    """Box for the free parameters.

    ``b`` is a (lower, upper) pair of arrays; None means the 95% OLS
    confidence intervals.  Scalar entries are (lower, upper) pairs.
    """

    b: tuple | None = None
    lam: tuple = (1e-6, 1e7)
    c1: tuple = (1e-3, 1e7)
    mu_s: tuple = (0.1, 10.0)
    mu_t: tuple = (0.1, 10.0)

    def __post_init__(self):
        for name in ("lam", "c1", "mu_s", "mu_t"):
            lo, hi = getattr(self, name)
            if not (lo > 0 and hi >= lo):
                raise ValueError(f"bounds for {name} must satisfy 0 < lower <= upper")
        if self.b is not None:
            lo, hi = (np.asarray(v, dtype=float).reshape(-1) for v in self.b)
            if lo.shape != hi.shape or np.any(hi < lo):
                raise ValueError("trend bounds must satisfy lower <= upper")
            object.__setattr__(self, "b", (lo, hi))


@dataclass(frozen=True, eq=False)
class FittedModel:
    data: STDataset
    params: SliParams
    nll_at_optimum: float
    weights: WeightMatrix
    J_factor: Factorization
    scales: tuple
    diagnostics: dict = field(default_factory=dict)

    @classmethod
    def from_params(cls, dataset, params, scales=None, diagnostics=None, evaluate_nll=True):
        """Condition a model on ``dataset`` at fixed parameters (no search).

        ``evaluate_nll=False`` skips the training factorization; prediction
        does not need it.
        """
        ev = NllEvaluator(dataset, params, scales=scales)
        mu_s, mu_t = params.bandwidth.mu_s, params.bandwidth.mu_t
        wm = ev.weights(mu_s, mu_t)
        value, fac = float("nan"), None
        diag = {}
        if evaluate_nll:
            value, _ = ev.evaluate(params.trend.coefficients, params.precision.c1, mu_s, mu_t,
                                   params.precision.lam)
            fac = ev.last_factor
            diag["sparsity_index"] = ev.last_sparsity
        diag.update(diagnostics or {})
        return cls(dataset, params, value, wm, fac, ev.scales, diag)

    @property
    def residuals(self):
        return self.data.x - design_matrix(self.params.trend.basis, self.data.s, self.data.t) @ self.params.trend.coefficients


class NllEvaluator:
    """Negative log-likelihood over one dataset with cached kNN scales and weights."""

    def __init__(self, dataset, params, scales=None, cache_size=8, use_cache=True):
        if dataset.x is None:
            raise ValueError("dataset has no values")
        self.data = dataset
        self.params = params
        self.F = design_matrix(params.trend.basis, dataset.s, dataset.t)
        self.scales = scales if scales is not None else knn_scales(
            dataset, params.bandwidth.K_s, params.bandwidth.K_t
        )
        self._cache = OrderedDict()
        self._cache_size = cache_size
        self.use_cache = use_cache
        self.last_factor = None
        self.last_sparsity = None
        self.n_eval = 0

    def weights(self, mu_s, mu_t):
        key = (float(mu_s), float(mu_t))
        if self.use_cache and key in self._cache:
            self._cache.move_to_end(key)
            return self._cache[key]
        p = self.params
        spec = replace(p.bandwidth, mu_s=mu_s, mu_t=mu_t)
        bw = bandwidths_from_scales(*self.scales, spec, p.metric)
        wm = build_weights(self.data, bw, p.metric, p.kernel, p.include_diagonal)
        if self.use_cache:
            self._cache[key] = wm
            if len(self._cache) > self._cache_size:
                self._cache.popitem(last=False)
        return wm

    def evaluate(self, b, c1, mu_s, mu_t, lam=None):
        """Return (nll, lambda); lambda is profiled when ``lam`` is None."""
        self.n_eval += 1
        n = len(self.data)
        resid = self.data.x - self.F @ np.asarray(b, dtype=float)
        wm = self.weights(mu_s, mu_t)
        Jt = assemble_Jtilde(wm.U, c1)
        try:
            fac = factorize(Jt)
        except NotPositiveDefinite as exc:
            raise RuntimeError("internal invariant violated: SLI precision not positive definite") from exc
        self.last_factor = fac
        self.last_sparsity = sparsity_index(Jt)
        quad = float(resid @ (Jt @ resid))
        if lam is None:
            if quad <= 0:
                raise ValueError("degenerate residuals")
            lam = quad / n
        value = 0.5 * (quad / lam + n * math.log(lam) - fac.log_determinant())
        return value, lam


def _evaluator(params, dataset, cache):
    if cache is not None:
        return cache
    return NllEvaluator(dataset, params)


def nll(params, dataset, cache=None):
    """0.5 [x'^T J x' + N ln(lambda) - ln det(lambda J)] (the N ln(2 pi)/2 constant dropped)."""
    ev = _evaluator(params, dataset, cache)
    value, _ = ev.evaluate(params.trend.coefficients, params.precision.c1,
                           params.bandwidth.mu_s, params.bandwidth.mu_t, params.precision.lam)
    return value


def profile_lambda(params, dataset, cache=None):
    """Closed-form minimizer of the NLL in lambda: x'^T (lambda J) x' / N."""
    ev = _evaluator(params, dataset, cache)
    _, lam = ev.evaluate(params.trend.coefficients, params.precision.c1,
                         params.bandwidth.mu_s, params.bandwidth.mu_t, None)
    return lam


# ---------------------------------------------------------------- optimizer


@dataclass
class OptimizeResult:
    x: np.ndarray
    fun: float
    nit: int
    nfev: int
    reason: str
    fun_initial: float
    trace: list = field(default_factory=list)


def minimize_box(objective, initial, lower, upper, xtol=1e-4, ftol=1e-4, max_iter=10_000,
                 max_eval=10_000, initial_step=0.1):
    """Nelder-Mead with every trial point projected onto [lower, upper].

    Stops when the simplex spread is below ``ftol`` in objective and
    ``xtol`` in every coordinate, or when a cap is hit.  ``initial_step`` is
    a fraction of each coordinate's box width.
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    x0 = np.asarray(initial, dtype=float).copy()
    if np.any(x0 < lower) or np.any(x0 > upper):
        raise ValueError("initial point outside bounds")
    ndim = x0.shape[0]
    nfev = 0

    def f(x):
        nonlocal nfev
        nfev += 1
        return float(objective(x))

    f0 = f(x0)
    if not np.isfinite(f0):
        raise ValueError("objective is not finite at the initial point")
    if ndim == 0:
        return OptimizeResult(x0, f0, 0, nfev, "no free parameters", f0, [f0])

    width = upper - lower
    sim = np.empty((ndim + 1, ndim))
    sim[0] = x0
    for i in range(ndim):
        y = x0.copy()
        step = initial_step * width[i] if width[i] > 0 else 0.0
        if y[i] + step <= upper[i]:
            y[i] += step
        else:
            y[i] -= step
        sim[i + 1] = y
    fsim = np.empty(ndim + 1)
    fsim[0] = f0
    for i in range(1, ndim + 1):
        fsim[i] = f(sim[i])

    clip = lambda x: np.minimum(np.maximum(x, lower), upper)
    rho, chi, psi, sigma = 1.0, 2.0, 0.5, 0.5
    trace = []
    nit = 0
    reason = "max_iter"
    while True:
        order = np.argsort(fsim, kind="stable")
        sim, fsim = sim[order], fsim[order]
        trace.append(float(fsim[0]))
        if np.max(np.abs(sim[1:] - sim[0])) <= xtol and np.max(np.abs(fsim[1:] - fsim[0])) <= ftol:
            reason = "converged"
            break
        if nit >= max_iter:
            reason = "max_iter"
            break
        if nfev >= max_eval:
            reason = "max_eval"
            break
        nit += 1
        xbar = sim[:-1].mean(axis=0)
        xr = clip((1 + rho) * xbar - rho * sim[-1])
        fr = f(xr)
        shrink = False
        if fr < fsim[0]:
            xe = clip((1 + rho * chi) * xbar - rho * chi * sim[-1])
            fe = f(xe)
            if fe < fr:
                sim[-1], fsim[-1] = xe, fe
            else:
                sim[-1], fsim[-1] = xr, fr
        elif fr < fsim[-2]:
            sim[-1], fsim[-1] = xr, fr
        elif fr < fsim[-1]:
            xc = clip((1 + psi * rho) * xbar - psi * rho * sim[-1])
            fc = f(xc)
            if fc <= fr:
                sim[-1], fsim[-1] = xc, fc
            else:
                shrink = True
        else:
            xcc = clip((1 - psi) * xbar + psi * sim[-1])
            fcc = f(xcc)
            if fcc < fsim[-1]:
                sim[-1], fsim[-1] = xcc, fcc
            else:
                shrink = True
        if shrink:
            for j in range(1, ndim + 1):
                sim[j] = sim[0] + sigma * (sim[j] - sim[0])
                fsim[j] = f(sim[j])
    best = int(np.argmin(fsim))
    return OptimizeResult(sim[best].copy(), float(fsim[best]), nit, nfev, reason, f0, trace)


# ---------------------------------------------------------------- fit


@dataclass(frozen=True)
class FitOptions:
    lambda_mode: str = "profile"  # or "joint"
    xtol: float = 1e-4
    ftol: float = 1e-4
    max_iter: int = 10_000
    max_eval: int = 10_000
    initial_step: float = 0.1
    ci_level: float = 0.95
    ci_z: float | None = None

    def __post_init__(self):
        if self.lambda_mode not in ("profile", "joint"):
            raise ValueError("lambda_mode must be 'profile' or 'joint'")


class _Layout:
    """Map between parameters and the unit cube searched by Nelder-Mead.

    Positive scales are searched in log space; each coordinate is rescaled
    to [0, 1] over its box so the tolerances are relative to the box.
    Coordinates whose box has zero width are held fixed.
    """

    def __init__(self, names, lo, hi, logscale):
        self.names = names
        self.logscale = np.asarray(logscale, dtype=bool)
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        self.raw_lo, self.raw_hi = lo, hi
        self.lo = np.where(self.logscale, np.log(lo), lo)
        self.hi = np.where(self.logscale, np.log(hi), hi)
        self.free = self.hi > self.lo

    def to_unit(self, theta):
        v = np.where(self.logscale, np.log(theta), theta)
        u = np.zeros_like(v)
        w = self.hi - self.lo
        u[self.free] = (v[self.free] - self.lo[self.free]) / w[self.free]
        return np.clip(u[self.free], 0.0, 1.0)

    def from_unit(self, z):
        u = np.zeros(self.lo.shape[0])
        u[self.free] = z
        v = self.lo + u * (self.hi - self.lo)
        theta = np.where(self.logscale, np.exp(v), v)
        # exp(log(x)) need not return x: pinned values and bounds stay exact
        return np.where(self.free, np.clip(theta, self.raw_lo, self.raw_hi), self.raw_lo)


def fit(dataset, initial, bounds=None, options=None):
    """Maximum-likelihood fit of trend coefficients, c1, mu_s, mu_t (and lambda).

    ``initial`` supplies the basis, metric, kernel, neighbor orders and the
    starting values; empty trend coefficients are replaced by OLS.
    K_s, K_t stay fixed.
    """
    bounds = bounds or Bounds()
    options = options or FitOptions()
    dataset.check_unique()
    basis = initial.trend.basis
    ols = None
    b0 = initial.trend.coefficients
    n_b = design_matrix(basis, dataset.s[:1], dataset.t[:1]).shape[1]
    if b0.shape[0] != n_b or bounds.b is None:
        ols = ols_fit(basis, dataset, options.ci_level, options.ci_z)
    if b0.shape[0] != n_b:
        b0 = ols.coefficients
    b_lo, b_hi = bounds.b if bounds.b is not None else (ols.lower, ols.upper)
    if b_lo.shape[0] != n_b:
        raise ValueError("trend bounds do not match the basis")
    params = initial.replace(b=b0)

    separable = params.metric.kind is Metric.SEPARABLE
    joint = options.lambda_mode == "joint"
    names = [f"b{i + 1}" for i in range(n_b)] + ["c1", "mu_s"]
    lo = list(b_lo) + [bounds.c1[0], bounds.mu_s[0]]
    hi = list(b_hi) + [bounds.c1[1], bounds.mu_s[1]]
    start = list(b0) + [params.precision.c1, params.bandwidth.mu_s]
    if separable:
        names.append("mu_t")
        lo.append(bounds.mu_t[0])
        hi.append(bounds.mu_t[1])
        start.append(params.bandwidth.mu_t)
    if joint:
        names.append("lam")
        lo.append(bounds.lam[0])
        hi.append(bounds.lam[1])
        start.append(params.precision.lam)
    logscale = [False] * n_b + [True] * (len(names) - n_b)
    layout = _Layout(names, lo, hi, logscale)
    theta0 = np.clip(np.asarray(start, dtype=float), lo, hi)

    ev = NllEvaluator(dataset, params)

    def unpack(theta):
        b = theta[:n_b]
        c1, mu_s = theta[n_b], theta[n_b + 1]
        mu_t = theta[n_b + 2] if separable else params.bandwidth.mu_t
        lam = theta[-1] if joint else None
        return b, c1, mu_s, mu_t, lam

    def objective(z):
        value, _ = ev.evaluate(*unpack(layout.from_unit(z)))
        return value

    z0 = layout.to_unit(theta0)
    log.info("fit: %d points, free parameters %s", len(dataset),
             [n for n, f in zip(names, layout.free) if f])
    res = minimize_box(objective, z0, np.zeros_like(z0), np.ones_like(z0), options.xtol,
                       options.ftol, options.max_iter, options.max_eval, options.initial_step)
    theta = layout.from_unit(res.x)
    b, c1, mu_s, mu_t, lam = unpack(theta)
    value, lam = ev.evaluate(b, c1, mu_s, mu_t, lam)
    best = params.replace(b=b, lam=lam, c1=c1, mu_s=mu_s, mu_t=mu_t)
    log.info("fit: %s after %d iterations / %d evaluations, nll %.6g -> %.6g",
             res.reason, res.nit, res.nfev, res.fun_initial, value)
    diagnostics = {
        "iterations": res.nit,
        "evaluations": res.nfev,
        "termination": res.reason,
        "nll_initial": res.fun_initial,
        "nll_trace": res.trace,
        "lambda_mode": options.lambda_mode,
        "sparsity_index": ev.last_sparsity,
        "nnz": int(round(ev.last_sparsity * len(dataset) ** 2)),
        "bounds": {n: (float(a), float(c)) for n, a, c in zip(names, lo, hi)},
    }
    return FittedModel(dataset, best, value, ev.weights(mu_s, mu_t), ev.last_factor, ev.scales, diagnostics)
