"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v`` or
``python tests/test_acceptance.py``.
"""
import math
import os
import subprocess
import sys
import time

import numpy as np
import pytest
import yaml
from hypothesis import given, settings
from hypothesis import strategies as st

from stsli.estimate import Bounds, FittedModel, NllEvaluator, SliParams, fit, nll, profile_lambda
from stsli.evaluate import format_value, metrics, one_slice_out
from stsli.geometry import BandwidthSpec, MetricSpec, STDataset, compute_bandwidths
from stsli.kernels import build_weights, build_weights_gridded, kernel_matrix
from stsli.precision import PrecisionParams, assemble_blocks, assemble_J, assemble_Jtilde, laplacian
from stsli.predict import predict
from stsli.simulate import GrfSpec, simulate_grf
from stsli.sparse_linalg import factorize
from stsli.trend import TrendModel

import dense

REPLICATION_SEEDS = (1, 2, 3)


@pytest.fixture
def verdict(capsys):
    def emit(number, title, ok, detail=""):
        with capsys.disabled():
            print(f"\n[criterion {number:2d}] {'PASS' if ok else 'FAIL'}  {title}: {detail}")
        return ok

    return emit


def sli(b=10.0, lam=1.0, c1=2.0, mu_s=1.5, mu_t=1.5, metric="separable", alpha=1.0, kernel="quadratic"):
    return SliParams(TrendModel(("constant",), [b]), PrecisionParams(lam, c1), BandwidthSpec(mu_s, mu_t, 3, 3),
                     MetricSpec(metric, alpha), kernel=kernel)


# 1 ------------------------------------------------------------------------


def test_dense_oracle_equivalence(verdict):
    worst = {"U": 0.0, "J": 0.0, "nll": 0.0}

    @settings(max_examples=20, deadline=None, database=None, derandomize=True)
    @given(seed=st.integers(0, 2**32 - 1), mu_s=st.floats(0.8, 3.0), mu_t=st.floats(0.8, 3.0),
           c1=st.floats(1e-2, 1e3), lam=st.floats(0.05, 20.0), metric=st.sampled_from(["separable", "composite"]),
           kernel=st.sampled_from(["quadratic", "triangular", "spherical"]))
    def one(seed, mu_s, mu_t, c1, lam, metric, kernel):
        r = np.random.default_rng(seed)
        s, t, x = dense.random_instance(r, 30)
        ds = STDataset(s, t, x)
        p = sli(b=10.0, lam=lam, c1=c1, mu_s=mu_s, mu_t=mu_t, metric=metric, alpha=0.8, kernel=kernel)
        bw = compute_bandwidths(ds, p.bandwidth, p.metric)
        hs_ref, ht_ref = dense.scales(s, t, 3, 3)
        hs_ref, ht_ref = mu_s * hs_ref, mu_t * ht_ref
        if metric == "composite":
            ht_ref = hs_ref / 0.8
        U_ref = dense.normalized(dense.weights(s, t, hs_ref, ht_ref, metric, 0.8, kernel))
        J_ref = dense.jtilde(U_ref, c1) / lam
        U = build_weights(ds, bw, p.metric, p.kernel).U.toarray()
        J = assemble_J(build_weights(ds, bw, p.metric, p.kernel).U, p.precision).toarray()
        want = dense.nll_from_density(x - 10.0, dense.jtilde(U_ref, c1), lam)
        worst["U"] = max(worst["U"], np.abs(U - U_ref).max())
        worst["J"] = max(worst["J"], np.abs(J - J_ref).max())
        worst["nll"] = max(worst["nll"], abs(nll(p, ds) - want))

    t0 = time.perf_counter()
    one()
    elapsed = time.perf_counter() - t0
    ok = worst["U"] <= 1e-12 and worst["J"] <= 1e-12 and worst["nll"] <= 1e-9 and elapsed < 10
    verdict(1, "dense-oracle equivalence",
            ok, f"20 instances, max|dU|={worst['U']:.2e} max|dJ|={worst['J']:.2e} "
                f"max|dNLL|={worst['nll']:.2e} in {elapsed:.2f}s")
    assert ok


# 2 ------------------------------------------------------------------------


def test_conditional_mean_oracle(verdict):
    t0 = time.perf_counter()
    worst = 0.0
    for k in range(10):
        r = np.random.default_rng(100 + k)
        s, t, x = dense.random_instance(r, 25)
        ds = STDataset(s, t, x)
        p = sli(lam=r.uniform(0.1, 5), c1=10 ** r.uniform(-1, 3), mu_s=r.uniform(1, 2.5), mu_t=r.uniform(1, 2.5))
        model = FittedModel.from_params(ds, p)
        tg = STDataset(r.uniform(0, 10, size=(5, 2)), r.integers(1, 6, size=5) + 0.5)
        res = predict(model, tg)
        J = assemble_blocks(ds, tg, p.bandwidth, p.metric, params=p.precision).full().toarray()
        want = 10.0 - np.linalg.inv(J[25:, 25:]) @ J[25:, :25] @ (x - 10.0)
        worst = max(worst, np.abs(res.mean - want).max())
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-9 and elapsed < 5
    verdict(2, "GMRF conditional mean", ok, f"10 instances N=25 P=5, max|d mean|={worst:.2e} in {elapsed:.2f}s")
    assert ok


# 3 ------------------------------------------------------------------------


def test_lambda_invariance(verdict):
    r = np.random.default_rng(7)
    s, t, x = dense.random_instance(r, 40)
    ds = STDataset(s, t, x)
    tg = STDataset(r.uniform(0, 10, size=(8, 2)), r.integers(1, 6, size=8) + 0.25)
    base_p = sli(lam=0.7, c1=25.0)
    base = predict(FittedModel.from_params(ds, base_p), tg)
    mean_err, var_err = 0.0, 0.0
    for factor in (0.1, 10.0, 1000.0):
        res = predict(FittedModel.from_params(ds, base_p.replace(lam=0.7 * factor)), tg)
        mean_err = max(mean_err, np.max(np.abs(res.mean - base.mean) / np.abs(base.mean)))
        var_err = max(var_err, np.max(np.abs(res.variance / (base.variance * factor) - 1)))
    ok = mean_err <= 1e-12 and var_err <= 1e-14
    verdict(3, "lambda invariance", ok, f"factors 0.1,10,1000: mean rel {mean_err:.1e}, variance ratio {var_err:.1e}")
    assert ok


# 4 ------------------------------------------------------------------------


def test_laplacian_spd(verdict):
    r = np.random.default_rng(11)
    worst, failures = 0.0, 0
    for k in range(50):
        c1 = (1e-3, 1e5)[k % 2] if k < 20 else 10 ** r.uniform(-3, 5)
        s, t, _ = dense.random_instance(r, int(r.integers(20, 80)), n_times=6, side=15.0)
        ds = STDataset(s, t)
        m = MetricSpec(r.choice(["separable", "composite"]), r.uniform(0.3, 3))
        bw = compute_bandwidths(ds, BandwidthSpec(r.uniform(0.5, 3), r.uniform(0.5, 3)), m)
        U = build_weights(ds, bw, m, r.choice(["quadratic", "triangular", "spherical"])).U
        worst = max(worst, np.abs(laplacian(U) @ np.ones(len(ds))).max())
        try:
            factorize(assemble_Jtilde(U, c1))
        except np.linalg.LinAlgError:
            failures += 1
    ok = worst <= 1e-12 and failures == 0
    verdict(4, "Laplacian and SPD", ok, f"50 draws, max|J1 1|={worst:.1e}, Cholesky failures {failures}")
    assert ok


# 5 ------------------------------------------------------------------------


def test_profiled_lambda_stationary(verdict):
    worst = 0.0
    h = 1e-4
    for k in range(10):
        r = np.random.default_rng(500 + k)
        s, t, x = dense.random_instance(r, 30)
        ds = STDataset(s, t, x)
        p = sli(b=r.uniform(9, 11), c1=10 ** r.uniform(-1, 3))
        ev = NllEvaluator(ds, p)
        lam = profile_lambda(p, ds, ev)
        f = lambda ln: nll(p.replace(lam=math.exp(ln)), ds, ev)
        worst = max(worst, abs((f(math.log(lam) + h) - f(math.log(lam) - h)) / (2 * h)))
    ok = worst <= 1e-6
    verdict(5, "profiled lambda stationarity", ok, f"10 instances, max|dNLL/dln lambda|={worst:.1e}")
    assert ok


# 6 and 7 ------------------------------------------------------------------


def replicate(seed):
    ds = simulate_grf(GrfSpec(seed=seed))
    n = len(ds)
    m, sd = ds.x.mean(), ds.x.std(ddof=1)
    half = 5 * sd / math.sqrt(n)
    bounds = Bounds(b=([m - half], [m + half]), lam=(1e-3, 1e7), c1=(1.0, 1e7), mu_s=(0.4, 10.0), mu_t=(1.4, 10.0))
    init = SliParams(TrendModel(("constant",), [m]), PrecisionParams(430.0, 2.8484e6), BandwidthSpec(1.0, 1.4, 3, 3))
    t0 = time.perf_counter()
    model = fit(ds, init, bounds)
    report = one_slice_out(model)
    return model, report, time.perf_counter() - t0


@pytest.fixture(scope="module")
def replications():
    return {seed: replicate(seed) for seed in REPLICATION_SEEDS}


def test_synthetic_replication(verdict, replications):
    ok = True
    lines = []
    for seed, (model, report, secs) in replications.items():
        a = report.aggregate
        good = a.r_pearson >= 0.90 and 0.60 <= a.rmse <= 1.00 and abs(a.me) <= 0.05 and secs <= 300
        ok &= good
        lines.append(f"seed {seed}: ME={a.me:+.4f} MAE={a.mae:.4f} RMSE={a.rmse:.4f} R={a.r_pearson:.4f} "
                     f"({secs:.0f}s){'' if good else ' <-'}")
    verdict(6, "synthetic replication", ok, "; ".join(lines))
    assert ok


def test_sparsity(verdict, replications):
    vals = {seed: model.diagnostics["sparsity_index"] for seed, (model, _, _) in replications.items()}
    ok = all(1e-4 <= v <= 5e-3 for v in vals.values())
    verdict(7, "sparsity index", ok, ", ".join(f"seed {k}: {100 * v:.3f}%" for k, v in vals.items()))
    assert ok


# 8 ------------------------------------------------------------------------


def test_kronecker_path(verdict):
    r = np.random.default_rng(8)
    locs = r.uniform(0, 100, size=(10, 2))
    times = np.arange(1.0, 11.0)
    ds = STDataset(np.repeat(locs, 10, axis=0), np.tile(times, 10))
    m = MetricSpec("separable")
    bw = compute_bandwidths(ds, BandwidthSpec(2.0, 1.5, 3, 3), m)
    scattered = build_weights(ds, bw, m)
    gridded = build_weights_gridded(kernel_matrix(locs, bw.h_s[::10]), kernel_matrix(times, bw.h_t[:10]))
    err = max(abs(scattered.W - gridded.W).max(), abs(scattered.U - gridded.U).max())
    ok = err <= 1e-14
    verdict(8, "Kronecker path", ok, f"10x10 grid, max|dW|,|dU|={err:.1e}")
    assert ok


# 9 ------------------------------------------------------------------------


def test_simulator_covariance(verdict):
    spec = dict(mean=10.0, variance=5.0, xi_s=20.0, xi_t=10.0, n_times=6)
    locs = np.array([[0.0, 0.0], [10.0, 0.0], [0.0, 25.0], [30.0, 40.0]])
    nt = spec["n_times"]
    idx = lambda loc, k: loc * nt + k
    pairs = [(idx(0, 0), idx(0, 0)), (idx(0, 2), idx(1, 2)), (idx(0, 0), idx(0, 3)),
             (idx(0, 1), idx(2, 3)), (idx(0, 0), idx(3, 5))]
    X = np.array([simulate_grf(GrfSpec(**spec, n_locations=4, seed=70_000 + k), locations=locs).x
                  for k in range(500)]) - 10.0
    ok, parts = True, []
    for a, b in pairs:
        r = float(np.linalg.norm(locs[a // nt] - locs[b // nt]))
        tau = abs(a % nt - b % nt)
        theory = 5.0 * math.exp(-r / 20.0 - tau / 10.0)
        prod = X[:, a] * X[:, b]
        se = prod.std(ddof=1) / math.sqrt(prod.shape[0])
        dev = abs(prod.mean() - theory) / se
        ok &= dev <= 3.0
        parts.append(f"(r={r:g},tau={tau}) {prod.mean():.3f} vs {theory:.3f} [{dev:.2f} se]")
    verdict(9, "simulator covariance", ok, "; ".join(parts))
    assert ok


# 10 -----------------------------------------------------------------------


def test_metrics_fidelity(verdict):
    p = np.array([9.8, 10.4, 11.9, 8.7, 10.0, 12.3])
    x = np.array([10.1, 10.0, 12.5, 8.0, 9.6, 11.8])
    m = metrics(p, x)
    # hand values: errors -0.3, 0.4, -0.6, 0.7, 0.4, 0.5
    hand = {
        "me": 1.1 / 6,
        "mae": 2.9 / 6,
        "rmse": math.sqrt(1.51 / 6),
        "mare": (0.3 / 10.1 + 0.4 / 10.0 + 0.6 / 12.5 + 0.7 / 8.0 + 0.4 / 9.6 + 0.5 / 11.8) / 6,
    }
    close = all(getattr(m, k) == pytest.approx(v, rel=1e-12) for k, v in hand.items())
    z = metrics([1.0, 2.0, 2.5], [0.0, 2.0, 3.0])
    inf = format_value(z.mare) == "Inf" and format_value(z.rmsre) == "Inf"
    ok = close and inf
    verdict(10, "metrics fidelity", ok, f"hand values {'match' if close else 'differ'}; zero truth gives "
                                        f"MARE={format_value(z.mare)} RMSRE={format_value(z.rmsre)}")
    assert ok


# 11 -----------------------------------------------------------------------


def test_cli_round_trip(verdict, tmp_path):
    cfg = {
        "seed": 21,
        "data": {"path": "samples.csv"},
        "simulate": {"n_locations": 30, "n_times": 8},
        "bandwidth": {"mu_s": 1.5, "mu_t": 1.5},
        "estimation": {"c1": 10.0, "max_eval": 200},
    }
    (tmp_path / "run.yaml").write_text(yaml.safe_dump(cfg, sort_keys=False))
    codes = {}
    for cmd in ("simulate", "fit", "cv"):
        codes[cmd] = subprocess.run(["stsli", cmd, "--config", "run.yaml"], cwd=tmp_path,
                                    capture_output=True, text=True).returncode
    first = (tmp_path / "model.yaml").read_text()
    os.replace(tmp_path / "model.yaml.log", tmp_path / "replay.yaml")
    codes["replay"] = subprocess.run(["stsli", "fit", "--config", "replay.yaml"], cwd=tmp_path,
                                     capture_output=True, text=True).returncode
    same = (tmp_path / "model.yaml").read_text() == first
    pooled = (tmp_path / "metrics.csv").read_text().splitlines()[-1].startswith("pooled,")
    ok = all(c == 0 for c in codes.values()) and same and pooled
    verdict(11, "CLI round trip", ok, f"exit codes {codes}, replayed model identical: {same}")
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
