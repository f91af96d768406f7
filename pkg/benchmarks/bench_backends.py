"""Time the numba kernels against the numpy fallbacks.

    python benchmarks/bench_backends.py [--n-locations 100] [--n-times 50] [--repeat 3]

Each stage runs once to warm up (and JIT compile), then ``--repeat`` times;
the best wall time is reported.  Both backends must produce the same NLL.
"""
import argparse
import time

import numpy as np

from stsli import _accel
from stsli.estimate import NllEvaluator, SliParams
from stsli.geometry import BandwidthSpec, MetricSpec, compute_bandwidths
from stsli.kernels import build_weights
from stsli.precision import PrecisionParams, assemble_Jtilde
from stsli.simulate import GrfSpec, simulate_grf
from stsli.sparse_linalg import factorize
from stsli.trend import TrendModel


def best_of(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def stages(ds, params):
    bw = compute_bandwidths(ds, params.bandwidth, params.metric)
    U = build_weights(ds, bw, params.metric).U
    Jt = assemble_Jtilde(U, params.precision.c1)
    ev = NllEvaluator(ds, params, use_cache=False)
    return {
        "knn bandwidths": lambda: compute_bandwidths(ds, params.bandwidth, params.metric),
        "weight assembly": lambda: build_weights(ds, bw, params.metric),
        "cholesky + logdet": lambda: factorize(Jt).log_determinant(),
        "nll evaluation": lambda: ev.evaluate(params.trend.coefficients, params.precision.c1,
                                              params.bandwidth.mu_s, params.bandwidth.mu_t)[0],
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n-locations", type=int, default=100)
    ap.add_argument("--n-times", type=int, default=50)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if not _accel.HAVE_NUMBA:
        raise SystemExit("numba is disabled or missing; nothing to compare")

    ds = simulate_grf(GrfSpec(n_locations=args.n_locations, n_times=args.n_times, seed=1))
    params = SliParams(TrendModel(("constant",), [float(ds.x.mean())]), PrecisionParams(1.0, 1e4),
                       BandwidthSpec(1.0, 1.5, 3, 3), MetricSpec("separable"))
    print(f"N = {len(ds)}, threads = {_accel.numba.get_num_threads()}")
    print(f"{'stage':<20}{'numba [s]':>12}{'numpy [s]':>12}{'speedup':>10}")
    results = {}
    for backend in ("numba", "numpy"):
        _accel.set_backend(backend)
        results[backend] = {name: best_of(fn, args.repeat) for name, fn in stages(ds, params).items()}
    _accel.set_backend("numba")
    for name in results["numba"]:
        a, b = results["numba"][name][0], results["numpy"][name][0]
        print(f"{name:<20}{a:>12.4f}{b:>12.4f}{b / a:>9.1f}x")
    nll_a = results["numba"]["nll evaluation"][1]
    nll_b = results["numpy"]["nll evaluation"][1]
    print(f"nll numba {nll_a:.12g}  numpy {nll_b:.12g}  rel diff {abs(nll_a - nll_b) / abs(nll_b):.1e}")
    if not np.isclose(nll_a, nll_b, rtol=1e-10, atol=0):
        raise SystemExit("backends disagree")


if __name__ == "__main__":
    main()
