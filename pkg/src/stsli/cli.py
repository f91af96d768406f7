"""``stsli`` command line: simulate, fit, predict, cv.

Exit status 0 on success, 1 on a computational failure, 2 on a usage or
input error.  Every command writes a run log that starts with the fully
resolved configuration; the log itself is accepted by ``--config``.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
import time

import numpy as np
import yaml

from . import __version__
from ._accel import get_backend, set_threads
from .config import END_MARKER, dump_config, load_config
from .estimate import Bounds, FitOptions, SliParams, fit
from .evaluate import format_table, one_slice_out
from .geometry import BandwidthSpec, MetricSpec, STDataset
from .io import (InputError, load_model, read_samples, save_model, write_metrics,
                 write_predictions, write_samples)
from .kernels import Kernel
from .precision import PrecisionParams, check_disjoint
from .predict import grid_locations, predict
from .simulate import GrfSpec, simulate_grf
from .trend import TrendModel

log = logging.getLogger("stsli")

EXIT_OK, EXIT_COMPUTE, EXIT_USAGE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise InputError(message)


def build_parser():
    p = _Parser(prog="stsli", description="Stochastic local interaction space-time interpolation.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    def common(sp):
        sp.add_argument("--config", help="YAML config or a previous run log")
        sp.add_argument("--out", help="primary output path")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--threads", type=int, help="numba threads (env STSLI_NUM_THREADS)")
        sp.add_argument("-v", "--verbose", action="store_true")

    common(sub.add_parser("simulate", help="draw a synthetic space-time field"))
    common(sub.add_parser("fit", help="maximum-likelihood fit, writes a model file"))
    sp = sub.add_parser("predict", help="predict at target points")
    common(sp)
    sp.add_argument("--model")
    sp.add_argument("--targets", help="CSV with header s1,...,sd,t")
    sp.add_argument("--level", type=float)
    sp = sub.add_parser("cv", help="one-slice-out cross-validation")
    common(sp)
    sp.add_argument("--model", help="use fitted parameters instead of fitting first")
    sp.add_argument("--level", type=float)
    return p


def _overrides(args):
    o = {}
    if args.seed is not None:
        o["seed"] = args.seed
    cmd = args.command
    if args.out is not None:
        key = {"simulate": "samples", "fit": "model", "predict": "predictions", "cv": "metrics"}[cmd]
        o["output"] = {key: os.path.abspath(args.out)}
    if cmd in ("predict", "cv"):
        sec = "prediction" if cmd == "predict" else "cv"
        part = {}
        if args.model is not None:
            part["model"] = os.path.abspath(args.model)
        if args.level is not None:
            part["level"] = args.level
        if cmd == "predict" and args.targets is not None:
            part["targets"] = os.path.abspath(args.targets)
        if part:
            o[sec] = part
    return o


def _primary_output(cmd, cfg):
    out = cfg["output"]
    return {
        "simulate": out["samples"] or cfg["data"]["path"],
        "fit": out["model"],
        "predict": out["predictions"],
        "cv": out["metrics"],
    }[cmd]


def _open_log(cfg, path, verbose):
    os.makedirs(os.path.dirname(os.path.abspath(path)) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dump_config(cfg))
        fh.write(END_MARKER + "\n")
    fmt = logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s")
    fileh = logging.FileHandler(path, encoding="utf-8")
    fileh.setFormatter(fmt)
    errh = logging.StreamHandler(sys.stderr)
    errh.setFormatter(logging.Formatter("%(levelname)s: %(message)s"))
    errh.setLevel(logging.INFO if verbose else logging.WARNING)
    root = logging.getLogger("stsli")
    root.handlers[:] = [fileh, errh]
    root.setLevel(logging.DEBUG)
    root.propagate = False
    return root


def _close_log():
    root = logging.getLogger("stsli")
    for h in root.handlers:
        h.close()
    root.handlers[:] = []


# ---------------------------------------------------------------- binding


def params_from_config(cfg):
    """Initial SliParams from the config (empty trend coefficients mean OLS)."""
    try:
        tr = cfg["trend"]
        init_b = tr["initial"] if tr["initial"] is not None else []
        est = cfg["estimation"]
        return SliParams(
            trend=TrendModel(tuple(tr["basis"]), init_b),
            precision=PrecisionParams(float(est["lambda"]), float(est["c1"])),
            bandwidth=BandwidthSpec(**cfg["bandwidth"]),
            metric=MetricSpec(**cfg["metric"]),
            kernel=Kernel(cfg["kernel"]["kind"]),
            include_diagonal=bool(cfg["kernel"]["include_diagonal"]),
        )
    except (TypeError, ValueError) as exc:
        raise InputError(f"invalid model configuration: {exc}") from exc


def fit_settings_from_config(cfg):
    try:
        tr, est = cfg["trend"], cfg["estimation"]
        bd = est["bounds"]
        b = None
        if tr["lower"] is not None or tr["upper"] is not None:
            if tr["lower"] is None or tr["upper"] is None:
                raise ValueError("trend.lower and trend.upper must be given together")
            b = (tr["lower"], tr["upper"])
        bounds = Bounds(b=b, lam=tuple(bd["lambda"]), c1=tuple(bd["c1"]),
                        mu_s=tuple(bd["mu_s"]), mu_t=tuple(bd["mu_t"]))
        options = FitOptions(lambda_mode=est["lambda_mode"], xtol=float(est["xtol"]),
                             ftol=float(est["ftol"]), max_iter=int(est["max_iter"]),
                             max_eval=int(est["max_eval"]), initial_step=float(est["initial_step"]),
                             ci_level=float(tr["ci_level"]),
                             ci_z=None if tr["ci_z"] is None else float(tr["ci_z"]))
        return bounds, options
    except (TypeError, ValueError) as exc:
        raise InputError(f"invalid estimation configuration: {exc}") from exc


def _read_data(cfg):
    ds = read_samples(cfg["data"]["path"])
    if ds.dim != int(cfg["data"]["dim"]):
        raise InputError(f"{cfg['data']['path']}: {ds.dim} spatial columns, config says dim={cfg['data']['dim']}")
    return ds


def _grid_targets(grid, dim):
    if dim != 2:
        raise InputError("prediction.grid needs dim = 2")
    try:
        locs = grid_locations(grid["x"], grid["y"])
        times = np.atleast_1d(np.asarray(grid["t"], dtype=float))
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"prediction.grid must have x, y as [start, stop, count] and t: {exc}") from exc
    s = np.tile(locs, (times.shape[0], 1))
    t = np.repeat(times, locs.shape[0])
    return STDataset(s, t)


# ---------------------------------------------------------------- commands


def cmd_simulate(cfg):
    try:
        spec = GrfSpec(**cfg["simulate"], seed=cfg["seed"])
    except (TypeError, ValueError) as exc:
        raise InputError(f"invalid simulate section: {exc}") from exc
    ds = simulate_grf(spec)
    path = _primary_output("simulate", cfg)
    write_samples(path, ds)
    n_slices = np.unique(ds.t).shape[0]
    msg = f"N={len(ds)} slices={n_slices} mean={ds.x.mean():.6g} sd={ds.x.std(ddof=1) if len(ds) > 1 else 0.0:.6g}"
    log.info("simulate: %s -> %s", msg, path)
    print(msg)


def cmd_fit(cfg):
    ds = _read_data(cfg)
    init = params_from_config(cfg)
    bounds, options = fit_settings_from_config(cfg)
    t0 = time.perf_counter()
    model = fit(ds, init, bounds, options)
    dt = time.perf_counter() - t0
    path = _primary_output("fit", cfg)
    save_model(path, model, cfg["data"]["path"])
    d = model.diagnostics
    p = model.params
    log.info("fit report: termination=%s iterations=%d evaluations=%d", d["termination"],
             d["iterations"], d["evaluations"])
    log.info("fit report: nll %.10g -> %.10g", d["nll_initial"], model.nll_at_optimum)
    log.info("fit report: nll trace %s", " ".join(f"{v:.8g}" for v in d["nll_trace"]))
    log.info("fit report: sparsity index %.6g (nnz %d)", d["sparsity_index"], d["nnz"])
    print(f"nll={model.nll_at_optimum:.10g} iterations={d['iterations']} "
          f"evaluations={d['evaluations']} termination={d['termination']}")
    print(f"b={list(map(float, p.trend.coefficients))} lambda={p.precision.lam:.6g} "
          f"c1={p.precision.c1:.6g} mu_s={p.bandwidth.mu_s:.6g} mu_t={p.bandwidth.mu_t:.6g}")
    print(f"sparsity_index={d['sparsity_index']:.6g} nnz={d['nnz']} seconds={dt:.2f}")


def cmd_predict(cfg):
    pr = cfg["prediction"]
    model_path = pr["model"] or cfg["output"]["model"]
    model = load_model(model_path)
    if pr["targets"] is not None:
        targets = read_samples(pr["targets"], require_values=False)
        targets = STDataset(targets.s, targets.t)
    elif pr["grid"] is not None:
        targets = _grid_targets(pr["grid"], model.data.dim)
    else:
        raise InputError("no targets: give --targets or prediction.targets / prediction.grid")
    if targets.dim != model.data.dim:
        raise InputError("targets and samples differ in spatial dimension")
    try:
        check_disjoint(model.data, targets)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    res = predict(model, targets, float(pr["level"]), exact_variance=bool(pr["exact_variance"]),
                  c0_mode=pr["c0"])
    path = _primary_output("predict", cfg)
    write_predictions(path, res)
    log.info("predict: %d targets -> %s", len(res), path)
    print(f"P={len(res)} level={pr['level']}")


def cmd_cv(cfg):
    cv = cfg["cv"]
    ds = _read_data(cfg)
    level = float(cv["level"])
    if cv["mode"] == "fixed":
        if cv["model"] is not None:
            model = load_model(cv["model"])
            if len(model.data) != len(ds) or not np.array_equal(model.data.coords(), ds.coords()):
                raise InputError("cv.model was fitted on a different sample file")
        else:
            bounds, options = fit_settings_from_config(cfg)
            model = fit(ds, params_from_config(cfg), bounds, options)
            log.info("cv: fitted params %s", model.params)
        report = one_slice_out(model, ds, mode="fixed", level=level)
    else:
        bounds, options = fit_settings_from_config(cfg)
        report = one_slice_out(params_from_config(cfg), ds, mode="refit", level=level,
                               bounds=bounds, options=options)
    path = _primary_output("cv", cfg)
    write_metrics(path, report)
    table = format_table(report)
    log.info("cv (%s, %d slices)\n%s", cv["mode"], report.n_slices, table)
    print(table)


COMMANDS = {"simulate": cmd_simulate, "fit": cmd_fit, "predict": cmd_predict, "cv": cmd_cv}


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        cfg = load_config(args.config, _overrides(args))
        set_threads(args.threads)
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except (InputError, OSError, yaml.YAMLError, ValueError) as exc:
        print(f"stsli: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    cmd = args.command
    log_path = cfg["output"]["log"] or _primary_output(cmd, cfg) + ".log"
    try:
        _open_log(cfg, log_path, args.verbose)
        log.info("stsli %s %s, backend=%s", __version__, cmd, get_backend())
        COMMANDS[cmd](cfg)
        log.info("done")
        return EXIT_OK
    except (InputError, OSError, KeyError) as exc:
        log.error("%s", exc)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001 - any numerical failure maps to exit 1
        log.debug("traceback", exc_info=True)
        log.error("%s: %s", type(exc).__name__, exc)
        return EXIT_COMPUTE
    finally:
        _close_log()


if __name__ == "__main__":
    sys.exit(main())
