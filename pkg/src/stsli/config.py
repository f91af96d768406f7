"""Run configuration: YAML with a fixed schema; unknown keys are errors."""
from __future__ import annotations

import copy
import os

import yaml

from .io import InputError

END_MARKER = "# --- end of resolved config ---"

DEFAULTS = {
    "seed": 0,
    "data": {"path": "samples.csv", "dim": 2},
    "simulate": {
        "mean": 10.0,
        "variance": 5.0,
        "xi_s": 20.0,
        "xi_t": 10.0,
        "n_locations": 100,
        "domain_side": 100.0,
        "n_times": 50,
        "dt": 1.0,
    },
    "metric": {"kind": "separable", "alpha": 1.0},
    "kernel": {"kind": "quadratic", "include_diagonal": True},
    "bandwidth": {"mu_s": 1.0, "mu_t": 1.0, "K_s": 3, "K_t": 3},
    "trend": {
        "basis": [{"kind": "constant"}],
        "initial": None,
        "lower": None,
        "upper": None,
        "ci_level": 0.95,
        "ci_z": None,
    },
    "estimation": {
        "c1": 1.0,
        "lambda": 1.0,
        "lambda_mode": "profile",
        "bounds": {
            "lambda": [1.0e-6, 1.0e7],
            "c1": [1.0e-3, 1.0e7],
            "mu_s": [0.1, 10.0],
            "mu_t": [0.1, 10.0],
        },
        "xtol": 1.0e-4,
        "ftol": 1.0e-4,
        "max_iter": 10000,
        "max_eval": 10000,
        "initial_step": 0.1,
    },
    "prediction": {
        "model": None,
        "targets": None,
        "grid": None,
        "level": 0.95,
        "exact_variance": False,
        "c0": "combined",
    },
    "cv": {"mode": "fixed", "model": None, "level": 0.95},
    "output": {
        "samples": None,
        "model": "model.yaml",
        "predictions": "predictions.csv",
        "metrics": "metrics.csv",
        "log": None,
    },
}

# keys whose value is free-form (not recursed into)
_LEAF = {("trend", "basis"), ("prediction", "grid"), ("trend", "initial"), ("trend", "lower"), ("trend", "upper")}
_PATHS = [("data", "path"), ("prediction", "model"), ("cv", "model"), ("prediction", "targets"), ("output", "samples"), ("output", "model"),
          ("output", "predictions"), ("output", "metrics"), ("output", "log")]
_GRID_KEYS = {"x", "y", "t"}


def _merge(base, override, trail):
    for key, val in override.items():
        where = ".".join(trail + [str(key)])
        if key not in base:
            raise InputError(f"unknown config key '{where}'")
        if isinstance(base[key], dict) and tuple(trail + [key]) not in _LEAF:
            if not isinstance(val, dict):
                raise InputError(f"config key '{where}' must be a mapping")
            _merge(base[key], val, trail + [key])
        else:
            base[key] = val


def read_text(path):
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    # a run log starts with the resolved config; replay reads up to the marker
    if END_MARKER in text:
        text = text.split(END_MARKER, 1)[0]
    return text


def load_config(path=None, overrides=None):
    """Parse a config file (or a run log) into a fully resolved dict.

    Relative paths are made absolute against the config file's directory.
    """
    cfg = copy.deepcopy(DEFAULTS)
    base_dir = os.getcwd()
    if path is not None:
        try:
            raw = yaml.safe_load(read_text(path))
        except yaml.YAMLError as exc:
            raise InputError(f"{path}: {exc}") from exc
        if raw is None:
            raw = {}
        if not isinstance(raw, dict):
            raise InputError(f"{path}: config must be a mapping")
        _merge(cfg, raw, [])
        base_dir = os.path.dirname(os.path.abspath(path))
    if overrides:
        _merge(cfg, overrides, [])
    for sec, key in _PATHS:
        v = cfg[sec][key]
        if v is not None and not os.path.isabs(v):
            cfg[sec][key] = os.path.normpath(os.path.join(base_dir, v))
    _validate(cfg)
    return cfg


def _validate(cfg):
    grid = cfg["prediction"]["grid"]
    if grid is not None:
        if not isinstance(grid, dict):
            raise InputError("config key 'prediction.grid' must be a mapping")
        for key in grid:
            if key not in _GRID_KEYS:
                raise InputError(f"unknown config key 'prediction.grid.{key}'")
    for item in cfg["trend"]["basis"]:
        if isinstance(item, dict):
            for key in item:
                if key not in ("kind", "degree", "period"):
                    raise InputError(f"unknown config key 'trend.basis.{key}'")
    if cfg["estimation"]["lambda_mode"] not in ("profile", "joint"):
        raise InputError("config key 'estimation.lambda_mode' must be profile or joint")
    if cfg["cv"]["mode"] not in ("fixed", "refit"):
        raise InputError("config key 'cv.mode' must be fixed or refit")
    if cfg["prediction"]["c0"] not in ("combined", "samples"):
        raise InputError("config key 'prediction.c0' must be combined or samples")
    for name in ("lambda", "c1", "mu_s", "mu_t"):
        pair = cfg["estimation"]["bounds"][name]
        if not (isinstance(pair, (list, tuple)) and len(pair) == 2):
            raise InputError(f"config key 'estimation.bounds.{name}' must be [lower, upper]")
    if not isinstance(cfg["seed"], int):
        raise InputError("config key 'seed' must be an integer")


def dump_config(cfg):
    return yaml.safe_dump(cfg, sort_keys=False)
