"""Run configuration: presets, JSON loading and ``key=value`` overrides.

A run configuration is a nested dict of plain JSON values. Presets give
complete defaults; a JSON file and ``--set`` overrides are merged on top
(later sources win), and the merged dict is what the provenance records.
"""

from __future__ import annotations

import copy
import json
import os

from .errors import ConfigError, DataError
from .micromag import DeviceGeometry, MaterialParams

TASKS = ("mg", "household")
BACKENDS = ("surrogate", "micromag")

# skyrmion-stable DMI for the desk grid; the published 0.6 mJ/m^2 collapses
# the skyrmion on 2 nm cells with the local demag approximation
DESK_DMI = 1.4e-3

MICROMAG_PRESETS = {
    "desk": {
        "geometries": [
            {"side_length": 256e-9, "moat_width": 16e-9, "inner_block_side": 200e-9},
            {"side_length": 240e-9, "moat_width": 16e-9, "inner_block_side": 200e-9},
            {"side_length": 232e-9, "moat_width": 16e-9, "inner_block_side": 200e-9},
        ],
        "material": {"dmi_constant": DESK_DMI},
        "skyrmion_radius": 20e-9,
    },
    "paper": {
        "geometries": [
            {"side_length": 1000e-9, "moat_width": 16e-9, "inner_block_side": 500e-9},
            {"side_length": 800e-9, "moat_width": 16e-9, "inner_block_side": 500e-9},
            {"side_length": 700e-9, "moat_width": 16e-9, "inner_block_side": 500e-9},
        ],
        "material": {},
        "skyrmion_radius": 40e-9,
    },
    "paper-large": {
        "geometries": [
            {"side_length": 1050e-9, "moat_width": 16e-9, "inner_block_side": 500e-9},
            {"side_length": 850e-9, "moat_width": 16e-9, "inner_block_side": 500e-9},
            {"side_length": 750e-9, "moat_width": 16e-9, "inner_block_side": 500e-9},
        ],
        "material": {},
        "skyrmion_radius": 40e-9,
    },
}

ENERGY_PRESETS = {
    # reproduces the published chain; the init writes use the rounded 2 fJ
    "paper": {"side_length": 1000e-9, "delta_pma": 7.5e3, "init_write_energy": 2e-15},
    # the values as printed (0.75e3 J/m^3, 1050 nm)
    "printed": {"side_length": 1050e-9, "delta_pma": 0.75e3, "init_write_energy": 2e-15},
    "computed": {},
}


def _micromag_defaults(preset="desk"):
    if preset not in MICROMAG_PRESETS:
        raise ConfigError(f"unknown micromag preset {preset!r}; "
                          f"expected one of {sorted(MICROMAG_PRESETS)}")
    p = copy.deepcopy(MICROMAG_PRESETS[preset])
    return {
        "preset": preset,
        "geometries": p["geometries"],
        "material": p["material"],
        "protocol": {},
        "input_map": {},
        "skyrmion_radius": p["skyrmion_radius"],
        "dt": 1e-12 / 6,
        "relax": {"max_time": 20e-9, "torque_tol": 1e-3, "damping": 0.5},
        "snapshots": False,
    }


def default_config(task="mg", backend="surrogate", micromag_preset="desk"):
    if task not in TASKS:
        raise ConfigError(f"unknown task {task!r}; expected one of {TASKS}")
    if backend not in BACKENDS:
        raise ConfigError(f"unknown backend {backend!r}; expected one of {BACKENDS}")
    if task == "mg":
        splits, d, lam = [30, 370, 30], 30, 1e-8
    else:
        splits, d, lam = [20, 220, 23], 20, 1e-1
    return {
        "task": task,
        "backend": backend,
        "seed": 0,
        "jobs": 1,
        "mg": {"n_samples": 431},
        "household": {"path": None, "series": None, "start": None, "length": 284},
        "splits": splits,
        "features": {"delay_depth": d, "include_bias": False},
        "lambda": lam,
        "warmup": "full",
        "phase_lag": 17,
        "surrogate": {
            "devices": 3,
            "jitter": 0.1,
            "bias_scale": 1.0,
            "base": {"node_count": 6, "topology": "ring", "self_weight": 0.5,
                     "neighbor_weight": 0.4, "input_weight": 0.9, "activation": "tanh"},
        },
        "micromag": _micromag_defaults(micromag_preset),
        "save_states": False,
        "energy": dict(ENERGY_PRESETS["paper"]),
    }


def merge(base, override):
    """Recursive dict merge; ``override`` wins, lists are replaced whole."""
    out = copy.deepcopy(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def parse_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_set(cfg, assignments):
    """Apply ``a.b.c=value`` strings; values are parsed as JSON when possible."""
    cfg = copy.deepcopy(cfg)
    for item in assignments or ():
        key, sep, val = item.partition("=")
        if not sep or not key:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        node = cfg
        parts = key.split(".")
        for p in parts[:-1]:
            nxt = node.get(p)
            if nxt is None:
                nxt = node[p] = {}
            if not isinstance(nxt, dict):
                raise ConfigError(f"--set {key}: {p!r} is not a section")
            node = nxt
        node[parts[-1]] = parse_value(val)
    return cfg


def load_json(path):
    try:
        with open(path) as fh:
            obj = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file {path} does not exist") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(obj, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return obj


def resolve(file_cfg=None, assignments=(), seed=None, jobs=None, energy_preset=None):
    """Merge preset defaults, a JSON config and overrides (flags win)."""
    file_cfg = file_cfg or {}
    early = apply_set(file_cfg, assignments)
    task = early.get("task", "mg")
    backend = early.get("backend", "surrogate")
    preset = early.get("micromag", {}).get("preset", "desk")
    base = default_config(task, backend, preset)
    if energy_preset is not None:
        if energy_preset not in ENERGY_PRESETS:
            raise ConfigError(f"unknown energy preset {energy_preset!r}")
        base["energy"] = dict(ENERGY_PRESETS[energy_preset])
    cfg = merge(base, file_cfg)
    cfg = apply_set(cfg, assignments)
    if seed is not None:
        cfg["seed"] = int(seed)
    if jobs is not None:
        cfg["jobs"] = int(jobs)
    if cfg["task"] not in TASKS:
        raise ConfigError(f"unknown task {cfg['task']!r}; expected one of {TASKS}")
    if cfg["backend"] not in BACKENDS:
        raise ConfigError(f"unknown backend {cfg['backend']!r}; expected one of {BACKENDS}")
    return cfg


def load_device_config(path):
    """Read ``{"geometry": {...}, "material": {...}}`` (SI units) from JSON."""
    obj = load_json(path)
    unknown = set(obj) - {"geometry", "material"}
    if unknown:
        raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")
    geom = DeviceGeometry.from_dict(obj["geometry"]) if "geometry" in obj else None
    mat = MaterialParams.from_dict(obj.get("material", {}))
    return geom, mat


def data_dir():
    return os.environ.get("SPINRES_DATA_DIR", os.path.join(os.path.expanduser("~"), ".spinres"))


def household_path(cfg):
    path = cfg["household"].get("path")
    if path:
        return path
    path = os.path.join(data_dir(), "household_power_consumption.txt")
    if not os.path.exists(path):
        raise DataError(f"no household file configured and {path} does not exist "
                        f"(set household.path or SPINRES_DATA_DIR)")
    return path
