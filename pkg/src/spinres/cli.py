"""Command-line front end.

Commands: gen-mg, prepare-household, run, energy, sweep. Each writes its
outputs plus ``provenance.json`` into ``--out`` and prints one summary line
of ``key=value`` fields on stdout; diagnostics go to stderr.

Exit codes: 0 success, 2 configuration error, 3 data/I-O error,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from . import config as C
from .analysis import (EnergyModel, MetricsReport, energy_report, format_energy_report,
                       write_energy_json)
from .data import MGParams, SeriesBundle, load_household, make_splits, mg_generate, normalize_minmax
from .errors import ConfigError, SpinresError
from .learner import FeatureConfig, train_task
from .micromag import (DeviceGeometry, MaterialParams, init_skyrmion, relax, topological_charge,
                       write_snapshot_csv)
from .reservoir import (DriveProtocol, InputMap, MicromagBackend, SurrogateBackend,
                        SurrogateConfig, surrogate_ensemble)

log = logging.getLogger("spinres")


# --------------------------------------------------------------------------- helpers

def _sha(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _provenance(out, command, cfg, outputs, inputs=(), extra=None):
    prov = {
        "command": command,
        "version": __version__,
        "config": cfg,
        "inputs": {os.path.basename(p): _sha(p) for p in inputs},
        "outputs": {os.path.basename(p): _sha(p) for p in outputs},
    }
    if extra:
        prov.update(extra)
    _write_json(os.path.join(out, "provenance.json"), prov)


def _summary(command, **fields):
    parts = [command]
    for k, v in fields.items():
        if isinstance(v, float):
            v = f"{v:.6g}"
        parts.append(f"{k}={v}")
    print(" ".join(parts), flush=True)


def _mg_params(cfg):
    return MGParams.from_dict(cfg.get("mg", {}))


def build_bundle(cfg) -> SeriesBundle:
    if cfg["task"] == "mg":
        bundle = normalize_minmax(mg_generate(_mg_params(cfg)))
    else:
        h = cfg["household"]
        if h.get("series"):
            bundle = SeriesBundle.from_csv(h["series"])
            if h.get("length") and len(bundle) != int(h["length"]):
                raise ConfigError(f"series file has {len(bundle)} samples, config expects "
                                  f"{h['length']}")
        else:
            bundle = load_household(C.household_path(cfg), (h.get("start"), h.get("length", 284)))
    return make_splits(bundle, *cfg["splits"])


def build_surrogate(cfg) -> SurrogateBackend:
    s = cfg["surrogate"]
    base = SurrogateConfig.from_dict(s.get("base", {}))
    cfgs = surrogate_ensemble(int(s.get("devices", 3)), base, float(s.get("jitter", 0.1)),
                              float(s.get("bias_scale", 0.0)), int(cfg.get("seed", 0)))
    return SurrogateBackend(cfgs)


def prepare_devices(mm, out=None):
    """Relaxed skyrmion states for every configured geometry."""
    material = MaterialParams.from_dict(mm.get("material", {}))
    rel = mm.get("relax", {})
    devices = []
    for k, gd in enumerate(mm["geometries"]):
        geom = DeviceGeometry.from_dict(gd)
        st = init_skyrmion(geom, material, float(mm.get("skyrmion_radius", 20e-9)))
        st, ok = relax(st, material, float(rel.get("max_time", 20e-9)),
                       float(rel.get("torque_tol", 1e-3)), dt=float(mm.get("dt", 1e-12 / 6)),
                       precess=False, damping=float(rel.get("damping", 0.5)))
        q = topological_charge(st)
        if not ok:
            log.warning("device %d: relaxation did not reach torque_tol", k)
        if abs(abs(q) - 1) > 0.1:
            log.warning("device %d: topological charge %.3f after relaxation", k, q)
        if out is not None and mm.get("snapshots"):
            write_snapshot_csv(st, os.path.join(out, f"device{k}_relaxed.csv"))
        devices.append((geom, st))
    return devices, material


def build_micromag(cfg, out=None) -> MicromagBackend:
    mm = cfg["micromag"]
    devices, material = prepare_devices(mm, out)
    protocol = DriveProtocol(**mm.get("protocol", {}))
    im = dict(mm.get("input_map", {}))
    im.setdefault("ku_baseline", material.uniaxial_anisotropy)
    return MicromagBackend(devices, material, protocol, InputMap(**im),
                           dt=float(mm.get("dt", 1e-12 / 6)), jobs=int(cfg.get("jobs", 1)))


def build_backend(cfg, out=None):
    if cfg["backend"] == "surrogate":
        return build_surrogate(cfg)
    if cfg["backend"] == "micromag":
        return build_micromag(cfg, out)
    raise ConfigError(f"unknown backend {cfg['backend']!r}")


def _features(cfg):
    f = cfg.get("features", {})
    return FeatureConfig(int(f.get("delay_depth", 0)), bool(f.get("include_bias", False)))


def _inputs_of(cfg):
    if cfg["task"] == "household" and not cfg["household"].get("series"):
        return [C.household_path(cfg)]
    if cfg["task"] == "household":
        return [cfg["household"]["series"]]
    return []


# --------------------------------------------------------------------------- commands

def cmd_gen_mg(cfg, out):
    params = _mg_params(cfg)
    raw = mg_generate(params)
    path = os.path.join(out, "mg.csv")
    constant = bool(np.ptp(raw) == 0)
    if constant:
        log.warning("x0 = %r is a fixed point: the series is constant and cannot be "
                    "normalized; the normalized column is set to 0", params.x0)
        bundle = SeriesBundle(raw, np.zeros_like(raw), float(raw[0]), float(raw[0]))
    else:
        bundle = normalize_minmax(raw)
    bundle.to_csv(path)
    _provenance(out, "gen-mg", cfg, [path], extra={"constant_series": constant})
    _summary("gen-mg", samples=len(raw), min=float(raw.min()), max=float(raw.max()),
             constant=str(constant).lower(), file=path)
    return 0


def cmd_prepare_household(cfg, out):
    h = cfg["household"]
    src = C.household_path(cfg)
    bundle = load_household(src, (h.get("start"), h.get("length", 284)))
    path = os.path.join(out, "household.csv")
    bundle.to_csv(path)
    _provenance(out, "prepare-household", cfg, [path], inputs=[src],
                extra={"window": bundle.meta, "normalization": bundle.normalization()})
    _summary("prepare-household", hours=len(bundle), start=bundle.meta["window_start"],
             vmin=bundle.vmin, vmax=bundle.vmax, file=path)
    return 0


def _run_once(cfg, out, write=True):
    bundle = build_bundle(cfg)
    backend = build_backend(cfg, out if write else None)
    try:
        res = train_task(bundle, backend, _features(cfg), float(cfg["lambda"]),
                         warmup=cfg.get("warmup", "full"))
    finally:
        if hasattr(backend, "close"):
            backend.close()
    return bundle, backend, res


def cmd_run(cfg, out):
    bundle, backend, res = _run_once(cfg, out)
    files = []

    def path(name):
        p = os.path.join(out, name)
        files.append(p)
        return p

    res.model.to_json(path("model.json"))
    res.open_loop.to_csv(path("open_loop.csv"))
    res.autonomous.to_csv(path("autonomous.csv"))
    lag = cfg.get("phase_lag")
    series = np.concatenate([bundle.normalized[:res.autonomous.start_step],
                             res.autonomous.predictions])
    lag = int(lag) if lag is not None and int(lag) < len(series) else None
    rep = MetricsReport.build(res.autonomous.predictions, res.autonomous.targets, lag, series)
    metrics = rep.to_dict()
    metrics.update({"open_loop_rmse": res.open_loop.rmse, "autonomous_rmse": res.autonomous.rmse,
                    "train_mse": res.model.train_mse, "feedback_clamped": res.autonomous.clamped,
                    "train_rows": int(res.open_loop.predictions.size),
                    "autonomous_steps": int(res.autonomous.predictions.size),
                    "backend_fingerprint": res.model.backend_fingerprint})
    _write_json(path("metrics.json"), metrics)
    rep.errors_csv(path("errors.csv"), start_step=res.autonomous.start_step)
    if lag is not None:
        rep.phase_csv(path("phase.csv"))
    if cfg.get("save_states") or cfg["backend"] == "micromag":
        res.states.to_csv(path("states.csv"))
    if cfg["backend"] == "micromag" and cfg["micromag"].get("snapshots"):
        for k, st in enumerate(backend.states()):
            write_snapshot_csv(st, path(f"device{k}_final.csv"))
    _provenance(out, "run", cfg, files, inputs=_inputs_of(cfg),
                extra={"backend": backend.describe()})
    _summary("run", task=cfg["task"], backend=cfg["backend"], open_rmse=res.open_loop.rmse,
             auto_rmse=res.autonomous.rmse, steps=res.autonomous.predictions.size,
             clamped=res.autonomous.clamped, out=out)
    return 0


def cmd_energy(cfg, out):
    model = EnergyModel.from_dict(cfg.get("energy", {}))
    rep = energy_report(model)
    jpath = os.path.join(out, "energy.json")
    tpath = os.path.join(out, "energy.txt")
    write_energy_json(jpath, rep)
    text = format_energy_report(rep)
    with open(tpath, "w") as fh:
        fh.write(text + "\n")
    print(text, file=sys.stderr)
    _provenance(out, "energy", cfg, [jpath, tpath])
    _summary("energy", C_fF=rep["capacitance_F"] * 1e15, dV_V=rep["write_voltage_V"],
             write_fJ=rep["write_energy_J"] * 1e15, period_fJ=rep["per_period_J"] * 1e15,
             prediction_fJ=rep["per_prediction_per_device_J"] * 1e15,
             total_fJ=rep["total_J"] * 1e15, file=jpath)
    return 0


def cmd_sweep(cfg, out):
    sw = cfg.get("sweep", {})
    lams = [float(v) for v in sw.get("lambdas", [1e-10, 1e-8, 1e-6, 1e-4, 1e-2, 1.0])]
    depths = [int(v) for v in sw.get("delays", [cfg["features"]["delay_depth"]])]
    grid = [(d, lam) for d in depths for lam in lams]

    def one(item):
        d, lam = item
        c = C.merge(cfg, {"lambda": lam, "features": {"delay_depth": d}})
        try:
            _, _, res = _run_once(c, out, write=False)
            return d, lam, res.open_loop.rmse, res.autonomous.rmse, ""
        except SpinresError as exc:
            return d, lam, float("nan"), float("nan"), type(exc).__name__ + ": " + str(exc)

    jobs = max(1, int(cfg.get("jobs", 1)))
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(one, grid))
    else:
        rows = [one(g) for g in grid]
    path = os.path.join(out, "sweep.csv")
    with open(path, "w") as fh:
        fh.write("delay_depth,lambda,open_loop_rmse,autonomous_rmse,error\n")
        for d, lam, o, a, e in rows:
            fh.write(f"{d},{lam!r},{o!r},{a!r},\"{e}\"\n")
    _provenance(out, "sweep", cfg, [path], inputs=_inputs_of(cfg))
    finite = [r for r in rows if np.isfinite(r[3])]
    best = min(finite, key=lambda r: r[3]) if finite else (None, None, None, float("nan"), "")
    _summary("sweep", points=len(rows), best_d=best[0], best_lambda=best[1],
             best_auto_rmse=best[3], file=path)
    return 0


COMMANDS = {
    "gen-mg": (cmd_gen_mg, "generate the Mackey-Glass series"),
    "prepare-household": (cmd_prepare_household, "hourly windowed household load series"),
    "run": (cmd_run, "train the readout and forecast autonomously"),
    "energy": (cmd_energy, "write/read energy estimate"),
    "sweep": (cmd_sweep, "ladder over lambda and delay depth"),
}


def build_parser():
    parser = argparse.ArgumentParser(prog="spinres", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_) in COMMANDS.items():
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="JSON run configuration")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config entry (dotted key, JSON value); repeatable")
        p.add_argument("--out", default="spinres-out", help="output directory")
        p.add_argument("--seed", type=int, help="seed for the surrogate weights")
        p.add_argument("--jobs", type=int, help="worker count bound")
        p.add_argument("-v", "--verbose", action="store_true")
        if name == "energy":
            p.add_argument("--preset", choices=sorted(C.ENERGY_PRESETS), default="paper")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        file_cfg = C.load_json(args.config) if args.config else {}
        cfg = C.resolve(file_cfg, args.set, args.seed, args.jobs,
                        energy_preset=getattr(args, "preset", None))
        os.makedirs(args.out, exist_ok=True)
        return COMMANDS[args.command][0](cfg, args.out)
    except SpinresError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
