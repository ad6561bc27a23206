"""Reservoir backends: voltage-pulsed skyrmion devices and a fast surrogate.

Both backends expose the same stepping interface (:class:`Backend`), so the
learner can warm a reservoir up and run it in closed loop without knowing
which one it drives.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import BlowupError, ConfigError, DataError, SizingError
from .micromag import DEFAULT_DT, DeviceGeometry, Integrator, MagState, MaterialParams

log = logging.getLogger(__name__)


# --------------------------------------------------------------------------- protocol / input map

@dataclass(frozen=True)
class DriveProtocol:
    pulse_duration: float = 2e-9
    relax_duration: float = 16e-9
    node_interval: float = 3e-9
    nodes_per_period: int = 6

    def __post_init__(self):
        if not self.node_interval > 0:
            raise ConfigError(f"node_interval must be > 0, got {self.node_interval}")
        if self.pulse_duration < 0 or self.relax_duration < 0:
            raise ConfigError("pulse and relax durations must be >= 0")
        if int(self.nodes_per_period) != self.nodes_per_period or self.nodes_per_period < 1:
            raise ConfigError(f"nodes_per_period must be a positive integer, "
                              f"got {self.nodes_per_period}")
        span = self.nodes_per_period * self.node_interval
        if abs(span - self.period) > 1e-9 * self.period:
            raise ConfigError(f"N*theta = {span:g} s must equal pulse + relax = {self.period:g} s")

    @property
    def period(self):
        return self.pulse_duration + self.relax_duration

    def sample_times(self):
        return [k * self.node_interval for k in range(1, int(self.nodes_per_period) + 1)]

    def to_dict(self):
        return dataclasses.asdict(self)


@dataclass
class InputMap:
    """Linear input-to-anisotropy map; the upper end of the range lowers Ku most.

    Out-of-range inputs are clamped; ``clamped`` counts how often.
    """

    ku_baseline: float = 7.5e5
    ku_max_reduction: float = 7.5e3
    input_range: tuple = (-1.0, 1.0)
    clamped: int = field(default=0, compare=False)

    def __post_init__(self):
        lo, hi = map(float, self.input_range)
        self.input_range = (lo, hi)
        if not 0 < self.ku_max_reduction < self.ku_baseline:
            raise ConfigError("InputMap requires 0 < ku_max_reduction < ku_baseline")
        if not lo < hi:
            raise ConfigError(f"input_range must satisfy lo < hi, got {self.input_range}")

    def clamp(self, u):
        lo, hi = self.input_range
        if u < lo or u > hi or u != u:
            self.clamped += 1
            if self.clamped == 1 or self.clamped % 100 == 0:
                log.warning("input %r outside %s clamped (%d so far)", u, self.input_range,
                            self.clamped)
            return lo if not u > lo else min(u, hi)
        return u

    def to_dict(self):
        return {"ku_baseline": self.ku_baseline, "ku_max_reduction": self.ku_max_reduction,
                "input_range": list(self.input_range)}


def map_input_to_ku(u: float, imap: InputMap) -> float:
    lo, hi = imap.input_range
    u = imap.clamp(float(u))
    return imap.ku_baseline - imap.ku_max_reduction * (u - lo) / (hi - lo)


# --------------------------------------------------------------------------- state matrix

@dataclass(frozen=True)
class StateMatrix:
    """Virtual-node states: one row per input step, one column per device node."""

    values: np.ndarray
    inputs: np.ndarray
    devices: int
    nodes: int

    def __post_init__(self):
        v = np.array(self.values, dtype=float, copy=True).reshape(-1, self.devices * self.nodes)
        u = np.array(self.inputs, dtype=float, copy=True).reshape(-1)
        if v.shape[0] != u.shape[0]:
            raise SizingError(f"{v.shape[0]} state rows but {u.shape[0]} inputs")
        v.setflags(write=False)
        u.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "inputs", u)

    @property
    def shape(self):
        return self.values.shape

    def __len__(self):
        return self.values.shape[0]

    @property
    def columns(self):
        return [f"d{k}_n{i}" for k in range(self.devices) for i in range(self.nodes)]

    @classmethod
    def hstack(cls, parts):
        if not parts:
            raise SizingError("need at least one state matrix")
        u = parts[0].inputs
        nodes = parts[0].nodes
        for p in parts[1:]:
            if p.nodes != nodes or not np.array_equal(p.inputs, u):
                raise SizingError("state matrices disagree on inputs or node count")
        vals = np.hstack([p.values for p in parts]) if len(u) else np.zeros((0, 0))
        return cls(vals, u, sum(p.devices for p in parts), nodes)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["step", "input"] + self.columns)
            for n, (u, row) in enumerate(zip(self.inputs, self.values)):
                w.writerow([n, repr(float(u))] + [repr(float(v)) for v in row])

    @classmethod
    def from_csv(cls, path):
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if not header or header[:2] != ["step", "input"]:
                raise DataError(f"{path}: header must start with step,input")
            cols = header[2:]
            try:
                pairs = [tuple(int(p[1:]) for p in c.split("_")) for c in cols]
            except ValueError as exc:
                raise DataError(f"{path}: bad column names {cols[:3]}") from exc
            devices = 1 + max((d for d, _ in pairs), default=-1)
            nodes = 1 + max((i for _, i in pairs), default=-1)
            if devices * nodes != len(cols):
                raise DataError(f"{path}: columns do not form a device x node grid")
            u, rows = [], []
            for line, rec in enumerate(reader, start=2):
                if len(rec) != len(header):
                    raise DataError(f"{path}:{line}: expected {len(header)} fields, got {len(rec)}")
                try:
                    u.append(float(rec[1]))
                    rows.append([float(v) for v in rec[2:]])
                except ValueError as exc:
                    raise DataError(f"{path}:{line}: non-numeric field") from exc
        vals = np.array(rows).reshape(-1, devices * nodes)
        return cls(vals, np.array(u), devices, nodes)


# --------------------------------------------------------------------------- micromagnetic backend

class Device:
    """One skyrmion device: carries its magnetization between inputs."""

    def __init__(self, geometry: DeviceGeometry, state: MagState, params: MaterialParams,
                 protocol: DriveProtocol = DriveProtocol(), imap: InputMap | None = None,
                 dt: float = DEFAULT_DT, region: str = "inner"):
        self.geometry = geometry
        self.params = params
        self.protocol = protocol
        self.imap = imap if imap is not None else InputMap(ku_baseline=params.uniaxial_anisotropy)
        self.region = region
        self.initial = state.copy()
        self.dt = dt
        self._schedule = self._build_schedule()
        self.reset()

    def _build_schedule(self):
        p = self.protocol
        integ = Integrator(self.initial, self.params, self.dt)
        marks = sorted(set([p.pulse_duration] + p.sample_times()))
        sched = []
        t = 0.0
        for m in marks:
            if m > t:
                sched.append((integ.n_steps(m - t), m <= p.pulse_duration + 1e-18, None))
            if m in p.sample_times():
                sched.append((0, False, "sample"))
            t = m
        return sched

    def reset(self):
        self.integ = Integrator(self.initial, self.params, self.dt)
        self.n_inputs = 0

    def step(self, u) -> np.ndarray:
        ku_pulse = map_input_to_ku(u, self.imap)
        ku_base = self.imap.ku_baseline
        row = []
        try:
            for n, in_pulse, tag in self._schedule:
                if tag == "sample":
                    row.append(self.integ.avg_mz(self.region))
                else:
                    self.integ.steps(n, ku_pulse if in_pulse else ku_base)
        except BlowupError as exc:
            exc.input_index = self.n_inputs
            raise
        self.n_inputs += 1
        return np.array(row)

    def state(self) -> MagState:
        return self.integ.state()


def drive_device(state: MagState, inputs, protocol: DriveProtocol, imap: InputMap,
                 params: MaterialParams, geometry: DeviceGeometry | None = None,
                 dt: float = DEFAULT_DT):
    """Drive one device with ``inputs``; returns (StateMatrix, final MagState)."""
    inputs = np.asarray(inputs, dtype=float).reshape(-1)
    dev = Device(geometry, state, params, protocol, imap, dt)
    rows = [dev.step(u) for u in inputs]
    vals = np.array(rows).reshape(len(inputs), int(protocol.nodes_per_period))
    return StateMatrix(vals, inputs, 1, int(protocol.nodes_per_period)), dev.state()


def drive_ensemble(devices, inputs, protocol: DriveProtocol, imap: InputMap,
                   params: MaterialParams, jobs: int = 1, dt: float = DEFAULT_DT) -> StateMatrix:
    """Drive every ``(geometry, state)`` pair with the same inputs; columns concatenate."""
    if not devices:
        raise ConfigError("drive_ensemble needs at least one device")

    def one(item):
        geom, st = item
        local = dataclasses.replace(imap, clamped=0)
        return drive_device(st, inputs, protocol, local, params, geom, dt)[0]

    if jobs > 1 and len(devices) > 1:
        with ThreadPoolExecutor(max_workers=min(jobs, len(devices))) as pool:
            parts = list(pool.map(one, devices))
    else:
        parts = [one(d) for d in devices]
    return StateMatrix.hstack(parts)


# --------------------------------------------------------------------------- surrogate backend

ACTIVATIONS = {"linear": lambda x: x, "tanh": np.tanh}


@dataclass(frozen=True)
class SurrogateConfig:
    """Virtual-node surrogate r' = f(P r + q u + bias).

    Ring mode: P = a I + b S with S the cyclic shift (node i listens to
    node i-1) and q = c. Dense mode: P and q are drawn from ``seed``
    (zero mean, ``weight_std``) and P is rescaled to ``spectral_radius``,
    unless given explicitly. ``bias`` is an optional per-node offset.
    """

    node_count: int = 6
    topology: str = "ring"
    self_weight: float = 0.5
    neighbor_weight: float = 0.4
    input_weight: float = 0.9
    activation: str = "linear"
    bias: tuple = ()
    coupling: tuple | None = None
    input_weights: tuple | None = None
    weight_std: float = 0.5
    spectral_radius: float = 0.9
    seed: int = 0

    def __post_init__(self):
        n = self.node_count
        if int(n) != n or n < 1:
            raise ConfigError(f"node_count must be a positive integer, got {n}")
        if self.topology not in ("ring", "dense"):
            raise ConfigError(f"unknown topology {self.topology!r}")
        if self.activation not in ACTIVATIONS:
            raise ConfigError(f"unknown activation {self.activation!r}")
        if self.topology == "ring":
            if self.self_weight < 0 or self.neighbor_weight < 0:
                raise ConfigError("ring weights a and b must be >= 0")
            if not self.self_weight + self.neighbor_weight < 1:
                raise ConfigError(f"ring mode needs a + b < 1 for fading memory, got "
                                  f"{self.self_weight + self.neighbor_weight:g}")
        else:
            if not 0 < self.spectral_radius < 1:
                raise ConfigError("spectral_radius must lie in (0, 1)")
            if not self.weight_std > 0:
                raise ConfigError("weight_std must be > 0")
        if self.bias and len(self.bias) != n:
            raise ConfigError(f"bias must have {n} entries, got {len(self.bias)}")
        object.__setattr__(self, "bias", tuple(float(v) for v in self.bias))
        for name in ("coupling", "input_weights"):
            v = getattr(self, name)
            if v is not None:
                object.__setattr__(self, name, tuple(np.asarray(v, float).ravel().tolist()))

    def matrices(self):
        """Return (P, q, bias) as arrays."""
        n = int(self.node_count)
        bias = np.array(self.bias) if self.bias else np.zeros(n)
        if self.topology == "ring":
            p = self.self_weight * np.eye(n) + self.neighbor_weight * np.roll(np.eye(n), 1, axis=0)
            return p, np.full(n, self.input_weight), bias
        rng = np.random.default_rng(self.seed)
        if self.coupling is not None:
            p = np.array(self.coupling).reshape(n, n)
        else:
            p = rng.normal(0.0, self.weight_std, (n, n))
            rad = max(abs(np.linalg.eigvals(p)))
            if rad > 0:
                p *= self.spectral_radius / rad
        if self.input_weights is not None:
            q = np.array(self.input_weights).reshape(n)
        else:
            q = rng.normal(0.0, self.weight_std, n)
        return p, q, bias

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def to_dict(self):
        d = dataclasses.asdict(self)
        for k in ("bias", "coupling", "input_weights"):
            if d[k] is not None:
                d[k] = list(d[k])
        return d

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown SurrogateConfig keys: {sorted(unknown)}")
        return cls(**d)


def surrogate_step(r, u, cfg: SurrogateConfig, _cache=None):
    p, q, bias = cfg.matrices() if _cache is None else _cache
    return ACTIVATIONS[cfg.activation](p @ np.asarray(r, float) + q * float(u) + bias)


def surrogate_ensemble(devices: int = 3, base: SurrogateConfig = SurrogateConfig(),
                       jitter: float = 0.1, bias_scale: float = 0.0, seed: int = 0):
    """Per-device configs: ring weights jittered by up to +-``jitter`` (relative)
    and, if ``bias_scale`` > 0, per-node biases drawn from U(-bias_scale, bias_scale).

    Device 0 with zero jitter reproduces ``base`` exactly.
    """
    if devices < 1:
        raise ConfigError("need at least one surrogate device")
    if not 0 <= jitter < 1:
        raise ConfigError(f"jitter must lie in [0, 1), got {jitter}")
    out = []
    for k in range(devices):
        rng = np.random.default_rng([int(seed), k])
        s = 1.0 + jitter * rng.uniform(-1.0, 1.0, 3)
        changes = {"seed": int(seed) * 1000 + k}
        if base.topology == "ring":
            a, b = base.self_weight * s[0], base.neighbor_weight * s[1]
            if a + b >= 1:
                shrink = 0.999 / (a + b)
                a, b = a * shrink, b * shrink
            changes.update(self_weight=a, neighbor_weight=b, input_weight=base.input_weight * s[2])
        if bias_scale > 0:
            changes["bias"] = tuple(rng.uniform(-bias_scale, bias_scale, int(base.node_count)))
        out.append(base.replace(**changes))
    return out


def drive_surrogate(cfgs, inputs) -> StateMatrix:
    """Iterate each surrogate from r = 0 and record r after every input."""
    if isinstance(cfgs, SurrogateConfig):
        cfgs = [cfgs]
    backend = SurrogateBackend(cfgs)
    inputs = np.asarray(inputs, dtype=float).reshape(-1)
    return backend.run(inputs)


# --------------------------------------------------------------------------- backend interface

class Backend:
    """Stateful reservoir: ``step(u)`` advances one input period and returns
    the node row (devices * nodes values)."""

    devices: int
    nodes: int

    def reset(self):
        raise NotImplementedError

    def step(self, u) -> np.ndarray:
        raise NotImplementedError

    def describe(self) -> dict:
        raise NotImplementedError

    @property
    def width(self):
        return self.devices * self.nodes

    @property
    def clamped(self):
        return 0

    def run(self, inputs) -> StateMatrix:
        inputs = np.asarray(inputs, dtype=float).reshape(-1)
        rows = [self.step(u) for u in inputs]
        vals = np.array(rows).reshape(len(inputs), self.width)
        return StateMatrix(vals, inputs, self.devices, self.nodes)

    def fingerprint(self) -> str:
        blob = json.dumps(self.describe(), sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


class SurrogateBackend(Backend):
    def __init__(self, cfgs, input_range=(-1.0, 1.0)):
        if isinstance(cfgs, SurrogateConfig):
            cfgs = [cfgs]
        if not cfgs:
            raise ConfigError("need at least one surrogate device")
        nodes = {int(c.node_count) for c in cfgs}
        if len(nodes) != 1:
            raise ConfigError("all surrogate devices must share node_count")
        self.cfgs = list(cfgs)
        self.devices = len(cfgs)
        self.nodes = nodes.pop()
        self._mats = [c.matrices() for c in self.cfgs]
        self._imap = InputMap(input_range=input_range)
        self.reset()

    def reset(self):
        self.r = [np.zeros(self.nodes) for _ in self.cfgs]
        self._imap.clamped = 0

    @property
    def clamped(self):
        return self._imap.clamped

    def step(self, u):
        u = self._imap.clamp(float(u))
        self.r = [surrogate_step(r, u, c, m) for r, c, m in zip(self.r, self.cfgs, self._mats)]
        return np.concatenate(self.r)

    def describe(self):
        return {"backend": "surrogate", "devices": [c.to_dict() for c in self.cfgs]}


class MicromagBackend(Backend):
    """Ensemble of skyrmion devices sharing one protocol and input map.

    ``devices`` is a list of (geometry, relaxed state); ``params`` is either
    one MaterialParams or one per device.
    """

    def __init__(self, devices, params, protocol: DriveProtocol = DriveProtocol(),
                 imap: InputMap | None = None, dt: float = DEFAULT_DT, jobs: int = 1):
        if not devices:
            raise ConfigError("need at least one micromagnetic device")
        plist = params if isinstance(params, (list, tuple)) else [params] * len(devices)
        if len(plist) != len(devices):
            raise ConfigError("params list length must match the device count")
        base = imap if imap is not None else InputMap(ku_baseline=plist[0].uniaxial_anisotropy)
        self._devs = [Device(g, s, p, protocol, dataclasses.replace(base, clamped=0), dt)
                      for (g, s), p in zip(devices, plist)]
        self.protocol = protocol
        self.devices = len(devices)
        self.nodes = int(protocol.nodes_per_period)
        self.jobs = max(1, int(jobs))
        self._pool = None

    def reset(self):
        for d in self._devs:
            d.reset()
            d.imap.clamped = 0

    @property
    def clamped(self):
        return self._devs[0].imap.clamped

    def step(self, u):
        if self.jobs > 1 and self.devices > 1:
            if self._pool is None:
                self._pool = ThreadPoolExecutor(max_workers=min(self.jobs, self.devices))
            rows = list(self._pool.map(lambda d: d.step(u), self._devs))
        else:
            rows = [d.step(u) for d in self._devs]
        return np.concatenate(rows)

    def states(self):
        return [d.state() for d in self._devs]

    def describe(self):
        return {"backend": "micromag", "protocol": self.protocol.to_dict(),
                "input_map": self._devs[0].imap.to_dict(), "dt": self._devs[0].dt,
                "devices": [{"geometry": d.geometry.to_dict() if d.geometry else None,
                             "params": d.params.to_dict(),
                             "state_sha": hashlib.sha256(d.initial.m.tobytes()).hexdigest()[:16]}
                            for d in self._devs]}

    def close(self):
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None
