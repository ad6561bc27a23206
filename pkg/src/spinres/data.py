"""Benchmark series: Mackey-Glass generation and the UCI household power load.

Both series end up in a :class:`SeriesBundle` normalized to [-1, 1] with
contiguous split bookkeeping (washout, train, bridge, test).
"""

from __future__ import annotations

import csv
import dataclasses
import datetime as dt_
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError, NumericalError, SizingError

UCI_HEADER = ("Date;Time;Global_active_power;Global_reactive_power;Voltage;"
              "Global_intensity;Sub_metering_1;Sub_metering_2;Sub_metering_3")
MIN_PRESENT_MINUTES = 30  # >= 50% of an hour

MG_SPLITS = (30, 370, 30)
HOUSEHOLD_SPLITS = (20, 220, 23)


# --------------------------------------------------------------------------- Mackey-Glass

@dataclass(frozen=True)
class MGParams:
    """Mackey-Glass constants and integration settings.

    ``interpolation`` selects how the delayed value is evaluated at RK4
    half steps: "hermite" (cubic, from stored derivatives) or "linear".
    ``transient`` downsampled samples are dropped from the start.
    """

    a: float = 0.2
    b: float = 0.1
    n: float = 10.0
    tau: float = 17.0
    x0: float = 1.2
    dt: float = 0.1
    downsample: int = 10
    n_samples: int = 431
    transient: int = 0
    interpolation: str = "hermite"

    def __post_init__(self):
        if not self.dt > 0:
            raise ConfigError(f"dt must be > 0, got {self.dt}")
        if not self.tau > 0:
            raise ConfigError(f"tau must be > 0, got {self.tau}")
        lag = self.tau / self.dt
        if abs(lag - round(lag)) > 1e-9 * max(1.0, lag):
            raise ConfigError(f"tau/dt must be an integer, got {lag!r}")
        if int(self.downsample) != self.downsample or self.downsample < 1:
            raise ConfigError(f"downsample must be an integer >= 1, got {self.downsample}")
        if self.n_samples < 1 or self.transient < 0:
            raise ConfigError("n_samples must be >= 1 and transient >= 0")
        if self.interpolation not in ("hermite", "linear"):
            raise ConfigError(f"unknown interpolation {self.interpolation!r}")

    @property
    def lag(self):
        return int(round(self.tau / self.dt))

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown MGParams keys: {sorted(unknown)}")
        return cls(**d)


def mg_generate(params: MGParams = MGParams()) -> np.ndarray:
    """Integrate dx/dt = a x(t-tau) / (1 + x(t-tau)^n) - b x(t) with RK4.

    History is x(t) = x0 for t <= 0. The delayed value at a half step is
    interpolated between stored grid points. The Hermite variant uses the
    stored derivatives; on the history interval the left derivative is
    zero (the history is flat), which keeps the kink at t = 0 from
    degrading the order.
    """
    a, b, p = params.a, params.b, params.n
    h = params.dt
    lag = params.lag
    ds = int(params.downsample)
    total = params.n_samples + params.transient
    nsteps = (total - 1) * ds
    hermite = params.interpolation == "hermite"

    def f(x, xd):
        return a * xd / (1.0 + xd ** p) - b * x

    x = np.empty(nsteps + lag + 1)
    x[:lag + 1] = params.x0
    deriv = np.zeros_like(x)
    deriv[lag] = f(params.x0, params.x0)
    for k in range(lag, lag + nsteps):
        j = k - lag
        d0, d1 = x[j], x[j + 1]
        if hermite:
            m1 = 0.0 if j + 1 == lag else deriv[j + 1]
            dh = 0.5 * (d0 + d1) + h / 8.0 * (deriv[j] - m1)
        else:
            dh = 0.5 * (d0 + d1)
        xk = x[k]
        k1 = f(xk, d0)
        k2 = f(xk + 0.5 * h * k1, dh)
        k3 = f(xk + 0.5 * h * k2, dh)
        k4 = f(xk + h * k3, d1)
        xn = xk + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not math.isfinite(xn):
            raise NumericalError(f"Mackey-Glass integration blew up at t = {(j + 1) * h:g}")
        x[k + 1] = xn
        deriv[k + 1] = f(xn, d1)
    out = x[lag::ds]
    return out[params.transient:].copy()


# --------------------------------------------------------------------------- bundles

@dataclass(frozen=True)
class Splits:
    """Contiguous index ranges over a series of ``length`` samples.

    The test block sits at the end of the series. Samples between the end
    of training and the start of the test block (the bridge) are only
    used to warm the reservoir up before forecasting.
    """

    washout: int
    train: int
    test: int
    length: int

    def __post_init__(self):
        if min(self.washout, self.train, self.test) < 0:
            raise SizingError("split sizes must be >= 0")
        if self.washout + self.train + self.test > self.length:
            raise SizingError(f"washout + train + test = {self.washout + self.train + self.test} "
                              f"exceeds series length {self.length}")

    @property
    def washout_range(self):
        return range(0, self.washout)

    @property
    def train_range(self):
        return range(self.washout, self.washout + self.train)

    @property
    def bridge_range(self):
        return range(self.washout + self.train, self.length - self.test)

    @property
    def test_range(self):
        return range(self.length - self.test, self.length)

    def ranges(self):
        return {"washout": self.washout_range, "train": self.train_range,
                "bridge": self.bridge_range, "test": self.test_range}

    def to_dict(self):
        return dataclasses.asdict(self)


@dataclass
class SeriesBundle:
    raw: np.ndarray
    normalized: np.ndarray
    vmin: float
    vmax: float
    lo: float = -1.0
    hi: float = 1.0
    splits: Splits | None = None
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.raw)

    def normalize(self, x):
        x = np.asarray(x, dtype=float)
        return self.lo + (self.hi - self.lo) * (x - self.vmin) / (self.vmax - self.vmin)

    def denormalize(self, y):
        y = np.asarray(y, dtype=float)
        return self.vmin + (self.vmax - self.vmin) * (y - self.lo) / (self.hi - self.lo)

    def normalization(self):
        return {"vmin": self.vmin, "vmax": self.vmax, "lo": self.lo, "hi": self.hi}

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["index", "raw", "normalized"])
            for i, (r, v) in enumerate(zip(self.raw, self.normalized)):
                w.writerow([i, repr(float(r)), repr(float(v))])

    @classmethod
    def from_csv(cls, path, lo=-1.0, hi=1.0):
        raw, norm = [], []
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or not {"raw", "normalized"} <= set(reader.fieldnames):
                raise DataError(f"{path}: expected columns index,raw,normalized")
            for line, row in enumerate(reader, start=2):
                try:
                    raw.append(float(row["raw"]))
                    norm.append(float(row["normalized"]))
                except (TypeError, ValueError) as exc:
                    raise DataError(f"{path}:{line}: malformed row {row}") from exc
        raw = np.array(raw)
        return cls(raw, np.array(norm), float(raw.min()), float(raw.max()), lo, hi)


def normalize_minmax(series, target=(-1.0, 1.0)) -> SeriesBundle:
    """Affine map of the window's min to ``target[0]`` and max to ``target[1]``."""
    x = np.asarray(series, dtype=float)
    lo, hi = map(float, target)
    if x.size == 0:
        raise DataError("cannot normalize an empty series")
    if not np.all(np.isfinite(x)):
        raise DataError("series contains non-finite values")
    if not lo < hi:
        raise ConfigError(f"target range must satisfy lo < hi, got {target}")
    vmin, vmax = float(x.min()), float(x.max())
    if vmax == vmin:
        raise DataError(f"series is constant ({vmin!r}); min-max normalization is degenerate")
    bundle = SeriesBundle(x.copy(), np.empty(0), vmin, vmax, lo, hi)
    norm = bundle.normalize(x)
    # exact endpoints regardless of rounding
    norm[x == vmin] = lo
    norm[x == vmax] = hi
    bundle.normalized = norm
    return bundle


def make_splits(bundle: SeriesBundle, washout: int, train: int, test: int) -> SeriesBundle:
    bundle.splits = Splits(int(washout), int(train), int(test), len(bundle))
    return bundle


# --------------------------------------------------------------------------- household

def _parse_stamp(date, time, where):
    try:
        d, m, y = date.split("/")
        hh, mm, ss = time.split(":")
        return dt_.datetime(int(y), int(m), int(d), int(hh), int(mm), int(ss))
    except ValueError as exc:
        raise DataError(f"{where}: bad date/time {date!r} {time!r}") from exc


def hourly_household(path):
    """Hourly means of Global_active_power (kW) from a UCI-format file.

    Returns ``(start, values, present)`` where ``start`` is the first clock
    hour in the file, ``values[k]`` the mean of the present minutes of hour
    ``start + k`` (NaN when fewer than half are present) and ``present[k]``
    the count of present minutes. Hours with no rows at all are missing.
    """
    sums = {}
    counts = {}
    seen = set()
    with open(path, newline="") as fh:
        header = fh.readline().rstrip("\r\n")
        cols = header.split(";")
        if cols[:3] != ["Date", "Time", "Global_active_power"]:
            raise DataError(f"{path}:1: header must start with Date;Time;Global_active_power, "
                            f"got {header[:60]!r}")
        for line_no, line in enumerate(fh, start=2):
            line = line.rstrip("\r\n")
            if not line:
                continue
            parts = line.split(";")
            if len(parts) < 3:
                raise DataError(f"{path}:{line_no}: expected at least 3 ';'-separated fields, "
                                f"got {len(parts)}")
            stamp = _parse_stamp(parts[0], parts[1], f"{path}:{line_no}")
            hour = stamp.replace(minute=0, second=0)
            seen.add(hour)
            val = parts[2].strip()
            if val in ("", "?"):
                continue
            try:
                v = float(val)
            except ValueError as exc:
                raise DataError(f"{path}:{line_no}: Global_active_power {val!r} is not a number") \
                    from exc
            if not math.isfinite(v):
                raise DataError(f"{path}:{line_no}: non-finite Global_active_power {val!r}")
            sums[hour] = sums.get(hour, 0.0) + v
            counts[hour] = counts.get(hour, 0) + 1
    if not seen:
        raise DataError(f"{path}: no data rows")
    start, end = min(seen), max(seen)
    n = int((end - start).total_seconds() // 3600) + 1
    values = np.full(n, np.nan)
    present = np.zeros(n, dtype=int)
    for hour, c in counts.items():
        k = int((hour - start).total_seconds() // 3600)
        present[k] = c
        if c >= MIN_PRESENT_MINUTES:
            values[k] = sums[hour] / c
    return start, values, present


def first_complete_window(values, length):
    """Index of the first run of ``length`` non-missing hours, or None."""
    ok = np.isfinite(values)
    run = 0
    for k, good in enumerate(ok):
        run = run + 1 if good else 0
        if run >= length:
            return k - length + 1
    return None


def _resolve_start(start, first_hour):
    if start is None or isinstance(start, (int, np.integer)):
        return start
    if isinstance(start, str):
        s = start.strip()
        if s.lstrip("-").isdigit():
            return int(s)
        try:
            when = dt_.datetime.fromisoformat(s)
        except ValueError as exc:
            raise ConfigError(f"window start {start!r} is neither an hour offset nor an "
                              f"ISO timestamp") from exc
    elif isinstance(start, dt_.datetime):
        when = start
    else:
        raise ConfigError(f"unsupported window start {start!r}")
    delta = (when.replace(minute=0, second=0, microsecond=0) - first_hour).total_seconds()
    return int(delta // 3600)


def load_household(path, window=(None, 284), target=(-1.0, 1.0)) -> SeriesBundle:
    """Hourly, windowed and normalized household load.

    ``window = (start, length)``; ``start`` is an hour offset from the
    first hour in the file, an ISO timestamp, or None for the first
    gap-free window of that length.
    """
    start, length = window
    length = int(length)
    if length < 2:
        raise ConfigError(f"window length must be >= 2, got {length}")
    first, values, present = hourly_household(path)
    k0 = _resolve_start(start, first)
    if k0 is None:
        k0 = first_complete_window(values, length)
        if k0 is None:
            raise DataError(f"{path}: no gap-free window of {length} hours")
    if k0 < 0 or k0 + length > len(values):
        raise DataError(f"window [{k0}, {k0 + length}) lies outside the file's "
                        f"{len(values)} hours")
    seg = values[k0:k0 + length]
    bad = np.flatnonzero(~np.isfinite(seg))
    if bad.size:
        names = [(first + dt_.timedelta(hours=int(k0 + i))).strftime("%Y-%m-%d %H:00")
                 for i in bad]
        shown = ", ".join(names[:10]) + (" ..." if len(names) > 10 else "")
        raise DataError(f"window contains {bad.size} missing hour(s): {shown}")
    bundle = normalize_minmax(seg, target)
    t0 = first + dt_.timedelta(hours=int(k0))
    bundle.meta.update({"source": str(path), "window_start": t0.isoformat(),
                        "window_offset": int(k0), "window_length": length,
                        "min_present_minutes": MIN_PRESENT_MINUTES})
    return bundle


def write_uci_file(path, start: dt_.datetime, minute_values):
    """Write minute samples in the UCI format; None or NaN becomes '?'.

    Only Global_active_power carries data; the other columns are filled
    with plausible constants (or '?' alongside a missing power value).
    """
    with open(path, "w", newline="") as fh:
        fh.write(UCI_HEADER + "\n")
        for i, v in enumerate(minute_values):
            t = start + dt_.timedelta(minutes=i)
            stamp = f"{t.day}/{t.month}/{t.year};{t:%H:%M:%S}"
            if v is None or (isinstance(v, float) and math.isnan(v)):
                fh.write(stamp + ";?;?;?;?;?;?;\n")
            else:
                fh.write(f"{stamp};{v!r};0.0;240.0;{v * 4.2:.3f};0.0;0.0;0.0\n")


def synthetic_household(hours=300, seed=0, gap_hours=()):
    """Minute-resolution synthetic load with a daily cycle and noise.

    Returns a list of minute values (None where missing) covering
    ``hours`` hours; every minute of the hours in ``gap_hours`` is missing.
    """
    rng = np.random.default_rng(seed)
    t = np.arange(hours * 60) / 60.0
    base = 1.2 + 0.8 * np.sin(2 * np.pi * (t - 7.0) / 24.0) + 0.3 * np.sin(2 * np.pi * t / 5.3)
    vals = np.round(np.clip(base + 0.2 * rng.standard_normal(t.size), 0.08, None), 3)
    out = [float(v) for v in vals]
    for h in gap_hours:
        for k in range(h * 60, (h + 1) * 60):
            out[k] = None
    return out
