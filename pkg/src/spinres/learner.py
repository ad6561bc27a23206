"""Linear readout on delayed reservoir states: features, ridge fit, forecasting."""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .errors import ConfigError, DataError, DivergenceError, SingularMatrixError, SizingError
from .reservoir import Backend, StateMatrix

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class FeatureConfig:
    delay_depth: int = 0
    include_bias: bool = False

    def __post_init__(self):
        if int(self.delay_depth) != self.delay_depth or self.delay_depth < 0:
            raise ConfigError(f"delay_depth must be an integer >= 0, got {self.delay_depth}")

    def width(self, columns):
        return (self.delay_depth + 1) * columns + (1 if self.include_bias else 0)

    def to_dict(self):
        return dataclasses.asdict(self)


def _values(states):
    return states.values if isinstance(states, StateMatrix) else np.asarray(states, dtype=float)


def build_features(states, cfg: FeatureConfig):
    """Design matrix whose row for step n (n >= d) is [R_{n-d}, ..., R_n] (+ 1).

    Returns ``(A, offset)`` with ``offset = d``: row k of A belongs to step
    ``k + d``.
    """
    r = _values(states)
    if r.ndim != 2:
        raise SizingError(f"state matrix must be 2-D, got shape {r.shape}")
    d = int(cfg.delay_depth)
    n = r.shape[0]
    if n <= d:
        raise SizingError(f"need more than d = {d} state rows, got {n}")
    blocks = [r[k:n - d + k] for k in range(d + 1)]
    if cfg.include_bias:
        blocks.append(np.ones((n - d, 1)))
    return np.hstack(blocks), d


def feature_row(window, cfg: FeatureConfig):
    """Single feature row from the last d+1 state rows (oldest first)."""
    row = np.concatenate(list(window))
    return np.append(row, 1.0) if cfg.include_bias else row


@dataclass
class ReadoutModel:
    weights: np.ndarray
    lam: float
    feature_config: FeatureConfig
    columns: int
    normalization: dict = field(default_factory=dict)
    backend_fingerprint: str = ""
    train_mse: float = float("nan")

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float).reshape(-1)
        if self.weights.size != self.feature_config.width(self.columns):
            raise SizingError(f"weight length {self.weights.size} does not match feature width "
                              f"{self.feature_config.width(self.columns)}")

    @property
    def width(self):
        return self.weights.size

    def predict(self, a):
        a = np.asarray(a, dtype=float)
        if a.shape[-1] != self.width:
            raise SizingError(f"feature width {a.shape[-1]} does not match model width "
                              f"{self.width}")
        return a @ self.weights

    def to_dict(self):
        return {"weights": [float(w) for w in self.weights], "lambda": self.lam,
                "delay_depth": self.feature_config.delay_depth,
                "include_bias": self.feature_config.include_bias, "columns": self.columns,
                "normalization": self.normalization,
                "backend_fingerprint": self.backend_fingerprint, "train_mse": self.train_mse}

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            d = json.load(fh)
        try:
            fc = FeatureConfig(d["delay_depth"], d.get("include_bias", False))
            return cls(np.array(d["weights"]), d["lambda"], fc, d["columns"],
                       d.get("normalization", {}), d.get("backend_fingerprint", ""),
                       d.get("train_mse", float("nan")))
        except KeyError as exc:
            raise DataError(f"{path}: missing key {exc}") from exc


def _check_system(a, b, lam):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float).reshape(-1)
    if a.ndim != 2 or a.shape[0] != b.size:
        raise SizingError(f"A has shape {a.shape} but B has {b.size} entries")
    if not lam >= 0:
        raise ConfigError(f"lambda must be >= 0, got {lam}")
    return a, b


def ridge_solve(a, b, lam):
    """w = (A^T A + lam I)^{-1} A^T B by Cholesky on the regularized Gram matrix."""
    a, b = _check_system(a, b, lam)
    g = a.T @ a
    g[np.diag_indices_from(g)] += lam
    rhs = a.T @ b
    try:
        fac = linalg.cho_factor(g, lower=True, check_finite=True)
        w = linalg.cho_solve(fac, rhs)
        diag = np.diag(fac[0])
        # Cholesky succeeds on numerically singular matrices; catch those too
        if diag.min() <= np.finfo(float).eps ** 0.5 * max(diag.max(), 1e-300) * 1e-3:
            raise linalg.LinAlgError("near-singular pivot")
    except linalg.LinAlgError as exc:
        cond = float(np.linalg.cond(g))
        raise SingularMatrixError(f"regularized normal matrix is singular (lambda = {lam:g}, "
                                  f"condition estimate {cond:.3g})", condition=cond) from exc
    return w


def ridge_fit(a, b, lam, feature_config: FeatureConfig | None = None,
              columns: int | None = None) -> ReadoutModel:
    a, b = _check_system(a, b, lam)
    w = ridge_solve(a, b, lam)
    fc = feature_config if feature_config is not None else FeatureConfig(0)
    cols = columns if columns is not None else a.shape[1] - (1 if fc.include_bias else 0)
    mse = float(np.mean((a @ w - b) ** 2))
    return ReadoutModel(w, float(lam), fc, cols, train_mse=mse)


def gradient_descent_fit(a, b, lam, max_iter=200000, tol=1e-12, step=None):
    """Batch gradient descent on ||A w - B||^2 / 2 + lam ||w||^2 / 2.

    The fixed step 1/L (L the largest eigenvalue of A^T A + lam I) makes the
    iteration a contraction towards the ridge solution.
    """
    a, b = _check_system(a, b, lam)
    g = a.T @ a
    g[np.diag_indices_from(g)] += lam
    rhs = a.T @ b
    if step is None:
        step = 1.0 / float(np.linalg.eigvalsh(g)[-1])
    w = np.zeros(a.shape[1])
    for it in range(int(max_iter)):
        grad = g @ w - rhs
        w_new = w - step * grad
        if np.max(np.abs(w_new - w)) <= tol * max(1.0, np.max(np.abs(w_new))):
            return w_new, it + 1
        w = w_new
    return w, int(max_iter)


# --------------------------------------------------------------------------- prediction

@dataclass
class ForecastResult:
    predictions: np.ndarray
    targets: np.ndarray | None
    mode: str
    feedback: np.ndarray | None = None
    start_step: int = 0
    clamped: int = 0

    def __post_init__(self):
        if self.mode not in ("open-loop", "autonomous"):
            raise ConfigError(f"unknown forecast mode {self.mode!r}")
        self.predictions = np.asarray(self.predictions, dtype=float).reshape(-1)
        if self.targets is not None:
            self.targets = np.asarray(self.targets, dtype=float).reshape(-1)
            if self.targets.size != self.predictions.size:
                raise SizingError("predictions and targets differ in length")
        if self.feedback is not None:
            self.feedback = np.asarray(self.feedback, dtype=float).reshape(-1)

    @property
    def per_step_error(self):
        if self.targets is None:
            return None
        return self.predictions - self.targets

    @property
    def rmse(self):
        e = self.per_step_error
        return float(np.sqrt(np.mean(e ** 2))) if e is not None and e.size else float("nan")

    def to_csv(self, path):
        err = self.per_step_error
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["step", "prediction", "target", "error"])
            for k, y in enumerate(self.predictions):
                t = "" if self.targets is None else repr(float(self.targets[k]))
                e = "" if err is None else repr(float(err[k]))
                w.writerow([self.start_step + k, repr(float(y)), t, e])


def predict_open_loop(model: ReadoutModel, states) -> np.ndarray:
    """y_n = w . features(n) for every n >= d (index k of the result is step k + d)."""
    if model.columns != _values(states).shape[1]:
        raise SizingError(f"model expects {model.columns} state columns, got "
                          f"{_values(states).shape[1]}")
    a, _ = build_features(states, model.feature_config)
    return model.predict(a)


def forecast_autonomous(model: ReadoutModel, backend: Backend, warmup_inputs, steps: int,
                        input_range=(-1.0, 1.0), reset: bool = True) -> ForecastResult:
    """Warm the backend up on ``warmup_inputs`` then run ``steps`` closed-loop steps.

    Each prediction is clamped to ``input_range`` (counted) before it is
    fed back; the unclamped value is what is reported.
    """
    warm = np.asarray(warmup_inputs, dtype=float).reshape(-1)
    d = int(model.feature_config.delay_depth)
    if steps < 0:
        raise ConfigError(f"steps must be >= 0, got {steps}")
    if warm.size <= d:
        raise SizingError(f"warm-up length {warm.size} must exceed d = {d}")
    if backend.width != model.columns:
        raise SizingError(f"backend produces {backend.width} columns, model expects "
                          f"{model.columns}")
    if reset:
        backend.reset()
    window = []
    for u in warm:
        window.append(backend.step(u))
        if len(window) > d + 1:
            window.pop(0)
    lo, hi = input_range
    preds, fed = [], []
    clamped = 0
    for k in range(int(steps)):
        y = float(model.predict(feature_row(window, model.feature_config)))
        if not np.isfinite(y):
            raise DivergenceError(f"non-finite prediction at autonomous step {k}", partial=preds)
        preds.append(y)
        if k == steps - 1:
            break
        u = min(max(y, lo), hi)
        if u != y:
            clamped += 1
        fed.append(u)
        window.append(backend.step(u))
        window.pop(0)
    if clamped:
        log.warning("%d autonomous prediction(s) clamped to %s before feedback", clamped,
                    input_range)
    return ForecastResult(np.array(preds), None, "autonomous", feedback=np.array(fed),
                          clamped=clamped)


# --------------------------------------------------------------------------- orchestration

@dataclass
class TaskResult:
    model: ReadoutModel
    open_loop: ForecastResult
    autonomous: ForecastResult
    states: StateMatrix


def train_task(bundle, backend: Backend, feature_config: FeatureConfig, lam: float,
               warmup: str = "full") -> TaskResult:
    """Drive, fit and forecast on a split bundle.

    Training rows are the steps of the train split; the target of step n
    is the next input u_{n+1}. The reservoir is then reset and warmed up on
    every sample before the test block (``warmup="full"``) or only on the
    bridge plus the last d train samples (``warmup="suffix"``), and run
    autonomously for the length of the test block.
    """
    sp = bundle.splits
    if sp is None:
        raise ConfigError("bundle has no splits")
    d = int(feature_config.delay_depth)
    if sp.washout < d:
        raise SizingError(f"washout {sp.washout} is shorter than the delay depth d = {d}")
    if sp.train < 1 or sp.test < 1:
        raise SizingError("train and test splits must be non-empty")
    u = np.asarray(bundle.normalized, dtype=float)
    train_end = sp.washout + sp.train
    if train_end + 1 > len(u):
        raise SizingError("no target left for the last training row")
    backend.reset()
    states = backend.run(u[:train_end])
    a, off = build_features(states, feature_config)
    rows = np.arange(sp.washout, train_end)
    a = a[rows - off]
    b = u[rows + 1]
    model = ridge_fit(a, b, lam, feature_config, backend.width)
    model.normalization = bundle.normalization()
    model.backend_fingerprint = backend.fingerprint()
    open_loop = ForecastResult(model.predict(a), b, "open-loop", start_step=int(rows[0] + 1))

    test0 = sp.test_range.start
    if warmup == "full":
        warm = u[:test0]
    elif warmup == "suffix":
        warm = u[max(0, train_end - d - 1):test0]
    else:
        raise ConfigError(f"unknown warm-up mode {warmup!r}")
    auto = forecast_autonomous(model, backend, warm, sp.test)
    auto.targets = u[test0:test0 + sp.test].copy()
    auto.start_step = test0
    return TaskResult(model, open_loop, auto, states)
