"""Fixed-step RK4 integration of the Landau-Lifshitz-Gilbert equation.

    (1 + a^2) dm/dt = -g m x H - a g m x (m x H)

Each step is followed by a per-cell renormalization of |m|.
"""

from __future__ import annotations

import math

import numpy as np

from ..errors import BlowupError, ConfigError
from . import _kernels as K
from .params import MU0, MagState, MaterialParams

DT_MAX = 0.25e-12
# divides 2 ns and 3 ns exactly and keeps the exchange modes of 2 nm cells stable
DEFAULT_DT = 1e-12 / 6

_RK4_IMAG_LIMIT = 2.8


def lattice_of(state: MagState) -> K.Lattice:
    lat = state._lattice
    if lat is None or lat.shape != state.mask.shape:
        lat = K.Lattice(state.mask)
        state._lattice = lat
    return lat


def stable_dt(params: MaterialParams, cell_size, ku_now, lattice=None) -> float:
    """Conservative RK4 step limit from the largest precession frequency."""
    c = K.coefficients(params, cell_size, ku_now)
    has_x = has_y = True
    if lattice is not None:
        has_x = bool((lattice.nbr[0] >= 0).any())
        has_y = bool((lattice.nbr[2] >= 0).any())
    h = abs(c[K.C_AN]) + c[K.C_DEMAG] + float(np.linalg.norm(params.applied_field))
    h += 4.0 * c[K.C_EX_X] * has_x + 4.0 * c[K.C_EX_Y] * has_y
    h += 2.0 * (c[K.C_DMI_X] + c[K.C_DMI_Y])
    # ghost self-terms, bounded by D^2 / (A mu0 Ms) per boundary pair
    if params.boundary == "dmi":
        h += 2.0 * params.dmi_constant**2 / (params.exchange_constant * MU0 * params.ms)
    omega = params.gyromagnetic_ratio * h
    return _RK4_IMAG_LIMIT / omega if omega > 0 else math.inf


def check_finite(state: MagState):
    bad = ~np.isfinite(state.m).all(axis=-1) & state.mask
    if bad.any():
        cell = tuple(int(v) for v in np.argwhere(bad)[0])
        raise BlowupError(f"non-finite magnetization at cell {cell}", cell=cell)


class Integrator:
    """Holds a state in compact form for long runs at piecewise-constant Ku.

    ``precess=False`` drops the precession term (overdamped relaxation);
    ``damping`` overrides the Gilbert damping for that purpose.
    """

    def __init__(self, state: MagState, params: MaterialParams, dt: float = DEFAULT_DT,
                 precess: bool = True, damping: float | None = None):
        if not dt > 0:
            raise ConfigError(f"dt must be > 0, got {dt}")
        if dt > DT_MAX * (1 + 1e-12):
            raise ConfigError(f"dt = {dt:g} s exceeds dt_max = {DT_MAX:g} s")
        check_finite(state)
        self.params = params
        self.dt = float(dt)
        self.precess = precess
        self.damping = damping
        self.lattice = lattice_of(state)
        self._template = state
        self.m = self.lattice.pack(state.m)
        self.time = float(state.time)
        self._bufs = [np.empty_like(self.m) for _ in range(5)]
        self._coef = {}
        self._dt_ok = {}
        inner = state.inner & state.mask
        self._sel = {
            "inner": self.lattice.index[inner].astype(np.int64),
            "full": np.arange(self.lattice.size, dtype=np.int64),
        }

    def coefficients(self, ku_now):
        c = self._coef.get(ku_now)
        if c is None:
            if ku_now < 0:
                raise ConfigError(f"ku_now must be >= 0, got {ku_now}")
            c = K.coefficients(self.params, self._template.cell_size, ku_now,
                               precess=self.precess, damping=self.damping)
            lim = stable_dt(self.params, self._template.cell_size, ku_now, self.lattice)
            if self.dt > lim:
                raise ConfigError(f"dt = {self.dt:g} s exceeds the RK4 stability estimate "
                                  f"{lim:g} s for this grid")
            self._coef[ku_now] = c
        return c

    def steps(self, n, ku_now):
        if n <= 0:
            return
        c = self.coefficients(ku_now)
        done, bad = K.rk4_steps(self.m, self.lattice.nbr, c, self.dt, int(n), *self._bufs)
        self.time += done * self.dt
        if bad >= 0:
            cell = tuple(int(v) for v in self.lattice.cells[bad])
            raise BlowupError(f"non-finite magnetization at cell {cell} "
                              f"(t = {self.time:.6g} s)", cell=cell)

    def n_steps(self, duration):
        n = duration / self.dt
        k = int(round(n))
        if abs(n - k) > 1e-6 * max(1.0, n):
            raise ConfigError(f"duration {duration:g} s is not a multiple of dt = {self.dt:g} s")
        return k

    def advance(self, duration, ku_now):
        self.steps(self.n_steps(duration), ku_now)

    def avg_mz(self, region="inner"):
        sel = self._sel.get(region)
        if sel is None:
            raise ConfigError(f"unknown region {region!r}")
        if sel.size == 0:
            raise ConfigError(f"region {region!r} has no magnetic cells")
        return float(K.mean_mz(self.m, sel))

    def max_torque(self, ku_now):
        return float(K.max_torque(self.m, self.lattice.nbr, self.coefficients(ku_now)))

    def field(self, ku_now):
        h = np.empty_like(self.m)
        K.field(self.m, self.lattice.nbr, self.coefficients(ku_now), h)
        return self.lattice.unpack(h)

    def state(self) -> MagState:
        return self._template.with_m(self.lattice.unpack(self.m), time=self.time)


def llg_step_rk4(state: MagState, params: MaterialParams, ku_now: float,
                 dt: float = DEFAULT_DT) -> MagState:
    """One classical RK4 step; returns a new state with time advanced by ``dt``."""
    integ = Integrator(state, params, dt)
    integ.steps(1, ku_now)
    return integ.state()


def relax(state: MagState, params: MaterialParams, max_time: float, torque_tol: float,
          ku_now: float | None = None, dt: float = DEFAULT_DT, precess: bool = True,
          damping: float | None = None, check_every: int = 100, callback=None):
    """Integrate at constant Ku until max |m x H| / |H| < ``torque_tol``.

    Returns ``(state, converged)``. ``callback(integrator)`` runs at every
    convergence check. With ``precess=False`` the run is an overdamped
    descent whose fixed points are those of the full dynamics.
    """
    if not torque_tol > 0:
        raise ConfigError(f"torque_tol must be > 0, got {torque_tol}")
    if max_time <= 0:
        return state.copy(), False
    ku = params.uniaxial_anisotropy if ku_now is None else ku_now
    integ = Integrator(state, params, dt, precess=precess, damping=damping)
    total = integ.n_steps(max_time) if abs(max_time / dt - round(max_time / dt)) < 1e-6 \
        else int(math.floor(max_time / dt))
    taken = 0
    while True:
        if callback is not None:
            callback(integ)
        if integ.max_torque(ku) < torque_tol:
            return integ.state(), True
        if taken >= total:
            return integ.state(), False
        n = min(check_every, total - taken)
        integ.steps(n, ku)
        taken += n
