"""Material constants, device geometry and the magnetization state container."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError

MU0 = 4e-7 * np.pi

DEMAG_MODES = ("thin-film", "none")
BOUNDARY_MODES = ("dmi", "neumann")


@dataclass(frozen=True)
class MaterialParams:
    """Free-layer material constants (SI units).

    Defaults are the CoFeB-like free layer used for the skyrmion devices.
    ``demag_mode``, ``boundary`` and ``applied_field`` are solver options
    rather than material constants, but every field kernel needs them, so
    they travel together.
    """

    dmi_constant: float = 6e-4  # J/m^2
    gilbert_damping: float = 0.015
    saturation_magnetization: float = 1e6  # A/m
    exchange_constant: float = 2e-11  # J/m
    uniaxial_anisotropy: float = 7.5e5  # J/m^3
    anisotropy_axis: tuple = (0.0, 0.0, 1.0)
    gyromagnetic_ratio: float = 2.211e5  # m/(A s)
    demag_mode: str = "thin-film"
    boundary: str = "dmi"
    applied_field: tuple = (0.0, 0.0, 0.0)  # A/m

    def __post_init__(self):
        u = tuple(float(c) for c in self.anisotropy_axis)
        h = tuple(float(c) for c in self.applied_field)
        object.__setattr__(self, "anisotropy_axis", u)
        object.__setattr__(self, "applied_field", h)
        if len(u) != 3 or len(h) != 3:
            raise ConfigError("anisotropy_axis and applied_field must be 3-vectors")
        if self.dmi_constant < 0:
            raise ConfigError(f"dmi_constant must be >= 0, got {self.dmi_constant}")
        if not 0 < self.gilbert_damping < 1:
            raise ConfigError(f"gilbert_damping must lie in (0, 1), got {self.gilbert_damping}")
        for name in ("saturation_magnetization", "exchange_constant",
                     "uniaxial_anisotropy", "gyromagnetic_ratio"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be > 0, got {getattr(self, name)}")
        if abs(np.linalg.norm(u) - 1.0) > 1e-12:
            raise ConfigError(f"anisotropy_axis must be a unit vector, |u| = {np.linalg.norm(u)!r}")
        if self.demag_mode not in DEMAG_MODES:
            raise ConfigError(f"unknown demag mode {self.demag_mode!r}; expected one of {DEMAG_MODES}")
        if self.boundary not in BOUNDARY_MODES:
            raise ConfigError(f"unknown boundary mode {self.boundary!r}; expected one of {BOUNDARY_MODES}")

    @property
    def ms(self):
        return self.saturation_magnetization

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def to_dict(self):
        d = dataclasses.asdict(self)
        d["anisotropy_axis"] = list(self.anisotropy_axis)
        d["applied_field"] = list(self.applied_field)
        return d

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown MaterialParams keys: {sorted(unknown)}")
        return cls(**d)


def _cells(length, step, what):
    n = length / step
    k = int(round(n))
    if k < 0 or abs(n - k) > 1e-6:
        raise ConfigError(f"{what} = {length!r} m is not an integer multiple of the cell size {step!r} m")
    return k


@dataclass(frozen=True)
class DeviceGeometry:
    """Square free layer with an etched moat around a centered inner block.

    Cells inside the moat ring are nonmagnetic. The outer frame (between
    the moat and the film edge) stays magnetic.
    """

    side_length: float
    moat_width: float = 16e-9
    inner_block_side: float = 200e-9
    cell_size: tuple = (2e-9, 2e-9, 1e-9)
    film_thickness: float = 1e-9

    def __post_init__(self):
        cs = tuple(float(c) for c in self.cell_size)
        object.__setattr__(self, "cell_size", cs)
        if len(cs) != 3 or min(cs) <= 0:
            raise ConfigError(f"cell_size must be three positive lengths, got {cs}")
        if self.cell_size[0] != self.cell_size[1]:
            # the square-device cell counts below assume square cells
            raise ConfigError("in-plane cell size must be square")
        if self.inner_block_side + 2 * self.moat_width > self.side_length * (1 + 1e-12):
            raise ConfigError("inner_block_side + 2*moat_width exceeds side_length")
        if self.inner_block_side <= 0 or self.moat_width < 0:
            raise ConfigError("inner_block_side must be > 0 and moat_width >= 0")
        if _cells(self.film_thickness, cs[2], "film_thickness") != 1:
            raise ConfigError("only single-layer films are supported (film_thickness == cell_size[2])")
        # validates divisibility eagerly
        self.cell_counts()

    def cell_counts(self):
        """(film, inner block, moat) widths in cells."""
        dx = self.cell_size[0]
        return (_cells(self.side_length, dx, "side_length"),
                _cells(self.inner_block_side, dx, "inner_block_side"),
                _cells(self.moat_width, dx, "moat_width"))

    @property
    def shape(self):
        n = self.cell_counts()[0]
        return (n, n)

    def inner_slice(self):
        n, nb, _ = self.cell_counts()
        lo = (n - nb) // 2
        return slice(lo, lo + nb)

    def masks(self):
        """Return ``(magnetic, inner)`` boolean masks of shape ``self.shape``."""
        n, nb, nm = self.cell_counts()
        lo = (n - nb) // 2
        hi = lo + nb
        idx = np.arange(n)
        in_block = (idx >= lo) & (idx < hi)
        in_ring = (idx >= lo - nm) & (idx < hi + nm)
        inner = in_block[:, None] & in_block[None, :]
        ring = (in_ring[:, None] & in_ring[None, :]) & ~inner
        return ~ring, inner

    def inner_center(self):
        """Center of the inner block in cell-index coordinates."""
        s = self.inner_slice()
        c = 0.5 * (s.start + s.stop - 1)
        return c, c

    def to_dict(self):
        d = dataclasses.asdict(self)
        d["cell_size"] = list(self.cell_size)
        return d

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown DeviceGeometry keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class MagState:
    """Unit magnetization on a 2-D grid.

    ``m`` has shape (nx, ny, 3) and is held at zero on cells where
    ``mask`` is False. ``inner`` marks the readout region (the MTJ
    footprint); it defaults to every magnetic cell.
    """

    m: np.ndarray
    mask: np.ndarray
    cell_size: tuple
    time: float = 0.0
    inner: np.ndarray = None
    _lattice: object = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.m = np.ascontiguousarray(self.m, dtype=np.float64)
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.m.ndim != 3 or self.m.shape[2] != 3 or self.m.shape[:2] != self.mask.shape:
            raise ConfigError(f"m must have shape (nx, ny, 3) matching mask, got {self.m.shape} "
                              f"and {self.mask.shape}")
        if self.inner is None:
            self.inner = self.mask.copy()
        else:
            self.inner = np.asarray(self.inner, dtype=bool)
        self.cell_size = tuple(float(c) for c in self.cell_size)
        self.m[~self.mask] = 0.0

    @property
    def shape(self):
        return self.mask.shape

    def copy(self):
        return MagState(self.m.copy(), self.mask, self.cell_size, self.time,
                        self.inner, _lattice=self._lattice)

    def with_m(self, m, time=None):
        return MagState(m, self.mask, self.cell_size, self.time if time is None else time,
                        self.inner, _lattice=self._lattice)

    def norm_error(self):
        """Largest ||m| - 1| over magnetic cells."""
        if not self.mask.any():
            return 0.0
        return float(np.max(np.abs(np.linalg.norm(self.m[self.mask], axis=-1) - 1.0)))

    @classmethod
    def uniform(cls, mask, cell_size, direction=(0.0, 0.0, 1.0), inner=None):
        d = np.asarray(direction, dtype=float)
        d = d / np.linalg.norm(d)
        m = np.zeros(mask.shape + (3,))
        m[mask] = d
        return cls(m, mask, cell_size, inner=inner)
