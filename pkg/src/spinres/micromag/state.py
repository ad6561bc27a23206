"""Initial states and scalar diagnostics."""

from __future__ import annotations

import csv

import numpy as np

from ..errors import ConfigError
from .params import DeviceGeometry, MagState, MaterialParams


def device_state(geometry: DeviceGeometry, direction=(0.0, 0.0, 1.0)) -> MagState:
    mask, inner = geometry.masks()
    return MagState.uniform(mask, geometry.cell_size, direction, inner=inner)


def init_skyrmion(geometry: DeviceGeometry, params: MaterialParams, core_radius: float,
                  wall_width: float = 10e-9) -> MagState:
    """Neel skyrmion ansatz centered in the inner block.

    m_z = -1 for r < R - w/2, +1 for r > R + w/2, with the polar angle
    linear across the wall and the in-plane part pointing radially
    outward. That chirality lowers the DMI energy for D > 0.
    ``core_radius = 0`` gives the uniform +z state.
    """
    half_block = geometry.inner_block_side / 2
    if core_radius < 0 or core_radius >= half_block:
        raise ConfigError(f"core_radius must lie in [0, {half_block:g}) m, got {core_radius!r}")
    state = device_state(geometry)
    if core_radius == 0:
        return state
    dx, dy = geometry.cell_size[:2]
    ci, cj = geometry.inner_center()
    nx, ny = geometry.shape
    x = (np.arange(nx) - ci)[:, None] * dx
    y = (np.arange(ny) - cj)[None, :] * dy
    r = np.hypot(x, y)
    h = min(wall_width / 2, core_radius)
    theta = np.clip(np.pi * (core_radius + h - r) / (2 * h), 0.0, np.pi)
    phi = np.arctan2(y + 0 * x, x + 0 * y)
    m = np.stack([np.sin(theta) * np.cos(phi),
                  np.sin(theta) * np.sin(phi),
                  np.cos(theta)], axis=-1)
    m /= np.linalg.norm(m, axis=-1, keepdims=True)
    return state.with_m(np.where(state.mask[..., None], m, 0.0))


def avg_mz(state: MagState, region: str = "inner") -> float:
    """Mean m_z over the magnetic cells of ``region`` ("inner" or "full")."""
    if region == "inner":
        sel = state.inner & state.mask
    elif region == "full":
        sel = state.mask
    else:
        raise ConfigError(f"unknown region {region!r}")
    if not sel.any():
        raise ConfigError(f"region {region!r} contains no magnetic cells")
    return float(state.m[sel, 2].mean())


def _derivative(m, mask, axis):
    """Central difference in cell units; one-sided where a neighbor is missing."""
    fwd = np.zeros_like(m)
    bwd = np.zeros_like(m)
    has_f = np.zeros(mask.shape, bool)
    has_b = np.zeros(mask.shape, bool)
    lo = [slice(None)] * 2
    hi = [slice(None)] * 2
    lo[axis] = slice(None, -1)
    hi[axis] = slice(1, None)
    lo, hi = tuple(lo), tuple(hi)
    fwd[lo] = m[hi]
    has_f[lo] = mask[hi]
    bwd[hi] = m[lo]
    has_b[hi] = mask[lo]
    has_f &= mask
    has_b &= mask
    f = np.where(has_f[..., None], fwd, m)
    b = np.where(has_b[..., None], bwd, m)
    span = has_f.astype(float) + has_b.astype(float)
    span[span == 0] = 1.0
    return (f - b) / span[..., None]


def _solid_angle(a, b, c):
    """Signed solid angle of the spherical triangles (a, b, c), vectorized."""
    num = np.einsum("...k,...k->...", a, np.cross(b, c))
    den = (1.0 + np.einsum("...k,...k->...", a, b) + np.einsum("...k,...k->...", b, c)
           + np.einsum("...k,...k->...", c, a))
    return 2.0 * np.arctan2(num, den)


def topological_charge(state: MagState, region: str = "inner", method: str = "lattice") -> float:
    """Topological charge Q of the texture.

    ``method="lattice"`` sums the signed solid angles spanned by the two
    triangles of every plaquette whose four corners lie in the region, which
    is an exact integer for any texture resolved by the grid.
    ``method="continuum"`` evaluates (1/4 pi) sum m . (d_x m x d_y m) with
    central differences, which undercounts narrow domain walls.

    The default region is the inner block: the DMI boundary condition cants
    the moments along the outer film edges, and that rim carries a spurious
    fractional charge of its own.
    """
    m, mask = state.m, state.mask
    if region == "inner":
        sel = state.inner & mask
    elif region == "full":
        sel = mask
    else:
        raise ConfigError(f"unknown region {region!r}")
    if method == "lattice":
        a, b, c, d = m[:-1, :-1], m[1:, :-1], m[1:, 1:], m[:-1, 1:]
        ok = sel[:-1, :-1] & sel[1:, :-1] & sel[1:, 1:] & sel[:-1, 1:]
        omega = _solid_angle(a, b, c) + _solid_angle(a, c, d)
        return float(omega[ok].sum() / (4 * np.pi))
    if method != "continuum":
        raise ConfigError(f"unknown charge method {method!r}")
    mx = _derivative(m, mask, 0)
    my = _derivative(m, mask, 1)
    dens = np.einsum("ijk,ijk->ij", m, np.cross(mx, my))
    return float(dens[sel].sum() / (4 * np.pi))


def write_snapshot_csv(state: MagState, path):
    """Write (x_index, y_index, mx, my, mz) rows for every magnetic cell."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x_index", "y_index", "mx", "my", "mz"])
        for i, j in np.argwhere(state.mask):
            mx, my, mz = state.m[i, j]
            w.writerow([int(i), int(j), repr(float(mx)), repr(float(my)), repr(float(mz))])


def read_snapshot_csv(path, geometry: DeviceGeometry) -> MagState:
    state = device_state(geometry)
    m = np.zeros_like(state.m)
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            i, j = int(row["x_index"]), int(row["y_index"])
            m[i, j] = float(row["mx"]), float(row["my"]), float(row["mz"])
    return state.with_m(m)
