"""Compiled LLG kernels on a compact structure-of-arrays layout.

Only magnetic cells are stored: ``m`` has shape (3, N) and ``nbr`` (4, N)
holds the compact index of the x+, x-, y+, y- neighbor or -1 where the
boundary ghost applies. The stencils are the same as in ``fields``; the
test suite checks the two against each other and against a loop oracle.
"""

from __future__ import annotations

import numba as nb
import numpy as np

from .params import MU0

# no nnan/ninf: the blowup check relies on isfinite
_FM = {"nsz", "arcp", "contract", "afn", "reassoc"}

# coefficient vector layout
C_EX_X, C_EX_Y, C_DMI_X, C_DMI_Y, G_X, G_Y, C_AN, UX, UY, UZ, C_DEMAG, HX, HY, HZ, PREC, DAMP = range(16)
N_COEF = 16


class Lattice:
    """Compact indexing of the magnetic cells of a mask."""

    def __init__(self, mask):
        mask = np.asarray(mask, dtype=bool)
        self.shape = mask.shape
        self.cells = np.argwhere(mask)
        n = len(self.cells)
        index = -np.ones(mask.shape, dtype=np.int64)
        index[mask] = np.arange(n)
        self.index = index
        nx, ny = mask.shape
        i, j = self.cells[:, 0], self.cells[:, 1]
        nbr = -np.ones((4, n), dtype=np.int64)
        for row, (di, dj) in enumerate(((1, 0), (-1, 0), (0, 1), (0, -1))):
            ii, jj = i + di, j + dj
            ok = (ii >= 0) & (ii < nx) & (jj >= 0) & (jj < ny)
            nbr[row, ok] = index[ii[ok], jj[ok]]
        self.nbr = nbr

    @property
    def size(self):
        return len(self.cells)

    def pack(self, m):
        """(nx, ny, 3) grid -> (3, N) compact array."""
        return np.ascontiguousarray(m[self.cells[:, 0], self.cells[:, 1]].T)

    def unpack(self, mc):
        out = np.zeros(self.shape + (3,))
        out[self.cells[:, 0], self.cells[:, 1]] = mc.T
        return out


def coefficients(params, cell_size, ku_now, precess=True, damping=None):
    dx, dy = cell_size[:2]
    ms = params.ms
    a = params.exchange_constant
    d = params.dmi_constant
    alpha = params.gilbert_damping if damping is None else damping
    k = 0.0 if params.boundary == "neumann" else d / (2.0 * a)
    c = np.zeros(N_COEF)
    c[C_EX_X] = 2.0 * a / (MU0 * ms * dx**2)
    c[C_EX_Y] = 2.0 * a / (MU0 * ms * dy**2)
    c[C_DMI_X] = d / (MU0 * ms * dx)
    c[C_DMI_Y] = d / (MU0 * ms * dy)
    c[G_X] = k * dx
    c[G_Y] = k * dy
    c[C_AN] = 2.0 * ku_now / (MU0 * ms)
    c[UX:UZ + 1] = params.anisotropy_axis
    c[C_DEMAG] = ms if params.demag_mode == "thin-film" else 0.0
    c[HX:HZ + 1] = params.applied_field
    gamma = params.gyromagnetic_ratio
    c[PREC] = -gamma / (1.0 + alpha**2) if precess else 0.0
    c[DAMP] = -alpha * gamma / (1.0 + alpha**2)
    return c


@nb.njit(cache=True, fastmath=_FM, inline="always")
def _cell_field(p, mx_, my_, mz_, nbr, c):
    mx = mx_[p]
    my = my_[p]
    mz = mz_[p]
    gx = c[G_X]
    gy = c[G_Y]
    n = nbr[0, p]
    if n >= 0:
        rx, ry, rz = mx_[n], my_[n], mz_[n]
    else:
        rx, ry, rz = mx - gx * mz, my, mz + gx * mx
    n = nbr[1, p]
    if n >= 0:
        lx, ly, lz = mx_[n], my_[n], mz_[n]
    else:
        lx, ly, lz = mx + gx * mz, my, mz - gx * mx
    n = nbr[2, p]
    if n >= 0:
        tx, ty, tz = mx_[n], my_[n], mz_[n]
    else:
        tx, ty, tz = mx, my - gy * mz, mz + gy * my
    n = nbr[3, p]
    if n >= 0:
        bx, by, bz = mx_[n], my_[n], mz_[n]
    else:
        bx, by, bz = mx, my + gy * mz, mz - gy * my
    cex = c[C_EX_X]
    cey = c[C_EX_Y]
    cdx = c[C_DMI_X]
    cdy = c[C_DMI_Y]
    ud = c[UX] * mx + c[UY] * my + c[UZ] * mz
    can = c[C_AN] * ud
    hx = (can * c[UX]
          + cex * (rx + lx - 2.0 * mx) + cey * (tx + bx - 2.0 * mx)
          + cdx * (rz - lz) + c[HX])
    hy = (can * c[UY]
          + cex * (ry + ly - 2.0 * my) + cey * (ty + by - 2.0 * my)
          + cdy * (tz - bz) + c[HY])
    hz = (can * c[UZ] - c[C_DEMAG] * mz
          + cex * (rz + lz - 2.0 * mz) + cey * (tz + bz - 2.0 * mz)
          - cdx * (rx - lx) - cdy * (ty - by) + c[HZ])
    return hx, hy, hz


@nb.njit(cache=True, fastmath=_FM)
def field(m, nbr, c, h):
    mx_, my_, mz_ = m[0], m[1], m[2]
    for p in range(m.shape[1]):
        hx, hy, hz = _cell_field(p, mx_, my_, mz_, nbr, c)
        h[0, p] = hx
        h[1, p] = hy
        h[2, p] = hz


@nb.njit(cache=True, fastmath=_FM)
def rhs(m, nbr, c, out):
    mx_, my_, mz_ = m[0], m[1], m[2]
    pre = c[PREC]
    dmp = c[DAMP]
    for p in range(m.shape[1]):
        hx, hy, hz = _cell_field(p, mx_, my_, mz_, nbr, c)
        mx = mx_[p]
        my = my_[p]
        mz = mz_[p]
        tx = my * hz - mz * hy
        ty = mz * hx - mx * hz
        tz = mx * hy - my * hx
        out[0, p] = pre * tx + dmp * (my * tz - mz * ty)
        out[1, p] = pre * ty + dmp * (mz * tx - mx * tz)
        out[2, p] = pre * tz + dmp * (mx * ty - my * tx)


@nb.njit(cache=True, fastmath=_FM)
def _axpy(m, k, h, out):
    for q in range(3):
        for p in range(m.shape[1]):
            out[q, p] = m[q, p] + h * k[q, p]


@nb.njit(cache=True, fastmath=_FM, nogil=True)
def rk4_steps(m, nbr, c, dt, nsteps, k1, k2, k3, k4, tmp):
    """Advance ``m`` in place by ``nsteps`` RK4 steps with renormalization.

    Returns (steps completed, first non-finite compact index or -1).
    """
    n = m.shape[1]
    w = dt / 6.0
    for s in range(nsteps):
        rhs(m, nbr, c, k1)
        _axpy(m, k1, 0.5 * dt, tmp)
        rhs(tmp, nbr, c, k2)
        _axpy(m, k2, 0.5 * dt, tmp)
        rhs(tmp, nbr, c, k3)
        _axpy(m, k3, dt, tmp)
        rhs(tmp, nbr, c, k4)
        for p in range(n):
            a = m[0, p] + w * (k1[0, p] + 2.0 * k2[0, p] + 2.0 * k3[0, p] + k4[0, p])
            b = m[1, p] + w * (k1[1, p] + 2.0 * k2[1, p] + 2.0 * k3[1, p] + k4[1, p])
            z = m[2, p] + w * (k1[2, p] + 2.0 * k2[2, p] + 2.0 * k3[2, p] + k4[2, p])
            nrm = np.sqrt(a * a + b * b + z * z)
            if not np.isfinite(nrm) or nrm == 0.0:
                return s, p
            tmp[0, p] = a / nrm
            tmp[1, p] = b / nrm
            tmp[2, p] = z / nrm
        for q in range(3):
            for p in range(n):
                m[q, p] = tmp[q, p]
    return nsteps, -1


@nb.njit(cache=True, fastmath=_FM)
def max_torque(m, nbr, c):
    """max over cells of |m x H| / |H| (zero-field cells are skipped)."""
    best = 0.0
    mx_, my_, mz_ = m[0], m[1], m[2]
    for p in range(m.shape[1]):
        hx, hy, hz = _cell_field(p, mx_, my_, mz_, nbr, c)
        hn = np.sqrt(hx * hx + hy * hy + hz * hz)
        if hn == 0.0:
            continue
        mx = mx_[p]
        my = my_[p]
        mz = mz_[p]
        tx = my * hz - mz * hy
        ty = mz * hx - mx * hz
        tz = mx * hy - my * hx
        t = np.sqrt(tx * tx + ty * ty + tz * tz) / hn
        if t > best:
            best = t
    return best


@nb.njit(cache=True)
def mean_mz(m, sel):
    s = 0.0
    for q in range(sel.size):
        s += m[2, sel[q]]
    return s / sel.size
