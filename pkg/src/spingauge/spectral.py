"""Fourier multipliers on the periodic box ``[0, L1) x [0, L2)``.

All operators act on the last two axes, so stacked fields of shape
``(k, n1, n2)`` are handled in one call.  Outputs are complex; callers take
the real part of fields that are real by construction.

Odd symbols (derivatives and Riesz transforms) vanish on the Nyquist line of
their own axis, which keeps real inputs real and makes identities such as
``d1 A1 + d2 A2 = 0`` exact.  Even symbols use the full frequency set.
"""
from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

from .errors import EmptyHistory, InvalidParams, ShapeMismatch

THREADS_ENV = "SPINGAUGE_THREADS"


def default_workers() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


@dataclass(frozen=True)
class Grid:
    n1: int
    n2: int
    L1: float
    L2: float

    def __post_init__(self):
        for n in (self.n1, self.n2):
            if not isinstance(n, (int, np.integer)) or n < 8 or n % 2:
                raise InvalidParams(f"grid sizes must be even integers >= 8, got {n!r}")
        if not (self.L1 > 0 and self.L2 > 0):
            raise InvalidParams("box lengths must be positive")

    @classmethod
    def square(cls, n: int, L: float) -> "Grid":
        return cls(n, n, float(L), float(L))

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n1, self.n2)

    @property
    def dx1(self) -> float:
        return self.L1 / self.n1

    @property
    def dx2(self) -> float:
        return self.L2 / self.n2

    @property
    def cell_area(self) -> float:
        return self.dx1 * self.dx2

    def coords(self):
        """Broadcastable coordinate arrays ``x1`` (n1, 1) and ``x2`` (1, n2)."""
        x1 = np.arange(self.n1)[:, None] * self.dx1
        x2 = np.arange(self.n2)[None, :] * self.dx2
        return x1, x2

    def scaled(self, r: float) -> "Grid":
        """Same sample count on a box shrunk by ``r``."""
        return Grid(self.n1, self.n2, self.L1 / r, self.L2 / r)


def _frozen(a):
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


def _wavenumbers(n: int, L: float):
    k = sfft.fftfreq(n, d=1.0 / n)
    xi = 2.0 * np.pi * k / L
    odd = xi.copy()
    odd[n // 2] = 0.0
    return xi, odd


# Littlewood-Paley bump: 1 on [0, 5/4], 0 beyond 8/5, smooth in between.
_ETA_IN = 1.25
_ETA_OUT = 1.6


def _h(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def eta0(r):
    r = np.asarray(r, dtype=float)
    a = _h(_ETA_OUT - r)
    b = _h(r - _ETA_IN)
    return a / (a + b)


class SpectralWorkspace:
    """Precomputed multiplier tables for one grid.

    Tables are read-only after construction, so a workspace can be shared
    between threads.
    """

    def __init__(self, grid: Grid, workers: int | None = None):
        self.grid = grid
        self.workers = default_workers() if workers is None else max(1, int(workers))
        xi1, xi1_odd = _wavenumbers(grid.n1, grid.L1)
        xi2, xi2_odd = _wavenumbers(grid.n2, grid.L2)
        X1, X2 = np.meshgrid(xi1, xi2, indexing="ij")
        O1, O2 = np.meshgrid(xi1_odd, xi2_odd, indexing="ij")
        mag = np.sqrt(X1**2 + X2**2)
        inv = np.zeros_like(mag)
        inv[mag > 0] = 1.0 / mag[mag > 0]
        self.xi1 = _frozen(X1)
        self.xi2 = _frozen(X2)
        self.kmag = _frozen(mag)
        self.inv_grad = _frozen(inv)
        self.d1 = _frozen(1j * O1)
        self.d2 = _frozen(1j * O2)
        self.r1 = _frozen(1j * O1 * inv)
        self.r2 = _frozen(1j * O2 * inv)
        self.lap1 = _frozen(-(X1**2))
        self.lap2 = _frozen(-(X2**2))
        k1 = np.abs(sfft.fftfreq(grid.n1, d=1.0 / grid.n1))
        k2 = np.abs(sfft.fftfreq(grid.n2, d=1.0 / grid.n2))
        K1, K2 = np.meshgrid(k1, k2, indexing="ij")
        self.dealias_mask = _frozen((K1 < grid.n1 / 3.0) & (K2 < grid.n2 / 3.0))
        nz = mag[mag > 0]
        self.lp_kmin = int(np.floor(np.log2(nz.min() / _ETA_OUT))) + 1
        self.lp_kmax = int(np.ceil(np.log2(nz.max() / _ETA_IN)))

    # transforms -----------------------------------------------------------
    def check(self, f):
        f = np.asarray(f)
        if f.shape[-2:] != self.grid.shape:
            raise ShapeMismatch(f"field shape {f.shape} does not match grid {self.grid.shape}")
        return f

    def fft(self, f):
        return sfft.fft2(self.check(f), axes=(-2, -1), workers=self.workers)

    def ifft(self, fh):
        return sfft.ifft2(fh, axes=(-2, -1), workers=self.workers)

    def apply(self, mult, f):
        return self.ifft(mult * self.fft(f))

    # tables ---------------------------------------------------------------
    def deriv_symbol(self, m: int):
        return {1: self.d1, 2: self.d2}[_axis(m)]

    def riesz_symbol(self, m: int):
        return {1: self.r1, 2: self.r2}[_axis(m)]

    def dispersion(self, epsilon: int):
        """Symbol of ``-(d1^2 + epsilon d2^2)``, i.e. ``xi1^2 + epsilon xi2^2``."""
        return -(self.lap1 + epsilon * self.lap2)

    def lp_symbol(self, k: int):
        r = self.kmag
        return eta0(r / 2.0**k) - eta0(r / 2.0 ** (k - 1))

    @property
    def lp_range(self) -> range:
        return range(self.lp_kmin, self.lp_kmax + 1)


def _axis(m) -> int:
    if m not in (1, 2):
        raise InvalidParams(f"axis index must be 1 or 2, got {m!r}")
    return int(m)


# operators ---------------------------------------------------------------

def riesz(ws: SpectralWorkspace, m: int, f):
    """Riesz transform with symbol ``i xi_m / |xi|`` (zero mode annihilated)."""
    return ws.apply(ws.riesz_symbol(m), f)


def inv_grad(ws: SpectralWorkspace, f):
    """``|grad|^{-1}`` with the zero mode annihilated."""
    return ws.apply(ws.inv_grad, f)


def derivative(ws: SpectralWorkspace, m: int, f):
    return ws.apply(ws.deriv_symbol(m), f)


def second_derivative(ws: SpectralWorkspace, m: int, f):
    return ws.apply(ws.lap1 if _axis(m) == 1 else ws.lap2, f)


def propagator(ws: SpectralWorkspace, epsilon: int, dt: float, f):
    """Exact flow of ``i u_t + u_11 + epsilon u_22 = 0`` over ``dt``."""
    return ws.apply(np.exp(-1j * dt * ws.dispersion(epsilon)), f)


def dealias(ws: SpectralWorkspace, f):
    return ws.apply(ws.dealias_mask, f)


def lp_projection(ws: SpectralWorkspace, k: int, f):
    return ws.apply(ws.lp_symbol(k), f)


def shift_axis(f, axis: int, delta: float, length: float):
    """Evaluate the trigonometric interpolant of ``f`` at ``x + delta`` along one axis.

    The Nyquist mode is treated as a cosine so real data stays real.
    """
    f = np.asarray(f)
    n = f.shape[axis]
    xi, _ = _wavenumbers(n, length)
    mult = np.exp(1j * xi * delta)
    mult[n // 2] = np.cos(xi[n // 2] * delta)
    shape = [1] * f.ndim
    shape[axis] = n
    out = sfft.ifft(sfft.fft(f, axis=axis) * mult.reshape(shape), axis=axis)
    return out.real if np.isrealobj(f) else out


# quadrature --------------------------------------------------------------

def inner(ws: SpectralWorkspace, f, g):
    """``sum conj(f) g dA`` over the last two axes."""
    return np.sum(np.conj(f) * g, axis=(-2, -1)) * ws.grid.cell_area


def l2_norm(ws: SpectralWorkspace, f):
    return np.sqrt(np.sum(np.abs(f) ** 2, axis=(-2, -1)) * ws.grid.cell_area)


def mean(f):
    return np.mean(f, axis=(-2, -1))


def xsigma_norm(ws: SpectralWorkspace, history, sigma: float, dt: float):
    """Littlewood-Paley ``X^sigma`` norm of a scalar history ``(nt, n1, n2)``.

    Each block pays ``sup_t ||P_k u||_2 + ||P_k u||_{L^4_{x,t}}``, with the
    time integral taken by the rectangle rule.
    """
    u = np.asarray(history)
    if u.ndim == 2:
        u = u[None]
    if u.shape[0] == 0:
        raise EmptyHistory("history has no snapshots")
    ws.check(u)
    uh = ws.fft(u)
    total = 0.0
    for k in ws.lp_range:
        pk = ws.ifft(ws.lp_symbol(k) * uh)
        a = np.abs(pk)
        sup_l2 = np.sqrt(np.max(np.sum(a**2, axis=(-2, -1)) * ws.grid.cell_area))
        l4 = (np.sum(a**4) * ws.grid.cell_area * dt) ** 0.25
        total += (1.0 + 2.0 ** (2 * sigma * k)) * (sup_l2 + l4) ** 2
    return float(np.sqrt(total))
