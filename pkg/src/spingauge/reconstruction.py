"""Recover ``(s, v, w)`` from an evolved ``psi`` and evolve ``s`` directly.

The frame obeys a pointwise linear ODE in time driven by ``psi_0`` and ``A0``.
Between two snapshots the driving fields at the midpoint come from cubic
Hermite interpolation of ``psi`` using its time derivative from the evolution
equation, so a single RK4 step per interval is fourth-order accurate.

The direct equation for ``s`` is the reference used to validate the whole
gauge route.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np

from .errors import InvalidParams, NonFinite, ShapeMismatch, TooFewSnapshots, UnstableTimeStep
from .gauge import Frame, GaugeData, SpinField, restore_frame
from .modified_system import (
    BlowupReport,
    PsiState,
    SolverConfig,
    connection_from_psi,
    iter_solve,
    psi0_from_psi,
    psi_time_derivative,
)
from .spectral import Grid, SpectralWorkspace
from .tensor_algebra import cross_mu, dot_mu, project_to_target, target_residual


@dataclass(frozen=True)
class GeometricState:
    s: np.ndarray
    v: np.ndarray
    w: np.ndarray
    mu: int
    t: float = 0.0

    @classmethod
    def from_gauge(cls, gd: GaugeData, t: float = 0.0) -> "GeometricState":
        return cls(gd.spin.values, gd.frame.v, gd.frame.w, gd.spin.mu, t)

    def spin(self, grid: Grid) -> SpinField:
        return SpinField(grid, self.s, self.mu)

    def frame(self) -> Frame:
        return Frame(self.v, self.w)


def _frame_rhs(mu, s, v, w, psi0, a0):
    re, im = psi0.real, psi0.imag
    ds = v * re + w * im
    dv = -mu * s * re + w * a0
    dw = -mu * s * im - v * a0
    return ds, dv, dw


def _stages(x):
    if isinstance(x, (tuple, list)):
        if len(x) != 3:
            raise InvalidParams("stage values must be (start, middle, end)")
        return tuple(x)
    return (x, x, x)


def frame_time_step(g: GeometricState, psi0, a0, dt: float) -> GeometricState:
    """RK4 step of the frame equations.

    ``psi0`` and ``a0`` are either fixed fields or ``(start, mid, end)``
    triples.  The new state is projected back onto the target and the frame
    is re-orthonormalised.
    """
    mu = g.mu
    p = _stages(psi0)
    a = _stages(a0)
    y = (g.s, g.v, g.w)
    k1 = _frame_rhs(mu, *y, p[0], a[0])
    y2 = tuple(yi + 0.5 * dt * ki for yi, ki in zip(y, k1))
    k2 = _frame_rhs(mu, *y2, p[1], a[1])
    y3 = tuple(yi + 0.5 * dt * ki for yi, ki in zip(y, k2))
    k3 = _frame_rhs(mu, *y3, p[1], a[1])
    y4 = tuple(yi + dt * ki for yi, ki in zip(y, k3))
    k4 = _frame_rhs(mu, *y4, p[2], a[2])
    s, v, w = (yi + dt / 6.0 * (q1 + 2 * q2 + 2 * q3 + q4) for yi, q1, q2, q3, q4 in zip(y, k1, k2, k3, k4))
    if not (np.all(np.isfinite(s)) and np.all(np.isfinite(v)) and np.all(np.isfinite(w))):
        raise NonFinite("frame step produced non-finite values")
    s = project_to_target(mu, s)
    v, w = restore_frame(mu, s, v, w)
    return GeometricState(s, v, w, mu, g.t + dt)


def _driving(ws, state, dealias):
    conn = connection_from_psi(ws, state, dealias)
    return psi0_from_psi(ws, state, conn), conn.a0


def iter_reconstruct(ws: SpectralWorkspace, states: Iterable[PsiState], g0: GeometricState,
                     dealias: bool = True) -> Iterator[tuple[PsiState, GeometricState]]:
    """Stream ``(psi_state, geometric_state)`` pairs, one per input snapshot."""
    it = iter(states)
    try:
        prev = next(it)
    except StopIteration:
        raise TooFewSnapshots("reconstruction needs at least one snapshot") from None
    if abs(prev.t - g0.t) > 1e-12:
        raise InvalidParams("initial geometric state and first snapshot differ in time")
    g = g0
    dprev = psi_time_derivative(ws, prev, dealias)
    drive_prev = _driving(ws, prev, dealias)
    yield prev, g
    for cur in it:
        h = cur.t - prev.t
        if not h > 0:
            raise InvalidParams("snapshot times must increase")
        dcur = psi_time_derivative(ws, cur, dealias)
        mid_psi = 0.5 * (prev.psi + cur.psi) + (h / 8.0) * (dprev - dcur)
        mid = prev.replace(mid_psi, prev.t + 0.5 * h)
        drive_mid = _driving(ws, mid, dealias)
        drive_cur = _driving(ws, cur, dealias)
        g = frame_time_step(
            g,
            (drive_prev[0], drive_mid[0], drive_cur[0]),
            (drive_prev[1], drive_mid[1], drive_cur[1]),
            h,
        )
        g = GeometricState(g.s, g.v, g.w, g.mu, cur.t)
        yield cur, g
        prev, dprev, drive_prev = cur, dcur, drive_cur


def reconstruct(ws: SpectralWorkspace, trajectory, g0: GeometricState, dealias: bool = True):
    states = trajectory.states if hasattr(trajectory, "states") else trajectory
    return [g for _, g in iter_reconstruct(ws, states, g0, dealias)]


# residuals ---------------------------------------------------------------

def spatial_residuals(ws: SpectralWorkspace, g: GeometricState, state: PsiState) -> dict:
    """Consistency of a reconstructed triple with the ``psi`` it came from.

    ``ds`` measures ``d_m s - v Re psi_m - w Im psi_m`` (L2, summed over m);
    ``density`` compares ``sum_m |d_m s|^2`` with ``|psi|^2``; ``constraints``
    is the worst frame constraint violation.
    """
    mu = g.mu
    ds = np.stack([ws.apply(ws.deriv_symbol(m), g.s).real for m in (1, 2)])
    area = ws.grid.cell_area
    r = 0.0
    dens = 0.0
    for m in range(2):
        p = state.psi[m]
        diff = ds[m] - g.v * p.real - g.w * p.imag
        r += np.sum(diff**2) * area
        dens = dens + dot_mu(mu, ds[m], ds[m])
    density = np.max(np.abs(dens - np.sum(np.abs(state.psi) ** 2, axis=0)))
    cons = max(
        target_residual(mu, g.s),
        float(np.max(np.abs(dot_mu(mu, g.v, g.v) - 1))),
        float(np.max(np.abs(dot_mu(mu, g.v, g.w)))),
        float(np.max(np.abs(dot_mu(mu, g.s, g.v)))),
        float(np.max(np.abs(g.w - cross_mu(mu, g.s, g.v)))),
    )
    return {"ds": float(np.sqrt(r)), "density": float(density), "constraints": cons}


# zeta --------------------------------------------------------------------

def zeta_from_spin(ws: SpectralWorkspace, s, mu: int):
    """``zeta_m = -R_m |grad|^{-1} [2 mu s . (s_1 x s_2)]``."""
    ds1 = ws.apply(ws.d1, s).real
    ds2 = ws.apply(ws.d2, s).real
    rho = 2 * mu * dot_mu(mu, s, cross_mu(mu, ds1, ds2))
    rh = ws.fft(rho)
    z1 = ws.ifft(-ws.r1 * ws.inv_grad * rh).real
    z2 = ws.ifft(-ws.r2 * ws.inv_grad * rh).real
    return z1, z2


def zeta_from_connection(conn):
    """``zeta_1 = -2 A2`` and ``zeta_2 = 2 A1``."""
    return -2.0 * conn.a2, 2.0 * conn.a1


def zeta_from_q(ws: SpectralWorkspace, q):
    """``zeta_m = 2 R_m |grad|^{-1} q12``."""
    qh = ws.fft(q)
    return ws.ifft(2 * ws.r1 * ws.inv_grad * qh).real, ws.ifft(2 * ws.r2 * ws.inv_grad * qh).real


# direct evolution --------------------------------------------------------

def direct_spin_rhs(ws: SpectralWorkspace, s, mu: int, epsilon: int):
    """``s x (s_11 + eps s_22) + s_1 zeta_2 - eps s_2 zeta_1``."""
    sh = ws.fft(s)
    ds1 = ws.ifft(ws.d1 * sh).real
    ds2 = ws.ifft(ws.d2 * sh).real
    lap = ws.ifft((ws.lap1 + epsilon * ws.lap2) * sh).real
    rho = 2 * mu * dot_mu(mu, s, cross_mu(mu, ds1, ds2))
    rh = ws.fft(rho)
    z1 = ws.ifft(-ws.r1 * ws.inv_grad * rh).real
    z2 = ws.ifft(-ws.r2 * ws.inv_grad * rh).real
    return cross_mu(mu, s, lap) + ds1 * z2 - epsilon * ds2 * z1


def direct_stability_bound(ws: SpectralWorkspace, epsilon: int) -> float:
    return 2.8 / float(np.max(np.abs(ws.dispersion(epsilon))))


def direct_spin_step(ws: SpectralWorkspace, s, mu: int, epsilon: int, dt: float):
    k1 = direct_spin_rhs(ws, s, mu, epsilon)
    k2 = direct_spin_rhs(ws, s + 0.5 * dt * k1, mu, epsilon)
    k3 = direct_spin_rhs(ws, s + 0.5 * dt * k2, mu, epsilon)
    k4 = direct_spin_rhs(ws, s + dt * k3, mu, epsilon)
    out = s + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    if not np.all(np.isfinite(out)):
        raise NonFinite("direct step produced non-finite values")
    return project_to_target(mu, out)


def solve_direct(ws: SpectralWorkspace, f: SpinField, epsilon: int, dt: float, T: float,
                 stride: int | None = None):
    """Explicit RK4 for the spin equation; returns ``(times, snapshots)``.

    Without ``stride`` only the initial and final states are kept.
    """
    if f.grid != ws.grid:
        raise ShapeMismatch("spin field and workspace grids differ")
    bound = direct_stability_bound(ws, epsilon)
    if dt > bound:
        raise UnstableTimeStep(f"dt = {dt} exceeds the explicit stability bound {bound:.3e}")
    n = T / dt
    nsteps = int(round(n))
    if abs(n - nsteps) > 1e-9 * max(1.0, n):
        raise InvalidParams("T must be an integer multiple of dt")
    s = f.values
    times, snaps = [0.0], [s]
    for k in range(1, nsteps + 1):
        s = direct_spin_step(ws, s, f.mu, epsilon, dt)
        if (stride and k % stride == 0) or (not stride and k == nsteps):
            times.append(k * dt)
            snaps.append(s)
    return np.array(times), snaps


# full gauge route --------------------------------------------------------

@dataclass
class GaugeRun:
    times: np.ndarray
    spins: list
    states: list
    report: BlowupReport
    phase: np.ndarray
    l4: np.ndarray
    residuals: list


def run_gauge_route(ws: SpectralWorkspace, gd: GaugeData, cfg: SolverConfig,
                    residuals: bool = False) -> GaugeRun:
    """Evolve ``psi`` from ``gd`` and reconstruct ``s`` along the way.

    Reconstruction consumes every step; only every ``cfg.snapshot_stride``-th
    state is kept in memory.
    """
    state0 = PsiState.from_pair(gd.psi, 0.0)
    g0 = GeometricState.from_gauge(gd)
    report = BlowupReport()
    latest = [None]

    def stream():
        for st, info in iter_solve(ws, state0, cfg, report=report):
            latest[0] = info
            yield st

    times, spins, states, phase, l4, res = [], [], [], [], [], []
    for st, g in iter_reconstruct(ws, stream(), g0, cfg.dealias):
        info = latest[0]
        if info.step % cfg.snapshot_stride == 0 or info.step == cfg.n_steps:
            times.append(st.t)
            spins.append(g)
            states.append(st)
            phase.append(info.phase)
            l4.append(info.l4)
            if residuals:
                res.append(spatial_residuals(ws, g, st))
    return GaugeRun(np.array(times), spins, states, report, np.array(phase), np.array(l4), res)


def linf_difference(a, b) -> float:
    """Largest pointwise Euclidean distance between two vector fields."""
    return float(np.max(np.sqrt(np.sum((np.asarray(a) - np.asarray(b)) ** 2, axis=0))))


def is_close_time(a: float, b: float) -> bool:
    return math.isclose(a, b, rel_tol=1e-12, abs_tol=1e-12)
