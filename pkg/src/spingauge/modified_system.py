"""Coulomb-gauge Schroedinger system for ``psi = (psi_1, psi_2)``.

The evolution is ``psi_t = i L psi + N(psi)`` with ``L = d1^2 + epsilon d2^2``.
The connection ``(A0, A1, A2)`` is recomputed from ``psi`` at every stage and
never stored on its own.

Time stepping uses the integrating-factor form of classical RK4, so the
linear part is propagated exactly.  When ``dealias`` is on, every product is
filtered by the 2/3 rule.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .errors import (
    EmptyHistory,
    InvalidParams,
    MisalignedTime,
    NonFinite,
    TooFewSnapshots,
    UnstableTimeStep,
    WrongSignature,
)
from .gauge import PsiPair
from .spectral import SpectralWorkspace

STABILITY_MARGIN = 2.8


@dataclass(frozen=True)
class PsiState(PsiPair):
    t: float = 0.0

    @classmethod
    def from_pair(cls, pair: PsiPair, t: float = 0.0) -> "PsiState":
        return cls(pair.psi, pair.mu, pair.epsilon, float(t))

    def replace(self, psi, t) -> "PsiState":
        return PsiState(psi, self.mu, self.epsilon, float(t))


@dataclass(frozen=True)
class Connection:
    a0: np.ndarray
    a1: np.ndarray
    a2: np.ndarray
    q12: np.ndarray
    # spectra of A1, A2, kept to avoid refactoring them for derivatives
    a1_hat: np.ndarray = field(repr=False, compare=False, default=None)
    a2_hat: np.ndarray = field(repr=False, compare=False, default=None)


@dataclass(frozen=True)
class SolverConfig:
    dt: float
    T: float
    dealias: bool = True
    blowup_threshold: float = math.inf
    snapshot_stride: int = 1

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise InvalidParams("dt must be positive")
        if not (self.T >= 0 and math.isfinite(self.T)):
            raise InvalidParams("T must be non-negative")
        if self.snapshot_stride < 1:
            raise InvalidParams("snapshot_stride must be >= 1")
        if not self.blowup_threshold > 0:
            raise InvalidParams("blowup_threshold must be positive")

    @property
    def n_steps(self) -> int:
        n = self.T / self.dt
        k = int(round(n))
        if abs(n - k) > 1e-9 * max(1.0, n):
            raise InvalidParams("T must be an integer multiple of dt")
        return k


def _weights(epsilon):
    # literal power epsilon^(m+1) for m = 1, 2
    return (epsilon**2, epsilon**3)


def _filter(ws, dealias):
    if dealias:
        mask = ws.dealias_mask
        return lambda x: mask * ws.fft(x)
    return ws.fft


def connection_from_psi(ws: SpectralWorkspace, state: PsiPair, dealias: bool = True) -> Connection:
    """Coulomb connection determined by ``psi``.

    ``A1, A2`` solve the static gauge condition for ``q12 = mu Im(psi1 conj psi2)``.
    ``A0`` is the nonlocal expression

        mu sum_{m,l} e_m [R_l R_m Re(conj(psi_l) psi_m)
                          + 2 |grad|^{-1} R_l Im(A_m psi_m conj(psi_l))]
        + (mu / 2) sum_m e_m |psi_m|^2,

    with ``e_m = epsilon^(m+1)``.
    """
    mu, eps = state.mu, state.epsilon
    p = ws.check(state.psi)
    hat = _filter(ws, dealias)
    e = _weights(eps)
    qh = hat(mu * (p[0] * np.conj(p[1])).imag)
    q = ws.ifft(qh).real
    a1h = ws.inv_grad * ws.r2 * qh
    a2h = -ws.inv_grad * ws.r1 * qh
    a1 = ws.ifft(a1h).real
    a2 = ws.ifft(a2h).real
    A = (a1, a2)
    R = (ws.r1, ws.r2)
    dens = [[None, None], [None, None]]
    dens[0][0] = hat(np.abs(p[0]) ** 2)
    dens[1][1] = hat(np.abs(p[1]) ** 2)
    dens[0][1] = dens[1][0] = hat((np.conj(p[0]) * p[1]).real)
    a0h = (mu / 2.0) * (e[0] * dens[0][0] + e[1] * dens[1][1])
    for m in range(2):
        for l in range(2):
            term = R[l] * R[m] * dens[l][m]
            if l != m:
                term = term + 2.0 * ws.inv_grad * R[l] * hat((A[m] * p[m] * np.conj(p[l])).imag)
            a0h = a0h + mu * e[m] * term
    a0 = ws.ifft(a0h).real
    return Connection(a0, a1, a2, q, a1h, a2h)


def _dA(ws, conn):
    """``dA[l][m] = d_l A_m``."""
    d = (ws.d1, ws.d2)
    hats = (conn.a1_hat, conn.a2_hat)
    if hats[0] is None:
        hats = (ws.fft(conn.a1), ws.fft(conn.a2))
    return [[ws.ifft(d[l] * hats[m]).real for m in range(2)] for l in range(2)]


def nonlinearity(ws: SpectralWorkspace, state: PsiPair, conn: Connection | None = None,
                 dealias: bool = True, form: str = "connection"):
    """``N_m`` in one of two equivalent forms.

    ``form="connection"`` uses ``psi_l (d_l A_m + d_m A_l)``; ``form="curvature"``
    replaces it with ``psi_l (-q_ml + 2 d_m A_l)``.  The two agree when the
    mean of ``q12`` vanishes.
    """
    if conn is None:
        conn = connection_from_psi(ws, state, dealias)
    p = state.psi
    mu, eps = state.mu, state.epsilon
    e = _weights(eps)
    dA = _dA(ws, conn)
    A = (conn.a1, conn.a2)
    if form == "curvature":
        qraw = mu * (p[0] * np.conj(p[1])).imag
        qml = [[0.0, qraw], [-qraw, 0.0]]
    elif form != "connection":
        raise InvalidParams(f"unknown nonlinearity form {form!r}")
    out = np.empty_like(p)
    for m in range(2):
        acc = -1j * conn.a0 * p[m]
        for l in range(2):
            if form == "connection":
                mix = dA[l][m] + dA[m][l]
            else:
                mix = -qml[m][l] + 2.0 * dA[m][l]
            acc = acc + e[l] * (p[l] * mix + p[m] * (-dA[l][l] + 1j * A[l] ** 2))
        out[m] = acc
    if dealias:
        out = ws.ifft(ws.dealias_mask * ws.fft(out))
    return out


def psi0_from_psi(ws: SpectralWorkspace, state: PsiPair, conn: Connection | None = None,
                  form: str = "plain"):
    """Time component ``psi_0``.

    ``form="plain"``: ``i d1 psi1 + i eps d2 psi2 + A1 psi1 + eps A2 psi2``.
    ``form="covariant"``: ``i (D1 psi1 + eps D2 psi2) + 2 A1 psi1 + 2 eps A2 psi2``
    with ``D_m = d_m + i A_m``.
    """
    if conn is None:
        conn = connection_from_psi(ws, state)
    p = state.psi
    eps = state.epsilon
    d1p = ws.apply(ws.d1, p[0])
    d2p = ws.apply(ws.d2, p[1])
    a1, a2 = conn.a1, conn.a2
    if form == "plain":
        return 1j * d1p + 1j * eps * d2p + a1 * p[0] + eps * a2 * p[1]
    if form == "covariant":
        D1 = d1p + 1j * a1 * p[0]
        D2 = d2p + 1j * a2 * p[1]
        return 1j * (D1 + eps * D2) + 2 * a1 * p[0] + 2 * eps * a2 * p[1]
    raise InvalidParams(f"unknown psi0 form {form!r}")


def a0_closed_form(ws: SpectralWorkspace, state: PsiPair, conn: Connection | None = None,
                   dealias: bool = False):
    """For ``epsilon = -1``: ``(mu/2)(R1^2 - R2^2)(|psi1|^2 + |psi2|^2) + A1^2 - A2^2``.

    On the torus this differs from ``connection_from_psi(...).a0`` by the
    constant returned by ``a0_zero_mode_offset`` (for ``mean(q12) = 0`` and
    alias-free data).
    """
    if state.epsilon != -1:
        raise WrongSignature("the closed form of A0 needs epsilon = -1")
    if conn is None:
        conn = connection_from_psi(ws, state, dealias)
    hat = _filter(ws, dealias)
    dens = hat(np.sum(np.abs(state.psi) ** 2, axis=0))
    local = ws.ifft(0.5 * state.mu * (ws.r1**2 - ws.r2**2) * dens).real
    return local + conn.a1**2 - conn.a2**2


def a0_zero_mode_offset(state: PsiPair, conn: Connection) -> float:
    """Constant gap between the two expressions for ``A0`` when ``epsilon = -1``.

    The nonlocal operators kill the zero mode, so the identity
    ``R1^2 + R2^2 = -1`` used to pass between them holds only up to means.
    """
    p = state.psi
    m = np.mean(np.abs(p[0]) ** 2 - np.abs(p[1]) ** 2)
    return float(0.5 * state.mu * m - np.mean(conn.a1**2 - conn.a2**2))


def effective_potential(conn: Connection, epsilon: int):
    """``A0 - sum_l e_l A_l^2``, the coefficient of ``-i psi_m`` in ``N_m``."""
    e = _weights(epsilon)
    return conn.a0 - e[0] * conn.a1**2 - e[1] * conn.a2**2


def psi_time_derivative(ws: SpectralWorkspace, state: PsiPair, dealias: bool = True):
    lin = ws.ifft(-1j * ws.dispersion(state.epsilon) * ws.fft(state.psi))
    return lin + nonlinearity(ws, state, dealias=dealias)


# time stepping -----------------------------------------------------------

class _Rhs:
    """Nonlinear term for the stepper plus the mean effective potential per stage."""

    def __init__(self, ws, mu, epsilon, dealias):
        self.ws, self.mu, self.epsilon, self.dealias = ws, mu, epsilon, dealias

    def __call__(self, psi):
        st = PsiPair(psi, self.mu, self.epsilon)
        conn = connection_from_psi(self.ws, st, self.dealias)
        n = nonlinearity(self.ws, st, conn, self.dealias)
        return n, float(np.mean(effective_potential(conn, self.epsilon)))


def ifrk4_step(ws: SpectralWorkspace, psi, rhs, dt: float, ehalf, efull):
    """Integrating-factor RK4 step for ``u_t = Lambda u + rhs(u)``.

    ``ehalf`` and ``efull`` are ``exp(Lambda dt / 2)`` and ``exp(Lambda dt)``.
    ``rhs`` returns ``(value, aux)``; the RK4 average of ``aux`` is returned
    alongside the new state.
    """
    ph = ws.fft(psi)
    n1, c1 = rhs(psi)
    k1 = ws.fft(n1)
    a = ws.ifft(ehalf * (ph + 0.5 * dt * k1))
    n2, c2 = rhs(a)
    k2 = ws.fft(n2)
    b = ws.ifft(ehalf * ph + 0.5 * dt * k2)
    n3, c3 = rhs(b)
    k3 = ws.fft(n3)
    c = ws.ifft(efull * ph + dt * ehalf * k3)
    n4, c4 = rhs(c)
    k4 = ws.fft(n4)
    new = efull * ph + dt / 6.0 * (efull * k1 + 2.0 * ehalf * (k2 + k3) + k4)
    return ws.ifft(new), (c1 + 2 * c2 + 2 * c3 + c4) / 6.0


def stability_bound(ws: SpectralWorkspace, state: PsiPair, dealias: bool = True) -> float:
    """Heuristic RK4 limit from the size of the linearised nonlinear coefficients."""
    conn = connection_from_psi(ws, state, dealias)
    dA = _dA(ws, conn)
    rate = (np.max(np.abs(conn.a0)) + np.max(conn.a1**2 + conn.a2**2)
            + 2 * sum(np.max(np.abs(dA[l][m])) for l in range(2) for m in range(2)))
    return math.inf if rate == 0 else STABILITY_MARGIN / rate


@dataclass
class StepInfo:
    t: float
    l4: float
    phase: float
    step: int


@dataclass
class BlowupReport:
    terminated: bool = False
    reason: str | None = None
    t_stop: float | None = None
    steps: int = 0
    accumulator: float = 0.0
    stability_bound: float = math.inf


@dataclass
class Trajectory:
    """Snapshots of an evolution.

    ``l4`` is the running ``int int (|psi_1|^2 + |psi_2|^2)^2 dx dt`` at each
    snapshot.  ``phase`` is the running integral of the mean effective
    potential, the only spatially constant part of the flow.
    """

    states: list
    times: np.ndarray
    l4: np.ndarray
    phase: np.ndarray
    report: BlowupReport

    def stack(self):
        if not self.states:
            raise EmptyHistory("trajectory has no snapshots")
        return np.stack([s.psi for s in self.states])

    def __len__(self):
        return len(self.states)


def _density4(ws, psi):
    d = np.sum(np.abs(psi) ** 2, axis=0)
    return float(np.sum(d**2) * ws.grid.cell_area)


def iter_solve(ws: SpectralWorkspace, state0: PsiState, cfg: SolverConfig, rhs=None,
               report: BlowupReport | None = None,
               bound: float | None = None) -> Iterator[tuple[PsiState, StepInfo]]:
    """Yield ``(state, info)`` after every step, starting with the initial state.

    Stops early when the L4 accumulator exceeds ``cfg.blowup_threshold`` or a
    non-finite value appears; ``report`` is filled in either way.  A custom
    ``rhs`` replaces the nonlinearity; ``bound`` then gives its step limit.
    """
    report = BlowupReport() if report is None else report
    ws.check(state0.psi)
    if not np.all(np.isfinite(state0.psi)):
        raise NonFinite("initial data contains non-finite values")
    if bound is None:
        bound = stability_bound(ws, state0, cfg.dealias) if rhs is None else math.inf
    report.stability_bound = bound
    if cfg.dt > bound:
        raise UnstableTimeStep(f"dt = {cfg.dt} exceeds the stability bound {bound:.3e}")
    if rhs is None:
        rhs = _Rhs(ws, state0.mu, state0.epsilon, cfg.dealias)
    lam = -1j * ws.dispersion(state0.epsilon)
    ehalf = np.exp(0.5 * cfg.dt * lam)
    efull = np.exp(cfg.dt * lam)
    nsteps = cfg.n_steps
    psi = state0.psi
    t0 = state0.t
    g_prev = _density4(ws, psi)
    acc = 0.0
    phase = 0.0
    yield state0, StepInfo(t0, 0.0, 0.0, 0)
    for k in range(1, nsteps + 1):
        psi, cbar = ifrk4_step(ws, psi, rhs, cfg.dt, ehalf, efull)
        t = t0 + k * cfg.dt
        if not np.all(np.isfinite(psi)):
            report.terminated, report.reason, report.t_stop = True, "nonfinite", t
            return
        g = _density4(ws, psi)
        acc += 0.5 * cfg.dt * (g + g_prev)
        g_prev = g
        phase += cfg.dt * cbar
        report.steps, report.accumulator = k, acc
        yield state0.replace(psi, t), StepInfo(t, acc, phase, k)
        if acc > cfg.blowup_threshold:
            report.terminated, report.reason, report.t_stop = True, "threshold", t
            return


def collect(stream, stride: int, report: BlowupReport) -> Trajectory:
    states, times, l4, phase = [], [], [], []
    last = None
    for state, info in stream:
        last = (state, info)
        if info.step % stride == 0:
            states.append(state)
            times.append(info.t)
            l4.append(info.l4)
            phase.append(info.phase)
    if last is not None and last[1].step % stride != 0 and report.terminated:
        states.append(last[0])
        times.append(last[1].t)
        l4.append(last[1].l4)
        phase.append(last[1].phase)
    return Trajectory(states, np.array(times), np.array(l4), np.array(phase), report)


def solve(ws: SpectralWorkspace, state0: PsiState, cfg: SolverConfig) -> Trajectory:
    report = BlowupReport()
    return collect(iter_solve(ws, state0, cfg, report=report), cfg.snapshot_stride, report)


def step(ws: SpectralWorkspace, state: PsiState, cfg: SolverConfig) -> PsiState:
    """Advance by one ``cfg.dt``."""
    rhs = _Rhs(ws, state.mu, state.epsilon, cfg.dealias)
    lam = -1j * ws.dispersion(state.epsilon)
    psi, _ = ifrk4_step(ws, state.psi, rhs, cfg.dt, np.exp(0.5 * cfg.dt * lam), np.exp(cfg.dt * lam))
    if not np.all(np.isfinite(psi)):
        raise NonFinite("step produced non-finite values")
    return state.replace(psi, state.t + cfg.dt)


# diagnostics -------------------------------------------------------------

def masses(ws: SpectralWorkspace, psi):
    return np.sum(np.abs(psi) ** 2, axis=(-2, -1)) * ws.grid.cell_area


def mass_rate(ws: SpectralWorkspace, state: PsiPair, dealias: bool = True):
    """Right-hand side of the mass identity for ``m = 1, 2``."""
    conn = connection_from_psi(ws, state, dealias)
    p = state.psi
    e = _weights(state.epsilon)
    dA = _dA(ws, conn)
    div = dA[0][0] + state.epsilon * dA[1][1]
    out = np.zeros(2)
    for m in range(2):
        dens = -2 * np.abs(p[m]) ** 2 * div
        for l in range(2):
            dens = dens + 2 * e[l] * (dA[l][m] + dA[m][l]) * (p[m] * np.conj(p[l])).real
        out[m] = np.sum(dens) * ws.grid.cell_area
    return out


_STENCILS = {
    5: np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0,
    3: np.array([-0.5, 0.0, 0.5]),
}


def _uniform_spacing(times):
    times = np.asarray(times, float)
    if len(times) < 2:
        raise TooFewSnapshots("need at least two snapshots")
    d = np.diff(times)
    if np.max(np.abs(d - d[0])) > 1e-9 * max(abs(d[0]), 1e-300):
        raise MisalignedTime("snapshots are not uniformly spaced")
    return float(d[0])


def mass_identity_residual(ws: SpectralWorkspace, traj: Trajectory, dealias: bool = True):
    """Mismatch between central-difference mass rates and the flux identity.

    Uses a five-point stencil when at least five snapshots exist, otherwise
    three.  Returns ``(times, residual)`` with ``residual`` of shape ``(k, 2)``.
    """
    if len(traj) < 3:
        raise TooFewSnapshots("mass identity needs at least three snapshots")
    h = _uniform_spacing(traj.times)
    M = np.array([masses(ws, s.psi) for s in traj.states])
    w = _STENCILS[5] if len(traj) >= 5 else _STENCILS[3]
    half = len(w) // 2
    idx = range(half, len(traj) - half)
    res = []
    for k in idx:
        dM = sum(w[j] * M[k - half + j] for j in range(len(w))) / h
        res.append(dM - mass_rate(ws, traj.states[k], dealias))
    return traj.times[half:len(traj) - half], np.array(res)


def curl_residual(ws: SpectralWorkspace, state: PsiPair, conn: Connection | None = None) -> float:
    """L2 norm of ``d1 A2 - d2 A1 - mu Im(psi1 conj psi2)``."""
    if conn is None:
        conn = connection_from_psi(ws, state, dealias=False)
    dA = _dA(ws, conn)
    r = dA[0][1] - dA[1][0] - state.mu * (state.psi[0] * np.conj(state.psi[1])).imag
    return float(np.sqrt(np.sum(r**2) * ws.grid.cell_area))
