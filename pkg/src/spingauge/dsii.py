"""Reduction of the ``epsilon = -1`` system to two Davey-Stewartson II equations.

With ``Phi_pm = psi_1 +- i psi_2`` each component solves

    i Phi_t + (d1^2 - d2^2) Phi = (mu / 2) (R1^2 - R2^2)(|Phi|^2) Phi

on its own.  On the torus the nonlocal operators drop the zero mode, so the
two routes differ by a spatially constant potential.  Its running integral
is tracked by the solver (``Trajectory.phase``) and is undone here before
comparing.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GridMismatch, MisalignedTime, WrongSignature
from .gauge import PsiPair
from .modified_system import (
    BlowupReport,
    SolverConfig,
    Trajectory,
    collect,
    iter_solve,
)
from .spectral import SpectralWorkspace


@dataclass(frozen=True)
class DsiiState:
    """One DS-II component stored as a single-row stack ``(1, n1, n2)``."""

    psi: np.ndarray
    mu: int
    t: float = 0.0
    epsilon: int = -1

    def replace(self, psi, t):
        return DsiiState(psi, self.mu, float(t))

    @property
    def phi(self):
        return self.psi[0]


def to_phi(state: PsiPair, sign: int) -> DsiiState:
    if state.epsilon != -1:
        raise WrongSignature("the DS-II reduction needs epsilon = -1")
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    phi = state.psi[0] + sign * 1j * state.psi[1]
    return DsiiState(phi[None], state.mu, float(getattr(state, "t", 0.0)))


def dsii_potential(ws: SpectralWorkspace, phi, mu: int, dealias: bool = True):
    """``(mu / 2)(R1^2 - R2^2)|phi|^2``."""
    dens = ws.fft(np.abs(phi) ** 2)
    if dealias:
        dens = ws.dealias_mask * dens
    return ws.ifft(0.5 * mu * (ws.r1**2 - ws.r2**2) * dens).real


def dsii_rhs(ws: SpectralWorkspace, state: DsiiState, dealias: bool = True):
    """Right-hand side ``(mu / 2)(R1^2 - R2^2)(|Phi|^2) Phi`` of the DS-II equation."""
    phi = state.phi
    out = dsii_potential(ws, phi, state.mu, dealias) * phi
    if dealias:
        out = ws.ifft(ws.dealias_mask * ws.fft(out))
    return out


def ishimori_potentials(ws: SpectralWorkspace, psi: PsiPair, dealias: bool = False):
    """The pair ``(f, g)`` with ``iN_1 = f psi_1 + i g psi_2`` and ``iN_2 = f psi_2 - i g psi_1``.

    ``f = (mu/2)(R1^2 - R2^2)(|psi_1|^2 + |psi_2|^2)`` and
    ``g = (mu/2)(R1^2 - R2^2)(2 Im(psi_1 conj psi_2))``, so ``f +- g`` is the
    DS-II potential of ``psi_1 +- i psi_2``.
    """
    mu = psi.mu
    p = psi.psi
    op = 0.5 * mu * (ws.r1**2 - ws.r2**2)
    mask = ws.dealias_mask if dealias else 1.0
    f = ws.ifft(op * mask * ws.fft(np.sum(np.abs(p) ** 2, axis=0))).real
    g = ws.ifft(op * mask * ws.fft(2 * (p[0] * np.conj(p[1])).imag)).real
    return f, g


class _DsiiRhs:
    def __init__(self, ws, mu, dealias):
        self.ws, self.mu, self.dealias = ws, mu, dealias

    def __call__(self, psi):
        st = DsiiState(psi, self.mu)
        return -1j * dsii_rhs(self.ws, st, self.dealias)[None], 0.0


def solve_dsii(ws: SpectralWorkspace, state0: DsiiState, cfg: SolverConfig) -> Trajectory:
    report = BlowupReport()
    rhs = _DsiiRhs(ws, state0.mu, cfg.dealias)
    vmax = float(np.max(np.abs(dsii_potential(ws, state0.phi, state0.mu, cfg.dealias))))
    bound = np.inf if vmax == 0 else 2.8 / vmax
    stream = iter_solve(ws, state0, cfg, rhs=rhs, report=report, bound=bound)
    return collect(stream, cfg.snapshot_stride, report)


@dataclass
class CrossValidation:
    times: np.ndarray
    plus: np.ndarray
    minus: np.ndarray
    raw_plus: np.ndarray
    raw_minus: np.ndarray

    @property
    def worst(self) -> float:
        return float(max(np.max(self.plus), np.max(self.minus)))


def cross_validate(ws: SpectralWorkspace, psi_traj: Trajectory, plus: Trajectory,
                   minus: Trajectory) -> CrossValidation:
    """L2 distance between DS-II states and ``psi_1 +- i psi_2`` at every snapshot.

    ``plus`` and ``minus`` are the aligned residuals, with the tracked
    zero-mode phase of the ``psi`` run removed; ``raw_*`` skip that step.
    """
    n = len(psi_traj)
    if len(plus) != n or len(minus) != n:
        raise MisalignedTime("trajectories have different numbers of snapshots")
    if not (np.allclose(psi_traj.times, plus.times, atol=1e-12)
            and np.allclose(psi_traj.times, minus.times, atol=1e-12)):
        raise MisalignedTime("snapshot times differ")
    area = ws.grid.cell_area
    out = {k: [] for k in ("p", "m", "rp", "rm")}
    for k in range(n):
        p = psi_traj.states[k].psi
        if p.shape[-2:] != plus.states[k].psi.shape[-2:] or p.shape[-2:] != ws.grid.shape:
            raise GridMismatch("trajectories live on different grids")
        rot = np.exp(1j * psi_traj.phase[k])
        for sign, traj, key in ((1, plus, "p"), (-1, minus, "m")):
            mapped = p[0] + sign * 1j * p[1]
            phi = traj.states[k].phi
            out[key].append(np.sqrt(np.sum(np.abs(phi - rot * mapped) ** 2) * area))
            out["r" + key].append(np.sqrt(np.sum(np.abs(phi - mapped) ** 2) * area))
    return CrossValidation(psi_traj.times.copy(), *(np.array(out[k]) for k in ("p", "m", "rp", "rm")))
