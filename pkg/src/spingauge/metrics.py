"""Gauge-invariant semidistances between differentiated fields.

``d1`` compares two single-time fields modulo a global unit factor and has a
closed form.  ``rho1`` compares two histories in ``L^inf_t L^2_x`` and
``L^4_{x,t}``, each minimised over the unit circle separately.
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm
from scipy.optimize import minimize_scalar

from .errors import EmptyHistory, GridMismatch, IncompatibleSymmetry, MisalignedTime
from .gauge import PsiPair, SpinField, build_gauge
from .modified_system import PsiState, SolverConfig, solve
from .spectral import SpectralWorkspace
from .tensor_algebra import check_mu, dot_mu, eta


@dataclass(frozen=True)
class FieldPairNorms:
    d1: float | None = None
    rho1: float | None = None
    optimal_z: complex | None = None
    pieces: tuple | None = None


def _as_array(x):
    if isinstance(x, PsiPair):
        return x.psi
    return np.asarray(x)


def semidistance_d1(ws: SpectralWorkspace, phi_a, phi_b) -> FieldPairNorms:
    """``inf_{|z|=1} (sum_m ||z phi_a_m - phi_b_m||^2)^{1/2}``.

    With ``c = sum_m <phi_b_m, phi_a_m>`` the minimiser is ``z = conj(c)/|c|``
    (``z = 1`` when ``c = 0``).
    """
    a, b = _as_array(phi_a), _as_array(phi_b)
    if a.shape != b.shape:
        raise GridMismatch("fields have different shapes")
    ws.check(a)
    area = ws.grid.cell_area
    c = np.sum(a * np.conj(b)) * area
    na = np.sum(np.abs(a) ** 2) * area
    nb = np.sum(np.abs(b) ** 2) * area
    d2 = max(na + nb - 2 * abs(c), 0.0)
    z = np.conj(c) / abs(c) if abs(c) > 0 else 1.0 + 0j
    return FieldPairNorms(d1=float(math.sqrt(d2)), optimal_z=complex(z))


def _histories(traj):
    if hasattr(traj, "stack"):
        return traj.stack(), np.asarray(traj.times)
    arr = np.asarray(traj)
    return arr, None


def _circle_min(fun, seed, scan=64):
    """Minimise a function of the angle: coarse scan, then bounded refinement."""
    angles = seed + 2 * np.pi * np.arange(scan) / scan
    vals = np.array([fun(a) for a in angles])
    k = int(np.argmin(vals))
    step = 2 * np.pi / scan
    res = minimize_scalar(fun, bounds=(angles[k] - step, angles[k] + step), method="bounded",
                          options={"xatol": 1e-12})
    if res.fun < vals[k]:
        return float(res.fun), float(res.x)
    return float(vals[k]), float(angles[k])


def semidistance_rho1(ws: SpectralWorkspace, traj_a, traj_b, dt: float) -> FieldPairNorms:
    """History semidistance.

    The first piece is ``inf_z (sum_m (sup_t ||z a_m - b_m||_2)^2)^{1/2}``,
    the second ``inf_z sum_m ||z a_m - b_m||_{L^4_{x,t}}`` with the rectangle
    rule in time.  Each minimisation over the circle starts from the angle
    that is optimal for the ``d1`` distance of the full histories.
    """
    a, ta = _histories(traj_a)
    b, tb = _histories(traj_b)
    if a.shape[0] == 0 or b.shape[0] == 0:
        raise EmptyHistory("history has no snapshots")
    if a.shape != b.shape:
        if a.shape[0] != b.shape[0]:
            raise MisalignedTime("histories have different lengths")
        raise GridMismatch("histories live on different grids")
    if ta is not None and tb is not None and not np.allclose(ta, tb, atol=1e-12):
        raise MisalignedTime("snapshot times differ")
    ws.check(a)
    area = ws.grid.cell_area
    c = np.sum(a * np.conj(b))
    seed = float(np.angle(np.conj(c))) if abs(c) > 0 else 0.0

    def linf_l2(theta):
        diff = np.exp(1j * theta) * a - b
        per = np.sqrt(np.sum(np.abs(diff) ** 2, axis=(-2, -1)) * area)  # (nt, 2)
        return float(np.sqrt(np.sum(np.max(per, axis=0) ** 2)))

    def l4(theta):
        diff = np.exp(1j * theta) * a - b
        per = (np.sum(np.abs(diff) ** 4, axis=(0, -2, -1)) * area * dt) ** 0.25
        return float(np.sum(per))

    p1, th1 = _circle_min(linf_l2, seed)
    p2, th2 = _circle_min(l4, seed)
    return FieldPairNorms(rho1=p1 + p2, optimal_z=complex(np.exp(1j * th1)), pieces=(p1, p2))


def dfield_norm(ws: SpectralWorkspace, f: SpinField) -> float:
    """``|| |Df| ||_2`` computed from spectral derivatives of ``f``."""
    area = ws.grid.cell_area
    tot = 0.0
    for m in (1, 2):
        d = ws.apply(ws.deriv_symbol(m), f.values).real
        tot += np.sum(dot_mu(f.mu, d, d)) * area
    return float(math.sqrt(max(tot, 0.0)))


# symmetries ------------------------------------------------------------------

def isometry(mu: int, params) -> np.ndarray:
    """Element of ``SO(3)`` (``mu = 1``) or ``SO(2,1)`` (``mu = -1``).

    ``params = (a, b, c)``: ``a`` rotates the ``(y1, y2)`` plane, ``b`` and
    ``c`` rotate (or boost) ``y0`` against ``y1`` and ``y2``.
    """
    mu = check_mu(mu)
    a, b, c = (float(x) for x in params)
    X = np.zeros((3, 3))
    X[1, 2], X[2, 1] = -a, a
    X[0, 1], X[1, 0] = -mu * b, b
    X[0, 2], X[2, 0] = -mu * c, c
    return expm(X)


def is_isometry(mu: int, O, tol: float = 1e-12) -> bool:
    E = eta(mu)
    return bool(np.max(np.abs(O.T @ E @ O - E)) < tol and np.linalg.det(O) > 0 and (mu == 1 or O[0, 0] > 0))


def apply_isometry(f: SpinField, O) -> SpinField:
    if not is_isometry(f.mu, O, 1e-10):
        raise IncompatibleSymmetry("matrix does not preserve the target")
    return SpinField(f.grid, np.einsum("ij,j...->i...", O, f.values), f.mu)


def translate(f: SpinField, p) -> SpinField:
    """``f(x + p dx)``, ``p`` in whole grid cells."""
    p1, p2 = p
    if int(p1) != p1 or int(p2) != p2:
        raise IncompatibleSymmetry("translations must be whole grid cells")
    return SpinField(f.grid, np.roll(f.values, (-int(p1), -int(p2)), axis=(1, 2)), f.mu)


def dilate(f: SpinField, r: float) -> SpinField:
    """``f(r x)``: the same samples on a box shrunk by ``r``."""
    if not (r > 0 and math.isfinite(r)):
        raise IncompatibleSymmetry("dilation factor must be positive")
    return SpinField(f.grid.scaled(r), f.values, f.mu)


def _phi(f: SpinField, epsilon: int, substeps: int, workers=None, base=None):
    ws = SpectralWorkspace(f.grid, workers)
    return ws, build_gauge(ws, f, epsilon, base=base, substeps=substeps).psi


def invariance_suite(f: SpinField, fprime: SpinField, r: float = 2.0, p=(1, 1), O=None,
                     epsilon: int = 1, substeps: int = 1) -> dict:
    """``d1(f, f')`` against its transforms under dilation, translation and isometry.

    Returns the base value and the absolute change under each symmetry.
    In two dimensions the derivative gain ``r`` and the area loss ``r^{-2}``
    cancel, so all three changes should vanish.
    """
    if f.grid != fprime.grid or f.mu != fprime.mu:
        raise GridMismatch("both maps must share grid and signature")
    if O is None:
        O = isometry(f.mu, (0.3, 0.2, -0.1))

    def d1(a, b):
        ws, pa = _phi(a, epsilon, substeps)
        _, pb = _phi(b, epsilon, substeps)
        return semidistance_d1(ws, pa, pb).d1

    base = d1(f, fprime)
    dil = d1(dilate(f, r), dilate(fprime, r))
    tr = d1(translate(f, p), translate(fprime, p))
    iso = d1(apply_isometry(f, O), apply_isometry(fprime, O))
    return {
        "d1": base,
        "dilation": abs(dil - base),
        "translation": abs(tr - base),
        "isometry": abs(iso - base),
    }


# stability sweep --------------------------------------------------------------

@dataclass
class SweepRow:
    delta: float
    d_in: float
    d_out: float
    ratio: float
    status: str
    l4: float = float("nan")


def stability_sweep(f: SpinField, perturb, deltas, epsilon: int, cfg: SolverConfig,
                    substeps: int = 1, workers: int = 1, threads: int | None = None) -> list[SweepRow]:
    """Ratio ``rho1(psi, psi_delta) / d1(phi, phi_delta)`` for each perturbation size.

    ``perturb(delta)`` returns the perturbed map.  Rows are independent and
    may run concurrently; the output order follows ``deltas``.
    """
    ws = SpectralWorkspace(f.grid, threads)
    gd = build_gauge(ws, f, epsilon, substeps=substeps)
    base = solve(ws, PsiState.from_pair(gd.psi), cfg)

    def row(delta):
        fp = perturb(delta)
        if fp.grid != f.grid:
            raise GridMismatch("perturbed map lives on another grid")
        gp = build_gauge(ws, fp, epsilon, substeps=substeps)
        d_in = semidistance_d1(ws, gd.psi, gp.psi).d1
        if d_in == 0:
            return SweepRow(float(delta), 0.0, float("nan"), float("nan"), "skipped")
        tr = solve(ws, PsiState.from_pair(gp.psi), cfg)
        if tr.report.terminated or base.report.terminated or len(tr) != len(base):
            return SweepRow(float(delta), d_in, float("nan"), float("nan"), "blowup", tr.report.accumulator)
        d_out = semidistance_rho1(ws, base, tr, cfg.dt * cfg.snapshot_stride).rho1
        return SweepRow(float(delta), d_in, d_out, d_out / d_in, "ok", tr.report.accumulator)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(row, deltas))
    return [row(d) for d in deltas]


def write_sweep_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["delta", "d_in", "d_out", "ratio", "l4_accumulator", "status"])
        for r in rows:
            w.writerow([repr(r.delta), repr(r.d_in), repr(r.d_out), repr(r.ratio), repr(r.l4), r.status])
