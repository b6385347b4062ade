from __future__ import annotations

import numpy as np
import pytest

from oracles import orthogonal_psi
from spingauge.errors import (
    InvalidParams,
    MisalignedTime,
    TooFewSnapshots,
    UnstableTimeStep,
    WrongSignature,
)
from spingauge.gauge import PsiPair, build_gauge, initial_data
from spingauge.modified_system import (
    PsiState,
    SolverConfig,
    Trajectory,
    a0_closed_form,
    a0_zero_mode_offset,
    connection_from_psi,
    curl_residual,
    iter_solve,
    mass_identity_residual,
    mass_rate,
    masses,
    nonlinearity,
    psi0_from_psi,
    solve,
    step,
)
from spingauge.spectral import Grid, SpectralWorkspace, propagator

GRID = Grid.square(32, 16.0)


@pytest.fixture(scope="module")
def ws():
    return SpectralWorkspace(GRID)


@pytest.fixture(scope="module")
def ws64():
    # the bump is under-resolved on 32^2, which limits pointwise identities
    return SpectralWorkspace(Grid.square(64, 16.0))


def bump_state(ws, mu=1, eps=1, amplitude=0.3):
    f = initial_data("bump", ws.grid, mu, amplitude=amplitude, width=1.0, twist=0.5 + 0.3j)
    return PsiState.from_pair(build_gauge(ws, f, eps).psi)


def test_constant_psi_connection(ws):
    c = 0.3 - 0.2j
    for mu in (1, -1):
        st = PsiPair(np.full((2,) + GRID.shape, c), mu, 1)
        conn = connection_from_psi(ws, st)
        np.testing.assert_allclose(conn.a0, mu * abs(c) ** 2, atol=1e-14)
        assert np.max(np.abs(conn.a1)) < 1e-15 and np.max(np.abs(conn.a2)) < 1e-15


def test_zero_psi_gives_zero_nonlinearity(ws):
    st = PsiPair(np.zeros((2,) + GRID.shape), 1, -1)
    assert np.max(np.abs(nonlinearity(ws, st))) == 0


@pytest.mark.parametrize("mu,eps", [(1, 1), (1, -1), (-1, 1), (-1, -1)])
def test_nonlinearity_forms_agree(ws, rng, mu, eps):
    st = PsiPair(orthogonal_psi(rng, GRID, 4), mu, eps)
    conn = connection_from_psi(ws, st, dealias=False)
    a = nonlinearity(ws, st, conn, dealias=False)
    b = nonlinearity(ws, st, conn, dealias=False, form="curvature")
    assert np.max(np.abs(a - b)) <= 1e-10 * np.max(np.abs(a))


@pytest.mark.parametrize("mu,eps", [(1, 1), (-1, -1)])
def test_psi0_forms_agree(ws, rng, mu, eps):
    st = PsiPair(orthogonal_psi(rng, GRID, 6), mu, eps)
    conn = connection_from_psi(ws, st)
    a = psi0_from_psi(ws, st, conn)
    b = psi0_from_psi(ws, st, conn, form="covariant")
    assert np.max(np.abs(a - b)) <= 1e-10 * np.max(np.abs(a))


@pytest.mark.parametrize("mu", [1, -1])
def test_a0_closed_form(ws, rng, mu):
    st = PsiPair(orthogonal_psi(rng, GRID, 2), mu, -1)
    conn = connection_from_psi(ws, st, dealias=False)
    gap = conn.a0 - a0_closed_form(ws, st, conn)
    scale = np.max(np.abs(conn.a0))
    assert np.ptp(gap) <= 1e-10 * scale
    assert abs(gap.mean() - a0_zero_mode_offset(st, conn)) <= 1e-10 * scale
    with pytest.raises(WrongSignature):
        a0_closed_form(ws, PsiPair(st.psi, mu, 1))


def test_linear_regime_is_the_propagator(ws, rng):
    st = PsiState.from_pair(PsiPair(orthogonal_psi(rng, GRID, 6), 1, -1))
    cfg = SolverConfig(0.05, 0.5)
    zero = lambda psi: (np.zeros_like(psi), 0.0)  # noqa: E731
    states = [s for s, _ in iter_solve(ws, st, cfg, rhs=zero)]
    np.testing.assert_allclose(states[-1].psi, propagator(ws, -1, 0.5, st.psi), atol=1e-13)


def test_gauge_equivariance(ws):
    st = bump_state(ws, 1, 1)
    z = np.exp(0.9j)
    cfg = SolverConfig(0.01, 0.05)
    a = solve(ws, st, cfg).states[-1].psi
    b = solve(ws, st.replace(z * st.psi, 0.0), cfg).states[-1].psi
    assert np.max(np.abs(z * a - b)) < 1e-12


def test_time_convergence_order(ws):
    st = bump_state(ws, -1, -1, amplitude=0.5)
    T = 0.2
    ref = solve(ws, st, SolverConfig(T / 64, T)).states[-1].psi
    errs = [np.max(np.abs(solve(ws, st, SolverConfig(T / k, T)).states[-1].psi - ref)) for k in (4, 8)]
    assert errs[0] / errs[1] > 12


def test_mass_identity(ws64):
    ws = ws64
    st = bump_state(ws, 1, 1)
    tr = solve(ws, st, SolverConfig(0.002, 0.02))
    _, res = mass_identity_residual(ws, tr)
    assert np.max(np.abs(res)) < 1e-10
    with pytest.raises(TooFewSnapshots):
        mass_identity_residual(ws, Trajectory(tr.states[:2], tr.times[:2], tr.l4[:2], tr.phase[:2], tr.report))
    bad = tr.times.copy()
    bad[3] += 1e-4
    with pytest.raises(MisalignedTime):
        mass_identity_residual(ws, Trajectory(tr.states, bad, tr.l4, tr.phase, tr.report))


def test_mass_rate_has_no_divergence_term_when_elliptic(ws):
    st = bump_state(ws, 1, 1)
    conn = connection_from_psi(ws, st)
    div = ws.ifft(ws.d1 * ws.fft(conn.a1) + ws.d2 * ws.fft(conn.a2)).real
    assert np.max(np.abs(div)) < 1e-14
    assert np.all(np.isfinite(mass_rate(ws, st)))


def test_blowup_threshold_stops_the_run(ws):
    st = bump_state(ws, 1, 1)
    tr = solve(ws, st, SolverConfig(0.01, 1.0, blowup_threshold=1e-12))
    assert tr.report.terminated and tr.report.reason == "threshold"
    assert tr.report.steps == 1 and len(tr) == 2


def test_step_matches_solver(ws):
    st = bump_state(ws, 1, -1)
    cfg = SolverConfig(0.01, 0.01)
    np.testing.assert_allclose(step(ws, st, cfg).psi, solve(ws, st, cfg).states[-1].psi)


def test_config_validation(ws):
    with pytest.raises(InvalidParams):
        SolverConfig(0.0, 1.0)
    with pytest.raises(InvalidParams):
        SolverConfig(0.3, 1.0).n_steps
    st = bump_state(ws, 1, 1)
    with pytest.raises(UnstableTimeStep):
        solve(ws, st, SolverConfig(1e3, 1e3))


def test_curl_residual_small_for_static_data(ws64):
    st = bump_state(ws64, 1, 1)
    assert curl_residual(ws64, st) < 1e-8
    assert masses(ws64, st.psi).shape == (2,)
