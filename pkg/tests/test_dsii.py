from __future__ import annotations

import numpy as np
import pytest

from oracles import orthogonal_psi
from spingauge.dsii import (
    DsiiState,
    cross_validate,
    dsii_rhs,
    ishimori_potentials,
    solve_dsii,
    to_phi,
)
from spingauge.errors import MisalignedTime, WrongSignature
from spingauge.gauge import PsiPair, build_gauge, initial_data
from spingauge.modified_system import (
    PsiState,
    SolverConfig,
    a0_zero_mode_offset,
    connection_from_psi,
    nonlinearity,
    solve,
)
from spingauge.spectral import Grid, SpectralWorkspace

GRID = Grid.square(32, 16.0)


@pytest.fixture(scope="module")
def ws():
    return SpectralWorkspace(GRID)


def test_reduction_needs_hyperbolic_dispersion(rng):
    st = PsiPair(orthogonal_psi(rng, GRID, 4), 1, 1)
    with pytest.raises(WrongSignature):
        to_phi(st, 1)
    with pytest.raises(ValueError):
        to_phi(PsiPair(st.psi, 1, -1), 2)


def test_constant_phi_has_no_nonlinearity(ws):
    st = DsiiState(np.full((1,) + GRID.shape, 0.4 + 0.1j), 1)
    assert np.max(np.abs(dsii_rhs(ws, st))) < 1e-15


@pytest.mark.parametrize("mu", [1, -1])
def test_split_potentials_reproduce_nonlinearity(mu):
    # the identity uses compatibility, so the data must come from a real map
    ws = SpectralWorkspace(Grid.square(64, 16.0))
    f = initial_data("bump", ws.grid, mu, amplitude=0.2, width=1.0, twist=0.5 + 0.3j)
    st = build_gauge(ws, f, -1).psi
    conn = connection_from_psi(ws, st, dealias=False)
    iN = 1j * nonlinearity(ws, st, conn, dealias=False)
    fp, g = ishimori_potentials(ws, st)
    c = a0_zero_mode_offset(st, conn)
    p1, p2 = st.psi
    scale = np.max(np.abs(iN))
    assert np.max(np.abs(iN[0] - ((fp + c) * p1 + 1j * g * p2))) <= 1e-7 * scale
    assert np.max(np.abs(iN[1] - ((fp + c) * p2 - 1j * g * p1))) <= 1e-7 * scale


@pytest.mark.parametrize("sign", [1, -1])
@pytest.mark.parametrize("mu", [1, -1])
def test_f_plus_minus_g_is_the_dsii_potential(ws, rng, sign, mu):
    st = PsiPair(orthogonal_psi(rng, GRID, 4), mu, -1)
    f, g = ishimori_potentials(ws, st)
    phi = to_phi(st, sign)
    from spingauge.dsii import dsii_potential
    V = dsii_potential(ws, phi.phi, mu, dealias=False)
    np.testing.assert_allclose(f + sign * g, V, atol=1e-13)


def test_short_run_cross_validation(ws):
    f = initial_data("bump", GRID, 1, amplitude=0.2, width=1.5, twist=0.5 + 0.3j)
    gd = build_gauge(ws, f, -1)
    cfg = SolverConfig(0.005, 0.05, snapshot_stride=5)
    tr = solve(ws, PsiState.from_pair(gd.psi), cfg)
    plus = solve_dsii(ws, to_phi(gd.psi, 1), cfg)
    minus = solve_dsii(ws, to_phi(gd.psi, -1), cfg)
    cv = cross_validate(ws, tr, plus, minus)
    assert cv.worst < 1e-6
    assert cv.plus[0] == 0 and cv.minus[0] == 0
    short = solve_dsii(ws, to_phi(gd.psi, 1), SolverConfig(0.005, 0.025, snapshot_stride=5))
    with pytest.raises(MisalignedTime):
        cross_validate(ws, tr, short, minus)
