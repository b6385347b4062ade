from __future__ import annotations

import numpy as np
import pytest

from oracles import random_field

from spingauge.errors import DegenerateFrame, InvalidParams, ShapeMismatch
from spingauge.gauge import (
    SpinField,
    arbitrary_frame,
    build_gauge,
    compatibility_residual,
    coulomb_from_q,
    coulomb_frame,
    coulomb_residual,
    default_base_vector,
    frame_residuals,
    gauge_covariance,
    gauge_invariant_products,
    initial_data,
    q12_from_products,
)
from spingauge.metrics import isometry
from spingauge.spectral import Grid, SpectralWorkspace
from spingauge.tensor_algebra import cross_mu, dot_mu

GRID = Grid.square(32, 16.0)


@pytest.fixture(scope="module")
def ws():
    return SpectralWorkspace(GRID)


def bump(mu, grid=GRID, **kw):
    params = dict(amplitude=0.3, width=1.0, twist=0.5 + 0.3j)
    params.update(kw)
    return initial_data("bump", grid, mu, **params)


@pytest.mark.parametrize("mu", [1, -1])
def test_products_do_not_depend_on_frame(ws, mu):
    f = bump(mu)
    a = arbitrary_frame(f)
    b = arbitrary_frame(f, references=((0.0, 0.0, 1.0), (0.0, 1.0, 0.0)))
    pa = gauge_invariant_products(ws, f, a)
    pb = gauge_invariant_products(ws, f, b)
    assert np.max(np.abs(pa - pb)) < 1e-10
    # |phi|^2 is the tangential part of |Df|^2; the normal part is spectral error
    dens = pa[0, 0].real + pa[1, 1].real
    s = f.values
    ds = [ws.apply(ws.deriv_symbol(m), s).real for m in (1, 2)]
    full = sum(dot_mu(mu, d, d) for d in ds)
    tangential = full - mu * sum(dot_mu(mu, s, d) ** 2 for d in ds)
    assert np.max(np.abs(dens - tangential)) < 1e-12
    assert np.max(np.abs(dens - full)) < 1e-8


def test_coulomb_coefficients_single_mode(ws):
    x1, x2 = GRID.coords()
    xi = np.array([2 * np.pi * 2 / GRID.L1, 2 * np.pi * 1 / GRID.L2])
    q = np.cos(xi[0] * x1 + xi[1] * x2)
    a1, a2 = coulomb_from_q(ws, q)
    r2 = xi @ xi
    # symbol of |grad|^-1 R_m is i xi_m / |xi|^2; acting on a cosine gives a sine
    np.testing.assert_allclose(a2, xi[0] / r2 * np.sin(xi[0] * x1 + xi[1] * x2), atol=1e-12)
    np.testing.assert_allclose(a1, -xi[1] / r2 * np.sin(xi[0] * x1 + xi[1] * x2), atol=1e-12)


def test_coulomb_condition_and_curl(ws, rng):
    q = rng.normal(size=GRID.shape)
    a1, a2 = coulomb_from_q(ws, q)
    div = ws.ifft(ws.d1 * ws.fft(a1) + ws.d2 * ws.fft(a2))
    assert np.max(np.abs(div)) < 1e-13
    # without Nyquist content the curl returns q minus its mean (plus sign)
    q = random_field(rng, GRID) + 0.3
    a1, a2 = coulomb_from_q(ws, q)
    curl = ws.ifft(ws.d1 * ws.fft(a2) - ws.d2 * ws.fft(a1)).real
    np.testing.assert_allclose(curl, q - q.mean(), atol=1e-12)


@pytest.mark.parametrize("mu", [1, -1])
def test_coulomb_frame_constraints(ws, mu):
    gd = build_gauge(ws, bump(mu))
    res = frame_residuals(gd.spin, gd.frame)
    assert max(res.values()) < 1e-12
    np.testing.assert_allclose(gd.frame.v[:, 0, 0], default_base_vector(gd.spin))


def test_constant_map_has_zero_fields(ws):
    f = initial_data("constant", GRID, 1)
    gd = build_gauge(ws, f)
    assert np.max(np.abs(gd.psi.psi)) < 1e-14
    assert np.max(np.abs(gd.a1)) < 1e-14 and np.max(np.abs(gd.a2)) < 1e-14


@pytest.mark.parametrize("mu", [1, -1])
def test_compatibility_converges(mu):
    res = []
    for n in (32, 64):
        grid = Grid.square(n, 16.0)
        w = SpectralWorkspace(grid)
        gd = build_gauge(w, bump(mu, grid))
        res.append(compatibility_residual(w, gd.psi, gd.a1, gd.a2))
    assert res[1] < res[0] / 8


def test_connection_matches_frame(ws):
    gd = build_gauge(ws, bump(1, amplitude=0.1))
    c1, c2 = coulomb_residual(gd.spin, gd.frame, gd.a1, gd.a2)
    assert max(c1, c2) < 5e-3 * max(np.max(np.abs(gd.a1)), 1e-3) + 1e-3


@pytest.mark.parametrize("mu", [1, -1])
def test_base_rotation_is_a_constant_phase(ws, mu):
    f = bump(mu)
    Q = default_base_vector(f)
    s0 = f.values[:, 0, 0]
    alpha = 0.7
    Q2 = np.cos(alpha) * Q + np.sin(alpha) * cross_mu(mu, s0, Q)
    a = build_gauge(ws, f, base=Q)
    b = build_gauge(ws, f, base=Q2)
    z, spread = gauge_covariance(a.psi, b.psi)
    assert spread < 1e-8
    assert abs(z - np.exp(-1j * alpha)) < 1e-10


@pytest.mark.parametrize("mu", [1, -1])
def test_isometry_equivariance(ws, mu):
    f = bump(mu)
    O = isometry(mu, (0.4, -0.3, 0.2))
    g = SpinField(GRID, np.einsum("ij,j...->i...", O, f.values), mu)
    Q = default_base_vector(f)
    a = build_gauge(ws, f, base=Q)
    b = build_gauge(ws, g, base=O @ Q)
    assert np.max(np.abs(a.psi.psi - b.psi.psi)) < 1e-10


def test_bad_inputs(ws):
    with pytest.raises(InvalidParams):
        bump(1, amplitude=5.0)
    with pytest.raises(InvalidParams):
        bump(1, width=-1.0)
    with pytest.raises(InvalidParams):
        initial_data("mystery", GRID, 1)
    with pytest.raises(InvalidParams):
        SpinField(GRID, np.ones((3,) + GRID.shape), 1)
    with pytest.raises(ShapeMismatch):
        SpinField(GRID, np.ones((3, 4, 4)), 1)
    f = bump(1)
    with pytest.raises(DegenerateFrame):
        gd = build_gauge(ws, f)
        coulomb_frame(ws, f, gd.a1, gd.a2, base=np.array([1.0, 0.0, 0.0]))


def test_holonomy_is_reported(ws):
    gd = build_gauge(ws, bump(1))
    h1, h2 = gd.frame.info["holonomy"]
    assert np.isfinite(h1) and np.isfinite(h2)
    sym = build_gauge(ws, bump(1, twist=0.0))
    assert max(map(abs, sym.frame.info["holonomy"])) < 1e-8


def test_q12_matches_spin_triple_product(ws):
    for mu in (1, -1):
        f = bump(mu)
        q = q12_from_products(gauge_invariant_products(ws, f, arbitrary_frame(f)), mu)
        s = f.values
        d1s = ws.apply(ws.d1, s).real
        d2s = ws.apply(ws.d2, s).real
        np.testing.assert_allclose(q, -mu * dot_mu(mu, s, cross_mu(mu, d1s, d2s)), atol=1e-10)
