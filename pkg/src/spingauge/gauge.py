"""Static gauge construction: from a map ``f`` to Coulomb-gauge fields.

Pipeline for a fixed time slice:

1. ``arbitrary_frame`` picks any orthonormal tangent frame.
2. ``gauge_invariant_products`` forms ``phi_l * conj(phi_m)``, which does not
   depend on that choice.
3. ``coulomb_coefficients`` gives ``A1, A2`` with ``d1 A1 + d2 A2 = 0``.
4. ``coulomb_frame`` integrates the frame ODE outward from the corner of the
   grid so that ``w . d_m v = A_m``.
5. ``differentiated_fields`` returns ``phi_m = v.d_m f + i w.d_m f``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateFrame, FrameDrift, InvalidParams, NonFinite, ShapeMismatch
from .spectral import Grid, SpectralWorkspace, shift_axis
from .tensor_algebra import (
    check_mu,
    cross_mu,
    dot_mu,
    project_to_target,
    target_residual,
    tangent_project,
)

TARGET_TOL = 1e-10


@dataclass(frozen=True)
class SpinField:
    """A map from the grid into the target, stored as ``(3, n1, n2)``."""

    grid: Grid
    values: np.ndarray
    mu: int

    def __post_init__(self):
        check_mu(self.mu)
        v = np.asarray(self.values, dtype=float)
        if v.shape != (3,) + self.grid.shape:
            raise ShapeMismatch(f"spin values must have shape (3, {self.grid.n1}, {self.grid.n2})")
        if not np.all(np.isfinite(v)):
            raise NonFinite("spin field contains non-finite values")
        if target_residual(self.mu, v) > TARGET_TOL:
            raise InvalidParams("spin field does not lie on the target")
        if self.mu == -1 and np.any(v[0] <= 0):
            raise InvalidParams("hyperbolic spin field leaves the upper sheet")
        object.__setattr__(self, "values", v)

    def with_grid(self, grid: Grid) -> "SpinField":
        return SpinField(grid, self.values, self.mu)


@dataclass(frozen=True)
class Frame:
    """Tangent frame ``(v, w)`` with ``w = s x v``; ``info`` carries diagnostics."""

    v: np.ndarray
    w: np.ndarray
    info: dict = field(default_factory=dict, compare=False)


@dataclass(frozen=True)
class PsiPair:
    """Complex fields ``(psi_1, psi_2)`` stacked as ``(2, n1, n2)``."""

    psi: np.ndarray
    mu: int
    epsilon: int

    def __post_init__(self):
        check_mu(self.mu)
        if self.epsilon not in (1, -1):
            raise InvalidParams("epsilon must be +1 or -1")
        p = np.asarray(self.psi, dtype=complex)
        if p.ndim != 3 or p.shape[0] != 2:
            raise ShapeMismatch("psi must have shape (2, n1, n2)")
        object.__setattr__(self, "psi", p)

    @property
    def psi1(self):
        return self.psi[0]

    @property
    def psi2(self):
        return self.psi[1]


# initial data ------------------------------------------------------------

def _bump_profile(grid: Grid, amplitude, width, twist, center, cutoff):
    x1, x2 = grid.coords()
    c1, c2 = center
    z = (x1 - c1) + 1j * (x2 - c2)
    r = np.abs(z)
    r_in, r_out = cutoff
    t = np.clip((r - r_in) / (r_out - r_in), 0.0, 1.0)
    # C-infinity step from 1 to 0 on [r_in, r_out]
    a = np.where(t < 1, np.exp(-1.0 / np.maximum(1 - t, 1e-300)), 0.0)
    b = np.where(t > 0, np.exp(-1.0 / np.maximum(t, 1e-300)), 0.0)
    chi = a / (a + b)
    return amplitude * (1.0 + twist * z / width) * np.exp(-(r**2) / (2 * width**2)) * chi


def chart(mu: int, u):
    """Exponential chart at the point ``(1, 0, 0)``: complex ``u`` to a target point."""
    r = np.abs(u)
    if mu == 1:
        c = np.cos(r)
        sr = np.sinc(r / np.pi)
    else:
        c = np.cosh(r)
        safe = np.where(r > 1e-8, r, 1.0)
        sr = np.where(r > 1e-8, np.sinh(safe) / safe, 1.0 + r**2 / 6.0)
    return np.stack((c, sr * u.real, sr * u.imag))


def initial_data(kind: str, grid: Grid, mu: int, **params) -> SpinField:
    """Build a test map.

    ``kind="constant"`` accepts ``point`` (defaults to ``(1, 0, 0)``).
    ``kind="bump"`` builds a compactly supported excitation of the constant
    map ``(1, 0, 0)`` using ``amplitude``, ``width``, ``twist`` (complex),
    ``center`` and ``cutoff=(r_in, r_out)``.  The grid corner stays in the
    constant region.
    """
    check_mu(mu)
    if kind == "constant":
        p = np.asarray(params.get("point", (1.0, 0.0, 0.0)), dtype=float)
        if p.shape != (3,) or abs(mu * dot_mu(mu, p, p) - 1.0) > TARGET_TOL:
            raise InvalidParams("constant point must lie on the target")
        vals = np.broadcast_to(p[:, None, None], (3,) + grid.shape).copy()
        return SpinField(grid, vals, mu)
    if kind != "bump":
        raise InvalidParams(f"unknown initial data family {kind!r}")
    amplitude = float(params.get("amplitude", 0.2))
    width = float(params.get("width", 1.0))
    twist = complex(params.get("twist", 0.0))
    half = 0.5 * min(grid.L1, grid.L2)
    center = params.get("center", (grid.L1 / 2, grid.L2 / 2))
    cutoff = params.get("cutoff", (0.55 * half, 0.85 * half))
    if amplitude < 0 or width <= 0:
        raise InvalidParams("amplitude must be >= 0 and width > 0")
    r_in, r_out = cutoff
    if not 0 < r_in < r_out:
        raise InvalidParams("cutoff radii must satisfy 0 < r_in < r_out")
    c1, c2 = center
    if (c1 - r_out < 0 or c1 + r_out > grid.L1 or c2 - r_out < 0 or c2 + r_out > grid.L2):
        raise InvalidParams("support of the bump must stay inside the box")
    u = _bump_profile(grid, amplitude, width, twist, center, cutoff)
    if mu == 1 and np.max(np.abs(u)) >= np.pi:
        raise InvalidParams("bump amplitude too large for a degree-zero map")
    vals = chart(mu, u)
    return SpinField(grid, project_to_target(mu, vals), mu)


# frames ------------------------------------------------------------------

REFERENCES = ((0.0, 1.0, 0.0), (0.0, 0.0, 1.0))


def arbitrary_frame(f: SpinField, references=REFERENCES, tol: float = 0.1) -> Frame:
    """Project a fixed reference into the tangent plane, falling back where it degenerates."""
    mu, s = f.mu, f.values
    shape = s.shape[1:]
    v = np.zeros_like(s)
    done = np.zeros(shape, dtype=bool)
    for ref in references:
        r = np.broadcast_to(np.asarray(ref, float)[:, None, None], s.shape)
        t = tangent_project(mu, s, r)
        n2 = dot_mu(mu, t, t)
        use = (~done) & (n2 > tol)
        v[:, use] = t[:, use] / np.sqrt(n2[use])
        done |= use
    if not np.all(done):
        raise DegenerateFrame("no reference vector has a usable tangent projection")
    w = cross_mu(mu, s, v)
    return Frame(v, w)


def restore_frame(mu, s, v, w):
    """Tangent projection plus symmetric orthonormalisation of ``(v, w)``.

    The symmetric (Loewdin) choice commutes with rotations of the pair, so
    it does not favour either vector.
    """
    a = tangent_project(mu, s, v)
    b = tangent_project(mu, s, w)
    g11 = dot_mu(mu, a, a)
    g12 = dot_mu(mu, a, b)
    g22 = dot_mu(mu, b, b)
    d = np.sqrt(np.maximum(g11 * g22 - g12**2, 0.0))
    t = np.sqrt(g11 + g22 + 2 * d)
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = 1.0 / (t * d)
    m11 = (g22 + d) * scale
    m12 = -g12 * scale
    v2 = a * m11 + b * m12
    v2 = v2 / np.sqrt(dot_mu(mu, v2, v2))
    w2 = cross_mu(mu, s, v2)
    return v2, w2


def frame_residuals(f: SpinField, frame: Frame) -> dict:
    mu, s, v, w = f.mu, f.values, frame.v, frame.w
    return {
        "v_norm": float(np.max(np.abs(dot_mu(mu, v, v) - 1))),
        "w_norm": float(np.max(np.abs(dot_mu(mu, w, w) - 1))),
        "vw": float(np.max(np.abs(dot_mu(mu, v, w)))),
        "sv": float(np.max(np.abs(dot_mu(mu, s, v)))),
        "sw": float(np.max(np.abs(dot_mu(mu, s, w)))),
        "w_is_sxv": float(np.max(np.abs(w - cross_mu(mu, s, v)))),
        "target": target_residual(mu, s),
    }


def gauge_invariant_products(ws: SpectralWorkspace, f: SpinField, frame: Frame):
    """``P[l, m] = phi_l conj(phi_m)`` for ``l, m`` in ``{1, 2}``, shape ``(2, 2, n1, n2)``."""
    phi = _phi(ws, f, frame)
    return phi[:, None] * np.conj(phi[None, :])


def spin_derivatives(ws: SpectralWorkspace, f: SpinField):
    return np.stack([ws.apply(ws.deriv_symbol(m), f.values).real for m in (1, 2)])


def _phi(ws, f, frame, ds=None):
    if ds is None:
        ds = spin_derivatives(ws, f)
    mu = f.mu
    return np.stack([dot_mu(mu, frame.v, ds[m]) + 1j * dot_mu(mu, frame.w, ds[m]) for m in (0, 1)])


def q12_from_products(products, mu: int):
    return mu * products[0, 1].imag


def coulomb_from_q(ws: SpectralWorkspace, q):
    """``A2 = -|grad|^{-1} R1 q`` and ``A1 = |grad|^{-1} R2 q``."""
    qh = ws.fft(q)
    a1 = ws.ifft(ws.inv_grad * ws.r2 * qh).real
    a2 = ws.ifft(-ws.inv_grad * ws.r1 * qh).real
    return a1, a2


def coulomb_coefficients(ws: SpectralWorkspace, products, mu: int):
    return coulomb_from_q(ws, q12_from_products(products, mu))


def default_base_vector(f: SpinField):
    """A unit tangent vector at the grid corner ``f(0, 0)``."""
    corner = SpinField(Grid(8, 8, 1.0, 1.0), np.broadcast_to(f.values[:, :1, :1], (3, 8, 8)), f.mu)
    return arbitrary_frame(corner).v[:, 0, 0].copy()


def _transport_rhs(mu, s, ds, a, x):
    return -mu * s * dot_mu(mu, ds, x) + cross_mu(mu, s, x) * a


def _rk4_frame(mu, h, c0, cm, c1, v, w):
    """One RK4 step of the linear transport for both frame vectors."""
    out = []
    for x in (v, w):
        k1 = _transport_rhs(mu, *c0, x)
        k2 = _transport_rhs(mu, *cm, x + 0.5 * h * k1)
        k3 = _transport_rhs(mu, *cm, x + 0.5 * h * k2)
        k4 = _transport_rhs(mu, *c1, x + h * k3)
        out.append(x + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4))
    return out


def _samples(fields, axis, length, n, substeps):
    """Fields sampled at fractional offsets ``j / (2 K)`` of a cell along ``axis``."""
    dx = length / n
    out = []
    for j in range(2 * substeps):
        if j == 0:
            out.append(fields)
        else:
            out.append(tuple(shift_axis(g, axis, j * dx / (2 * substeps), length) for g in fields))
    return out


def _advance(mu, samples, idx, nxt, take, v, w, h, substeps):
    """Advance from cell ``idx`` to ``nxt`` with ``substeps`` RK4 steps."""
    for k in range(substeps):
        a = take(samples[2 * k], idx)
        m = take(samples[2 * k + 1], idx)
        b = take(samples[2 * k + 2], idx) if 2 * k + 2 < 2 * substeps else take(samples[0], nxt)
        v, w = _rk4_frame(mu, h, a, m, b, v, w)
        v, w = restore_frame(mu, b[0], v, w)
    return v, w


def _angle(mu, v_end, v0, w0):
    return float(np.arctan2(dot_mu(mu, v_end, w0), dot_mu(mu, v_end, v0)))


def coulomb_frame(ws: SpectralWorkspace, f: SpinField, a1, a2, base=None, substeps: int = 1) -> Frame:
    """Integrate ``d_m X = -mu s (d_m s . X) + (s x X) A_m`` from the corner.

    The frame at ``(0, 0)`` is ``(Q, f(0,0) x Q)``.  Transport runs along the
    first row, then up every column, with RK4 steps of ``dx / substeps``.
    Coefficients at half steps come from exact trigonometric interpolation.
    ``info['holonomy']`` records the rotation angle picked up when the
    transport is continued once around each periodic direction.
    """
    mu = f.mu
    g = f.grid
    if substeps < 1:
        raise InvalidParams("substeps must be >= 1")
    s = f.values
    Q = default_base_vector(f) if base is None else np.asarray(base, dtype=float)
    s00 = s[:, 0, 0]
    if abs(dot_mu(mu, Q, s00)) > 1e-10 or abs(dot_mu(mu, Q, Q) - 1) > 1e-10:
        raise DegenerateFrame("base vector must be a unit tangent vector at f(0, 0)")
    ds = spin_derivatives(ws, f)
    n1, n2 = g.shape
    v = np.zeros_like(s)
    w = np.zeros_like(s)
    v[:, 0, 0] = Q
    w[:, 0, 0] = cross_mu(mu, s00, Q)

    # first row, along x1
    row = (s[:, :, 0], ds[0][:, :, 0], a1[:, 0])
    rs = _samples(row, -1, g.L1, n1, substeps)

    def take_row(sample, i):
        return sample[0][:, i], sample[1][:, i], sample[2][i]

    h1 = g.dx1 / substeps
    vi, wi = v[:, 0, 0], w[:, 0, 0]
    for i in range(n1 - 1):
        vi, wi = _advance(mu, rs, i, i + 1, take_row, vi, wi, h1, substeps)
        v[:, i + 1, 0], w[:, i + 1, 0] = vi, wi
    v_wrap, _ = _advance(mu, rs, n1 - 1, 0, take_row, vi, wi, h1, substeps)
    hol1 = _angle(mu, v_wrap, Q, w[:, 0, 0])

    # every column, along x2
    col = (s, ds[1], a2)
    cs = _samples(col, -1, g.L2, n2, substeps)

    def take_col(sample, j):
        return sample[0][:, :, j], sample[1][:, :, j], sample[2][:, j]

    h2 = g.dx2 / substeps
    vj, wj = v[:, :, 0], w[:, :, 0]
    for j in range(n2 - 1):
        vj, wj = _advance(mu, cs, j, j + 1, take_col, vj, wj, h2, substeps)
        v[:, :, j + 1], w[:, :, j + 1] = vj, wj
    v_wrap, _ = _advance(mu, cs, n2 - 1, 0, take_col, vj, wj, h2, substeps)
    hol2 = _angle(mu, v_wrap[:, 0], Q, w[:, 0, 0])

    frame = Frame(v, w, {"holonomy": (hol1, hol2), "substeps": substeps})
    if not (np.all(np.isfinite(v)) and np.all(np.isfinite(w))):
        raise FrameDrift("frame transport produced non-finite values")
    res = frame_residuals(f, frame)
    worst = max(res[k] for k in ("v_norm", "w_norm", "vw", "sv", "sw"))
    if worst > 1e-6:
        raise FrameDrift(f"frame constraints violated by {worst:.3e}")
    return frame


def differentiated_fields(ws: SpectralWorkspace, f: SpinField, frame: Frame, epsilon: int = 1) -> PsiPair:
    return PsiPair(_phi(ws, f, frame), f.mu, epsilon)


def compatibility_residual(ws: SpectralWorkspace, psi, a1, a2) -> float:
    """L2 norm of ``(d1 + i A1) psi2 - (d2 + i A2) psi1``."""
    p = psi.psi if isinstance(psi, PsiPair) else np.asarray(psi)
    r = ws.apply(ws.d1, p[1]) + 1j * a1 * p[1] - ws.apply(ws.d2, p[0]) - 1j * a2 * p[0]
    return float(np.sqrt(np.sum(np.abs(r) ** 2) * ws.grid.cell_area))


def _fd4(x, axis, h):
    """Fourth-order centred difference, valid away from the two end cells."""
    xp1 = np.roll(x, -1, axis)
    xm1 = np.roll(x, 1, axis)
    xp2 = np.roll(x, -2, axis)
    xm2 = np.roll(x, 2, axis)
    return (8 * (xp1 - xm1) - (xp2 - xm2)) / (12 * h)


def coulomb_residual(f: SpinField, frame: Frame, a1, a2) -> tuple[float, float]:
    """Max of ``|w . d_m v - A_m|`` away from the seams.

    The frame is not periodic (it carries holonomy), so derivatives are
    taken by finite differences on interior points.
    """
    mu, g = f.mu, f.grid
    out = []
    for m, (a, h) in enumerate(((a1, g.dx1), (a2, g.dx2))):
        axis = 1 + m
        dv = _fd4(frame.v, axis, h)
        r = np.abs(dot_mu(mu, frame.w, dv) - a)
        sl = [slice(None), slice(None)]
        sl[m] = slice(2, -2)
        out.append(float(np.max(r[tuple(sl)])))
    return tuple(out)


def gauge_covariance(phi_a, phi_b, threshold: float = 1e-8):
    """Estimate the unit ``z`` with ``phi_b = z phi_a`` where ``|phi_a|`` is large.

    Returns ``(z, spread)`` where ``spread`` is the largest deviation of the
    pointwise ratio from ``z``.
    """
    a = np.asarray(phi_a.psi if isinstance(phi_a, PsiPair) else phi_a)
    b = np.asarray(phi_b.psi if isinstance(phi_b, PsiPair) else phi_b)
    mask = np.abs(a) > threshold * max(np.max(np.abs(a)), 1e-300)
    if not np.any(mask):
        return 1.0 + 0j, 0.0
    ratio = b[mask] / a[mask]
    z = np.sum(np.conj(a[mask]) * b[mask])
    z = z / abs(z) if abs(z) > 0 else 1.0 + 0j
    return complex(z), float(np.max(np.abs(ratio - z)))


@dataclass(frozen=True)
class GaugeData:
    """Everything produced by the static construction at one time."""

    spin: SpinField
    frame: Frame
    psi: PsiPair
    a1: np.ndarray
    a2: np.ndarray
    q12: np.ndarray


def build_gauge(ws: SpectralWorkspace, f: SpinField, epsilon: int = 1, base=None, substeps: int = 1) -> GaugeData:
    """Run the full static construction on ``f``."""
    if f.grid != ws.grid:
        raise ShapeMismatch("spin field and workspace grids differ")
    frame0 = arbitrary_frame(f)
    prods = gauge_invariant_products(ws, f, frame0)
    q = q12_from_products(prods, f.mu)
    a1, a2 = coulomb_from_q(ws, q)
    frame = coulomb_frame(ws, f, a1, a2, base=base, substeps=substeps)
    psi = differentiated_fields(ws, f, frame, epsilon)
    return GaugeData(f, frame, psi, a1, a2, q)
