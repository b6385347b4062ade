"""Signature-dependent inner and cross products on R^3.

Vectors are stored component-first: an array of shape ``(3, ...)`` holds a
vector field, with the trailing axes being grid axes.  For ``mu = 1`` the
target is the unit sphere; for ``mu = -1`` it is the upper sheet of the
hyperboloid ``y0**2 - y1**2 - y2**2 = 1``.  In both cases target points obey
``mu * dot_mu(mu, s, s) == 1``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateVector, WrongSignature


def check_mu(mu) -> int:
    if mu not in (1, -1):
        raise WrongSignature(f"signature must be +1 or -1, got {mu!r}")
    return int(mu)


@dataclass(frozen=True)
class Signature:
    """Target signature ``mu`` and dispersion signature ``epsilon``."""

    mu: int
    epsilon: int

    def __post_init__(self):
        check_mu(self.mu)
        if self.epsilon not in (1, -1):
            raise WrongSignature(f"epsilon must be +1 or -1, got {self.epsilon!r}")


def eta(mu: int) -> np.ndarray:
    return np.diag([float(check_mu(mu)), 1.0, 1.0])


def dot_mu(mu: int, a, b):
    """``mu*a0*b0 + a1*b1 + a2*b2`` along the leading axis."""
    a = np.asarray(a)
    b = np.asarray(b)
    return mu * a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


def cross_mu(mu: int, a, b):
    """Euclidean cross product followed by ``diag(mu, 1, 1)``."""
    a = np.asarray(a)
    b = np.asarray(b)
    return np.stack(
        (
            mu * (a[1] * b[2] - a[2] * b[1]),
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        )
    )


def tangent_project(mu: int, s, x):
    """Remove the component of ``x`` along the target point ``s``."""
    return x - mu * dot_mu(mu, x, s) * s


def project_to_target(mu: int, p):
    """Radially rescale ``p`` onto the target.

    Raises DegenerateVector when ``mu * (p . p) <= 0`` or, for the
    hyperboloid, when ``p`` points into the lower sheet.
    """
    check_mu(mu)
    p = np.asarray(p, dtype=float)
    n2 = mu * dot_mu(mu, p, p)
    if not np.all(np.isfinite(n2)) or np.any(n2 <= 0):
        raise DegenerateVector("vector cannot be rescaled onto the target")
    if mu == -1 and np.any(p[0] <= 0):
        raise DegenerateVector("vector lies in the lower sheet or the light cone")
    return p / np.sqrt(n2)


def target_residual(mu: int, s) -> float:
    """Largest violation of ``mu * s.s = 1``."""
    return float(np.max(np.abs(mu * dot_mu(mu, s, s) - 1.0)))
