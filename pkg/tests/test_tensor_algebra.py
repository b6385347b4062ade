from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spingauge.errors import DegenerateVector, WrongSignature
from spingauge.tensor_algebra import (
    Signature,
    cross_mu,
    dot_mu,
    project_to_target,
    tangent_project,
    target_residual,
)

vec = st.lists(st.floats(-10, 10, allow_nan=False), min_size=3, max_size=3).map(np.array)
signs = st.sampled_from([1, -1])


def test_spec_examples():
    e0, e1, e2 = np.eye(3)
    assert dot_mu(-1, e0, e0) == -1
    assert np.array_equal(cross_mu(1, e1, e2), e0)
    assert np.array_equal(cross_mu(-1, e1, e2), -e0)


def test_project_examples():
    np.testing.assert_allclose(project_to_target(1, [3.0, 0, 4.0]), [0.6, 0, 0.8])
    np.testing.assert_allclose(project_to_target(-1, [2.0, 0, 0]), [1.0, 0, 0])
    with pytest.raises(DegenerateVector):
        project_to_target(-1, [1.0, 1.0, 0.0])  # light cone
    with pytest.raises(DegenerateVector):
        project_to_target(-1, [-2.0, 0.0, 0.0])  # lower sheet
    with pytest.raises(DegenerateVector):
        project_to_target(1, [0.0, 0.0, 0.0])


def test_signature_validation():
    with pytest.raises(WrongSignature):
        Signature(0, 1)
    with pytest.raises(WrongSignature):
        project_to_target(2, [1.0, 0, 0])


@settings(max_examples=200, deadline=None)
@given(signs, vec, vec)
def test_cross_is_orthogonal(mu, a, b):
    c = cross_mu(mu, a, b)
    scale = 1 + np.linalg.norm(a) ** 2 * np.linalg.norm(b)
    assert abs(dot_mu(mu, a, c)) <= 1e-12 * scale
    assert abs(dot_mu(mu, b, c)) <= 1e-12 * (1 + np.linalg.norm(b) ** 2 * np.linalg.norm(a))


@settings(max_examples=200, deadline=None)
@given(signs, vec, vec)
def test_lagrange_identity(mu, a, b):
    c = cross_mu(mu, a, b)
    lhs = dot_mu(mu, c, c)
    rhs = mu * dot_mu(mu, a, a) * dot_mu(mu, b, b) - mu * dot_mu(mu, a, b) ** 2
    assert abs(lhs - rhs) <= 1e-10 * (1 + (np.linalg.norm(a) * np.linalg.norm(b)) ** 2)


@settings(max_examples=100, deadline=None)
@given(signs, vec)
def test_projection_lands_on_target(mu, p):
    if mu == -1:
        p = p.copy()
        p[0] = np.sqrt(p[1] ** 2 + p[2] ** 2) + 0.5 + abs(p[0])
    elif np.linalg.norm(p) < 1e-3:
        return
    s = project_to_target(mu, p)
    assert target_residual(mu, s) < 1e-12


def test_frame_relations(rng):
    for mu in (1, -1):
        for _ in range(20):
            p = rng.normal(size=3)
            if mu == -1:
                p[0] = np.hypot(p[1], p[2]) + 1.0
            s = project_to_target(mu, p)
            v = tangent_project(mu, s, rng.normal(size=3))
            v = v / np.sqrt(dot_mu(mu, v, v))
            w = cross_mu(mu, s, v)
            np.testing.assert_allclose(cross_mu(mu, v, w), mu * s, atol=1e-12)
            np.testing.assert_allclose(cross_mu(mu, w, s), v, atol=1e-12)
            np.testing.assert_allclose(cross_mu(mu, s, w), -v, atol=1e-12)
            assert abs(dot_mu(mu, w, w) - 1) < 1e-12


def test_vectorised_shapes(rng):
    a = rng.normal(size=(3, 4, 5))
    b = rng.normal(size=(3, 4, 5))
    assert dot_mu(1, a, b).shape == (4, 5)
    assert cross_mu(-1, a, b).shape == (3, 4, 5)
    np.testing.assert_allclose(cross_mu(1, a, b), np.cross(a, b, axis=0))
