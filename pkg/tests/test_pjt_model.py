"""Algebraic layer: potential matrix, spectral objects, branching, gauge."""
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pjt_sim.errors import DegenerateReference, OutOfRange, SingularPoint, ZeroMomentum
from pjt_sim.pjt_model import (
    MODE_ORDER,
    Mode,
    branching_matrix,
    eigenvalues,
    eigenvector,
    gauge_matrices,
    potential_matrix,
    projector,
    transition_coefficient,
)

RT2 = np.sqrt(2.0)

# polar sampling keeps |q| bounded away from the crossing point
nonzero_points = st.tuples(
    st.floats(min_value=-6.0, max_value=1.0),   # log10 radius
    st.floats(min_value=0.0, max_value=2.0 * np.pi),
).map(lambda t: (10.0 ** t[0] * np.cos(t[1]), 10.0 ** t[0] * np.sin(t[1])))


def test_mode_enum():
    assert [m.value for m in MODE_ORDER] == [1, -1, 0]
    assert Mode.from_name("plus") is Mode.PLUS
    assert Mode.from_name("minus") is Mode.MINUS
    assert Mode.from_name("zero") is Mode.ZERO
    with pytest.raises(OutOfRange):
        Mode.from_name("middle")


def test_potential_matrix_examples():
    assert np.array_equal(potential_matrix((0.0, 0.0)), np.zeros((3, 3)))
    assert np.array_equal(potential_matrix((1.0, 0.0)), np.diag([1.0, -1.0, 0.0]))
    expect = np.array([[0.0, 0.0, 1.0], [0.0, 0.0, 1.0], [1.0, 1.0, 0.0]])
    assert np.allclose(potential_matrix((0.0, RT2)), expect, atol=1e-15)


@given(q=st.tuples(st.floats(-5, 5), st.floats(-5, 5)))
def test_potential_matrix_symmetric_traceless(q):
    v = potential_matrix(q)
    assert np.array_equal(v, v.T)
    assert v.trace() == 0.0


def test_eigenvalue_examples():
    assert eigenvalues((0.0, 0.0)) == (0.0, 0.0, 0.0)
    assert eigenvalues((3.0, 4.0)) == (-5.0, 0.0, 5.0)
    lo, mid, hi = eigenvalues((1.0, 1.0))
    assert mid == 0.0 and abs(hi - RT2) < 1e-15 and lo == -hi


@given(q=nonzero_points)
def test_eigenvalues_match_dense_solver(q):
    ours = np.array(eigenvalues(q))
    dense = np.linalg.eigvalsh(potential_matrix(q))
    assert np.all(np.diff(ours) >= 0.0)
    assert np.max(np.abs(ours - dense)) < 1e-12 * (1.0 + np.hypot(*q))


def test_projector_examples():
    assert np.allclose(projector((1.0, 0.0), Mode.PLUS), np.diag([1.0, 0.0, 0.0]),
                       atol=1e-15)
    assert np.allclose(projector((1.0, 0.0), Mode.ZERO), np.diag([0.0, 0.0, 1.0]),
                       atol=1e-15)
    q = (0.3, -0.7)
    total = sum(projector(q, m) for m in MODE_ORDER)
    assert np.allclose(total, np.eye(3), atol=1e-12)


@given(q=nonzero_points)
def test_projector_spectral_identities(q):
    mats = {m: projector(q, m) for m in MODE_ORDER}
    v = potential_matrix(q)
    r = np.hypot(*q)
    total = np.zeros((3, 3))
    for m, pi in mats.items():
        assert np.allclose(pi, pi.T, atol=1e-12)
        assert np.allclose(pi @ pi, pi, atol=1e-12)
        # eigen-relation: V Pi = (ell |q|) Pi
        assert np.max(np.abs(v @ pi - m.value * r * pi)) < 1e-12 * (1.0 + r)
        total += pi
    assert np.allclose(total, np.eye(3), atol=1e-12)
    for a in MODE_ORDER:
        for b in MODE_ORDER:
            if a is not b:
                assert np.max(np.abs(mats[a] @ mats[b])) < 1e-12


def test_projector_matches_dense_eigendecomposition():
    rng = np.random.default_rng(42)
    for _ in range(50):
        q = rng.uniform(-2, 2, size=2)
        if np.hypot(*q) < 0.05:
            continue
        w, vecs = np.linalg.eigh(potential_matrix(q))
        r = np.hypot(*q)
        for m in MODE_ORDER:
            k = int(np.argmin(np.abs(w - m.value * r)))
            dense = np.outer(vecs[:, k], vecs[:, k])
            assert np.max(np.abs(projector(q, m) - dense)) < 1e-10


def test_projector_singular_at_crossing():
    for q in ((0.0, 0.0), (1e-13, 0.0), (0.0, -1e-13)):
        with pytest.raises(SingularPoint):
            projector(q, Mode.PLUS)


def test_eigenvector_examples_and_gauge():
    e1 = np.array([1.0, 0.0, 0.0])
    e3 = np.array([0.0, 0.0, 1.0])
    assert np.allclose(eigenvector((1.0, 0.0), Mode.PLUS, e1), e1, atol=1e-15)
    assert np.allclose(eigenvector((1.0, 0.0), Mode.ZERO, e3), e3, atol=1e-15)
    rng = np.random.default_rng(3)
    for _ in range(25):
        q = rng.uniform(-2, 2, size=2)
        r = np.hypot(*q)
        if r < 0.05:
            continue
        ref = rng.normal(size=3)
        for m in MODE_ORDER:
            try:
                vec = eigenvector(q, m, ref)
            except DegenerateReference:
                continue
            assert abs(np.linalg.norm(vec) - 1.0) < 1e-12
            assert np.max(np.abs(potential_matrix(q) @ vec - m.value * r * vec)) < 1e-10
            assert vec @ ref > 0.0


def test_eigenvector_degenerate_reference():
    # Pi0 at (1,0) annihilates e1, so the sign anchor is undefined
    with pytest.raises(DegenerateReference):
        eigenvector((1.0, 0.0), Mode.ZERO, np.array([1.0, 0.0, 0.0]))


def test_transition_coefficient_values():
    assert transition_coefficient((0.3, 0.4), 0.0) == 1.0
    assert abs(transition_coefficient((1.0, 0.0), 1.0) - np.exp(-np.pi / 2)) < 1e-12
    with pytest.raises(ZeroMomentum):
        transition_coefficient((0.0, 0.0), 0.5)


@given(p=st.tuples(st.floats(0.1, 4.0), st.floats(0.0, 2 * np.pi)),
       eta=st.floats(-3.0, 3.0))
def test_transition_coefficient_range_and_decay(p, eta):
    r, th = p
    pv = (r * np.cos(th), r * np.sin(th))
    t = transition_coefficient(pv, eta)
    # positive in exact arithmetic; underflow to 0.0 is fine at slow speed
    assert 0.0 <= t <= 1.0
    assert t <= transition_coefficient(pv, eta / 2.0) + 1e-15


def test_branching_matrix_examples():
    assert np.array_equal(branching_matrix(0.0), np.eye(3))
    assert np.array_equal(branching_matrix(1.0),
                          np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 0.0],
                                    [0.0, 0.0, 1.0]]))
    half = np.array([[0.25, 0.25, 0.5], [0.25, 0.25, 0.5], [0.5, 0.5, 0.0]])
    assert np.array_equal(branching_matrix(0.5), half)
    for bad in (-0.1, 1.1):
        with pytest.raises(OutOfRange):
            branching_matrix(bad)


@given(t=st.floats(0.0, 1.0))
def test_branching_matrix_doubly_stochastic(t):
    b = branching_matrix(t)
    assert np.array_equal(b, b.T)
    assert np.all(b >= -1e-15) and np.all(b <= 1.0 + 1e-15)
    assert np.max(np.abs(b.sum(axis=0) - 1.0)) < 1e-12
    assert np.max(np.abs(b.sum(axis=1) - 1.0)) < 1e-12


def test_gauge_matrix_values():
    m, r = gauge_matrices((1.0, 0.0))
    expect_m = np.array([[1.0, 1.0, 0.0], [1.0, -1.0, 0.0],
                         [0.0, 0.0, RT2]]) / RT2
    assert np.allclose(m, expect_m, atol=1e-15)
    assert np.allclose(m @ m, np.eye(3), atol=1e-15)
    assert np.allclose(r, np.diag([1.0, -1.0, -1.0]), atol=1e-15)
    with pytest.raises(ZeroMomentum):
        gauge_matrices((0.0, 0.0))


def test_gauge_rotation_identity():
    """R(p) W(q) R(p)^T = -W(p.q/|p|, p^q/|p|) with W = M V M."""
    rng = np.random.default_rng(7)
    count = 0
    while count < 1000:
        p = rng.uniform(-3, 3, size=2)
        q = rng.uniform(-3, 3, size=2)
        np_ = np.hypot(*p)
        if np_ <= 0.1:
            continue
        count += 1
        m, r = gauge_matrices(p)
        assert np.allclose(r @ r.T, np.eye(3), atol=1e-12)
        w = m @ potential_matrix(q) @ m
        dot = (p[0] * q[0] + p[1] * q[1]) / np_
        wedge = (p[0] * q[1] - p[1] * q[0]) / np_
        w_rot = m @ potential_matrix((dot, wedge)) @ m
        assert np.max(np.abs(r @ w @ r.T + w_rot)) < 1e-12 * (1.0 + np.hypot(*q))
