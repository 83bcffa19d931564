import numpy as np
import pytest
from scipy.linalg import expm

from procmat.dynamics import (
    Constant,
    PiecewiseConstant,
    ProbeTimes,
    ProductTerms,
    PulseTrain,
    expm_hermitian,
    propagator,
    segment_unitaries,
)
from procmat.errors import InvalidInterval, NotHermitian, ValidationError, WireMismatch
from procmat.operators import SWAP, X, Z, heisenberg
from procmat.randomness import random_hermitian
from procmat.structure import simultaneous_eigenbasis, env_blocks
from procmat.tensor import LabeledOperator, Wire

SE = (Wire("S", 2), Wire("E", 2))


def op(m):
    return LabeledOperator(SE, m)


def test_expm_hermitian_swap():
    h = op(SWAP)
    assert np.allclose(expm_hermitian(h, 2 * np.pi).matrix, np.eye(4), atol=1e-12)
    for theta in (0.3, 1.1, 2.5):
        assert np.allclose(expm_hermitian(h, theta).matrix, np.cos(theta) * np.eye(4) - 1j * np.sin(theta) * SWAP)
    assert np.allclose(expm_hermitian(h, 0.0).matrix, np.eye(4))
    with pytest.raises(NotHermitian):
        expm_hermitian(op(np.triu(np.ones((4, 4)))), 1.0)


def test_expm_matches_scipy(rng):
    h = random_hermitian(4, rng)
    assert np.allclose(expm_hermitian(op(h), 0.37).matrix, expm(-1j * 0.37 * h))


def test_pulse_train_identity():
    spec = PulseTrain(((0.5, op(2 * np.pi * SWAP)), (1.5, op(2 * np.pi * SWAP))))
    for t0, t1 in [(0, 1), (0, 2), (0.6, 3.0), (1.5, 4)]:
        assert np.abs(propagator(spec, t0, t1).matrix - np.eye(4)).max() < 1e-12


def test_pulse_train_with_base():
    base = op(heisenberg(1.0, 0.2))
    kick = op(0.4 * np.kron(X, X))
    spec = PulseTrain(((1.0, kick),), base)
    u = propagator(spec, 0.0, 2.0).matrix
    b = expm(-1j * base.matrix)
    assert np.allclose(u, b @ expm(-1j * kick.matrix) @ b)
    # a pulse at the left edge is not in (t0, t1]
    assert np.allclose(propagator(spec, 1.0, 2.0).matrix, b)


def test_piecewise_single_segment(rng):
    h = op(random_hermitian(4, rng))
    spec = PiecewiseConstant(((0.0, 1.0, h),))
    assert np.allclose(propagator(spec, 0.2, 0.9).matrix, expm_hermitian(h, 0.7).matrix)


def test_piecewise_composition(rng):
    spec = PiecewiseConstant(((0.0, 1.0, op(random_hermitian(4, rng))), (1.0, 2.5, op(random_hermitian(4, rng)))))
    u02 = propagator(spec, 0.3, 2.2).matrix
    u01 = propagator(spec, 0.3, 1.4).matrix
    u12 = propagator(spec, 1.4, 2.2).matrix
    assert np.linalg.norm(u02 - u12 @ u01) < 1e-10
    # outside the segments the Hamiltonian is zero
    assert np.allclose(propagator(spec, 2.5, 4.0).matrix, np.eye(4))


def test_piecewise_validation(rng):
    h = op(random_hermitian(4, rng))
    with pytest.raises(InvalidInterval):
        PiecewiseConstant(((0.0, 1.0, h), (1.5, 2.0, h)))
    with pytest.raises(InvalidInterval):
        PiecewiseConstant(((1.0, 1.0, h),))
    with pytest.raises(WireMismatch):
        PiecewiseConstant(((0.0, 1.0, h), (1.0, 2.0, LabeledOperator.on(np.eye(4), ("S", 2), ("F", 2)))))


def test_product_terms_commuting_exact():
    w, dt = 0.9, 1.3
    s, e = LabeledOperator.on(Z, ("S", 2)), LabeledOperator.on(Z, ("E", 2))
    spec = ProductTerms(((lambda t: w, s, e),))
    u = propagator(spec, 0.0, dt, slices=1000).matrix
    assert np.linalg.norm(u - expm(-1j * w * dt * np.kron(Z, Z))) <= 1e-9


def test_product_terms_second_order(rng):
    s1, s2 = LabeledOperator.on(X, ("S", 2)), LabeledOperator.on(Z, ("S", 2))
    e1 = LabeledOperator.on(Z, ("E", 2))
    spec = ProductTerms(((lambda t: np.cos(3 * t), s1, e1), (lambda t: 1.0 + t, s2, None)))
    ref = propagator(spec, 0.0, 1.0, slices=2000).matrix
    e40 = np.linalg.norm(propagator(spec, 0.0, 1.0, slices=20).matrix - ref)
    e80 = np.linalg.norm(propagator(spec, 0.0, 1.0, slices=40).matrix - ref)
    assert e40 / e80 >= 3


def test_product_terms_controlled_form():
    """Commuting environment factors give a controlled unitary in their eigenbasis."""
    s1, s2 = LabeledOperator.on(X, ("S", 2)), LabeledOperator.on(Z, ("S", 2))
    e1 = LabeledOperator.on(Z, ("E", 2))
    e2 = LabeledOperator.on(np.diag([0.5, -2.0]), ("E", 2))
    spec = ProductTerms(((lambda t: np.sin(t), s1, e1), (lambda t: 0.3, s2, e2)), window=(0, 2))
    u = propagator(spec, 0.0, 2.0, slices=400).matrix
    basis = simultaneous_eigenbasis(env_blocks(spec))
    expected = np.zeros((4, 4), dtype=complex)
    for k in range(2):
        v = basis[:, k]
        cond = propagator(spec.conditional(v), 0.0, 2.0, slices=400).matrix
        expected += np.kron(cond, np.outer(v, v.conj()))
    assert np.linalg.norm(u - expected) < 1e-8


def test_segment_unitaries_swap():
    spec = Constant(op(SWAP))
    us = segment_unitaries(spec, ProbeTimes((0, 2 * np.pi, 4 * np.pi)))
    assert len(us) == 2 and all(np.allclose(u.matrix, np.eye(4), atol=1e-12) for u in us)
    (u,) = segment_unitaries(spec, [np.pi / 2, 5 * np.pi / 2])
    # the step spans 2 pi, so it is the identity ...
    assert np.allclose(u.matrix, np.eye(4), atol=1e-12)
    # ... while a step of (4n+1) pi / 2 gives -i SWAP
    for gap in (np.pi / 2, 5 * np.pi / 2):
        (u,) = segment_unitaries(spec, [0.0, gap])
        assert np.allclose(u.matrix, -1j * SWAP, atol=1e-12)


def test_probe_times_validation():
    with pytest.raises(ValidationError):
        ProbeTimes((1.0,))
    with pytest.raises(ValidationError):
        ProbeTimes((0.0, 1.0, 1.0))
    with pytest.raises(InvalidInterval):
        propagator(Constant(op(SWAP)), 1.0, 1.0)


def test_propagators_unitary(rng):
    spec = PiecewiseConstant(tuple((k, k + 1.0, op(random_hermitian(4, rng))) for k in range(3)))
    for u in segment_unitaries(spec, [0.0, 0.5, 2.2, 3.0]):
        assert np.linalg.norm(u.matrix.conj().T @ u.matrix - np.eye(4)) <= 1e-9


def test_heisenberg_spectrum():
    # closed form: -3J, J - 2B, J, J + 2B
    vals = np.linalg.eigvalsh(heisenberg(1.0, 0.5))
    assert np.allclose(vals, [-3.0, 0.0, 1.0, 2.0])
