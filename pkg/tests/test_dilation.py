import numpy as np
import pytest

from procmat.choi import choi_of_kraus, choi_of_unitary, measure_and_prepare, Instrument
from procmat.dilation import (
    DilatedCircuit,
    Gate,
    Prepare,
    assemble_controlled,
    classical_memory_circuit,
    classical_memory_circuit_process,
    complete_columns,
    dilate_mixed_unitary,
    instrument_dilation,
    stochastic_control,
    stochastic_controls,
)
from procmat.errors import BadDistribution, DimensionMismatch, IncompleteBasis, NotUnitary, WireMismatch
from procmat.operators import X, Z
from procmat.process import ClassicalMemorySpec, build_ccc, build_classical_memory, build_from_dynamics, build_mixed_unitary
from procmat.randomness import haar_unitary, random_density, random_instrument
from procmat.structure import MixedUnitaryDecomposition
from procmat.tensor import LabeledOperator, Wire

IN, OUT = Wire("in", 2), Wire("out", 2)


def test_complete_columns(rng):
    v = haar_unitary(4, rng)[:, :2]
    u = complete_columns(v)
    assert np.allclose(u.conj().T @ u, np.eye(4))
    assert np.allclose(u[:, :2], v)


def test_assemble_controlled_cnot():
    cnot_env_control = assemble_controlled([np.eye(2), X])
    # wires (S, E): control on E
    expected = np.kron(np.eye(2), np.diag([1, 0])) + np.kron(X, np.diag([0, 1]))
    assert np.allclose(cnot_env_control.matrix, expected)
    assert cnot_env_control.labels == ("S", "E")


def test_assemble_controlled_zz_basis():
    """exp(-i w dt Z(x)Z) is controlled on the environment Z basis."""
    wdt = 0.37
    u_plus, u_minus = np.diag(np.exp(-1j * wdt * np.array([1, -1]))), np.diag(np.exp(1j * wdt * np.array([1, -1])))
    got = assemble_controlled([u_plus, u_minus]).matrix
    direct = np.diag(np.exp(-1j * wdt * np.diag(np.kron(Z, Z))))
    assert np.allclose(got, direct)


def test_assemble_controlled_errors():
    with pytest.raises(NotUnitary):
        assemble_controlled([np.eye(2), 2 * np.eye(2)])
    with pytest.raises(DimensionMismatch):
        assemble_controlled([np.eye(2), np.eye(3)])
    with pytest.raises(IncompleteBasis):
        assemble_controlled([np.eye(2), X], basis=np.eye(3)[:, :2])
    with pytest.raises(IncompleteBasis):
        assemble_controlled([np.eye(2), X], basis=np.ones((2, 2)))


def _random_decomp(rng, k, steps=2):
    p = rng.dirichlet(np.ones(k))
    return MixedUnitaryDecomposition(p, [random_density(2, rng) for _ in range(k)],
                                     [[haar_unitary(2, rng) for _ in range(steps)] for _ in range(k)])


def test_dilated_mixed_unitary_round_trip(rng):
    for k in (1, 2, 3):
        dec = _random_decomp(rng, k)
        circ = dilate_mixed_unitary(dec)
        w = circ.simulate()
        assert np.linalg.norm(w.matrix - build_mixed_unitary(dec).matrix) < 1e-10


def test_circuit_simulation_matches_joint_dynamics(rng):
    """The link-product circuit engine agrees with direct joint-unitary dynamics."""
    dec = _random_decomp(rng, 2)
    circ = dilate_mixed_unitary(dec)
    gates = [step[0].op for step in circ.steps]
    direct = build_from_dynamics(circ.initial, gates)
    assert np.linalg.norm(circ.simulate().matrix - direct.matrix) < 1e-10


def test_circuit_validation():
    rho = LabeledOperator((Wire("E", 2), Wire("S", 2)), np.eye(4) / 4)
    with pytest.raises(WireMismatch):
        DilatedCircuit(rho, ())
    rho = LabeledOperator((Wire("S", 2),), np.eye(2) / 2)
    with pytest.raises(WireMismatch):
        DilatedCircuit(rho, ((Gate(LabeledOperator((Wire("S", 2), Wire("q", 2)), np.eye(4))),),))
    with pytest.raises(NotUnitary):
        DilatedCircuit(rho, ((Gate(LabeledOperator((Wire("S", 2),), 2 * np.eye(2))),),))
    ok = DilatedCircuit(rho, ((Prepare("q", np.array([1.0, 0.0])),
                               Gate(LabeledOperator((Wire("S", 2), Wire("q", 2)), np.eye(4)))),))
    assert ok.n_sites == 2
    with pytest.raises(WireMismatch):
        DilatedCircuit(rho, ((Prepare("q", np.array([1.0, 0.0])), Prepare("q", np.array([1.0, 0.0]))),))


def test_idle_step_inserts_identity():
    rho = LabeledOperator((Wire("S", 2),), np.diag([0.25, 0.75]).astype(complex))
    w = DilatedCircuit(rho, ((),)).simulate()
    ident = np.eye(2).reshape(-1)
    assert np.allclose(w.matrix, np.kron(rho.matrix, np.outer(ident, ident)))


def test_instrument_dilation_z_measurement():
    inst = measure_and_prepare(np.eye(2), IN, OUT)
    dil = instrument_dilation(inst)
    u = dil.unitary.matrix
    assert np.allclose(u.conj().T @ u, np.eye(len(u)))
    for m in range(2):
        c = dil.branch_choi(m, IN, OUT)
        assert np.linalg.norm(c.matrix - inst.branches[m][1].matrix) < 1e-12


def test_instrument_dilation_unitary_channel(rng):
    v = haar_unitary(2, rng)
    inst = Instrument((("u", choi_of_unitary(v, IN, OUT)),))
    dil = instrument_dilation(inst)
    assert dil.dims == (2, 1, 1)
    u = dil.unitary.matrix
    assert abs(abs(np.trace(u.conj().T @ v)) - 2) < 1e-10  # equal up to a global phase


def test_instrument_dilation_random_rank2(rng):
    inst = random_instrument(2, 3, 2, rng)
    dil = instrument_dilation(inst)
    for m, (_, c) in enumerate(inst):
        assert np.linalg.norm(dil.branch_choi(m, IN, OUT).matrix - c.matrix) < 1e-10
    # measuring the outcome register of U|psi>|0>|0> reproduces the branch probabilities
    psi = haar_unitary(2, rng)[:, 0]
    d, dm, dk = dil.dims
    out = (dil.unitary.matrix @ np.kron(psi, np.eye(dm * dk)[0])).reshape(d, dm, dk)
    probs = (np.abs(out) ** 2).sum(axis=(0, 2))
    for m, (_, c) in enumerate(inst):
        rho_out = c.matrix.reshape(2, 2, 2, 2)
        direct = np.einsum("i,iaja,j->", psi, rho_out, psi.conj()).real
        assert abs(probs[m] - direct) < 1e-10


def test_stochastic_control(rng):
    r = stochastic_control([0.0, 1.0, 0.0])
    assert np.allclose(np.abs(r[:, 0]) ** 2, [0, 1, 0])
    r = stochastic_control([0.25] * 4)
    assert np.allclose(np.abs(r[:, 0]) ** 2, 0.25)
    basis = haar_unitary(3, rng)
    p = rng.dirichlet(np.ones(3))
    r = stochastic_control(p, basis)
    assert np.allclose(r.conj().T @ r, np.eye(3))
    assert np.allclose(np.abs(basis.conj().T @ r[:, 0]) ** 2, p)
    rs = stochastic_controls([[1, 0], [0.5, 0.5]])
    assert len(rs) == 2
    with pytest.raises(BadDistribution):
        stochastic_control([0.5, 0.6])
    with pytest.raises(BadDistribution):
        stochastic_control([0.5, 0.5], np.ones((2, 2)))


def _spec(rng, n_steps=2):
    fam = [[random_instrument(2, 2, 2, rng) for _ in range(2)] for _ in range(n_steps)]

    def cond(n):
        def f(s, m):
            if not m:
                return [0.3, 0.7] if s[-1] == 0 else [0.8, 0.2]
            return [0.9, 0.1] if m[-1] == 0 else [0.2, 0.8]
        return f

    return ClassicalMemorySpec([0.45, 0.55], [random_density(2, rng) for _ in range(2)], fam,
                               [cond(n) for n in range(n_steps)])


def test_classical_memory_circuit_equals_algebraic(rng):
    spec = _spec(rng)
    circ = classical_memory_circuit(spec)
    assert circ.n_sites == 3
    w = classical_memory_circuit_process(spec)
    assert np.linalg.norm(w.matrix - build_classical_memory(spec).matrix) < 1e-10


def test_classical_memory_circuit_ccc_case(rng):
    """Measurement-independent settings give a CCC process."""
    rho0, rho1 = random_density(2, rng), random_density(2, rng)
    us = [[haar_unitary(2, rng) for _ in range(2)] for _ in range(2)]
    fam = [[Instrument((("u", choi_of_unitary(us[n][s], IN, OUT)),)) for s in range(2)] for n in range(2)]
    spec = ClassicalMemorySpec([0.3, 0.7], [rho0, rho1], fam,
                               [lambda s, m: np.eye(2)[s[0]], lambda s, m: np.eye(2)[s[0]]])
    w = classical_memory_circuit_process(spec)
    ccc = build_ccc([0.3, 0.7], [rho0, rho1],
                    [[choi_of_unitary(us[n][s], IN, OUT) for n in range(2)] for s in range(2)])
    assert np.linalg.norm(w.matrix - ccc.matrix) < 1e-10


def test_kraus_dilation_of_amplitude_damping():
    g = 0.3
    k0 = np.array([[1, 0], [0, np.sqrt(1 - g)]])
    k1 = np.array([[0, np.sqrt(g)], [0, 0]])
    inst = Instrument((("all", choi_of_kraus([k0, k1], IN, OUT)),))
    dil = instrument_dilation(inst)
    assert dil.dims == (2, 1, 2)
    assert np.linalg.norm(dil.branch_choi(0, IN, OUT).matrix - inst.branches[0][1].matrix) < 1e-12


def test_classical_memory_circuit_uneven_outcome_counts(rng):
    """Settings with different numbers of outcomes leave unreachable histories."""
    fam = [[random_instrument(2, 1, 2, rng), random_instrument(2, 3, 1, rng)] for _ in range(2)]

    def first(s, m):
        return [0.5, 0.5] if s[0] == 0 else [0.2, 0.8]

    def second(s, m):
        return [[0.9, 0.1], [0.4, 0.6], [0.0, 1.0]][m[0]]

    spec = ClassicalMemorySpec([0.3, 0.7], [random_density(2, rng) for _ in range(2)], fam, [first, second])
    w = classical_memory_circuit_process(spec)
    assert np.linalg.norm(w.matrix - build_classical_memory(spec).matrix) < 1e-10
