"""Built-in matrices: Paulis, spin-1, SWAP and the model Hamiltonians."""
from __future__ import annotations

import numpy as np
from scipy.linalg import expm

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = {"I": I2, "X": X, "Y": Y, "Z": Z}

SWAP = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex)

KETS = {
    "0": np.array([1, 0], dtype=complex),
    "1": np.array([0, 1], dtype=complex),
    "+": np.array([1, 1], dtype=complex) / np.sqrt(2),
    "-": np.array([1, -1], dtype=complex) / np.sqrt(2),
    "+i": np.array([1, 1j], dtype=complex) / np.sqrt(2),
    "-i": np.array([1, -1j], dtype=complex) / np.sqrt(2),
}


def bell_states() -> list[np.ndarray]:
    """``|Phi_0> .. |Phi_3>``: (00+11), (01+10), (01-10), (00-11), normalised."""
    s = 1 / np.sqrt(2)
    return [
        s * np.array([1, 0, 0, 1], dtype=complex),
        s * np.array([0, 1, 1, 0], dtype=complex),
        s * np.array([0, 1, -1, 0], dtype=complex),
        s * np.array([1, 0, 0, -1], dtype=complex),
    ]


def max_entangled(d: int) -> np.ndarray:
    """Normalised ``sum_i |ii> / sqrt(d)``."""
    return np.eye(d, dtype=complex).reshape(-1) / np.sqrt(d)


def spin1(axis: str) -> np.ndarray:
    s = 1 / np.sqrt(2)
    ops = {
        "x": s * np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=complex),
        "y": s * np.array([[0, -1j, 0], [1j, 0, -1j], [0, 1j, 0]], dtype=complex),
        "z": np.diag([1.0, 0.0, -1.0]).astype(complex),
    }
    return ops[axis.lower()]


def pauli_product(w: float, system: str, environment: str) -> np.ndarray:
    return w * np.kron(PAULI[system.upper()], PAULI[environment.upper()])


def heisenberg(J: float, B: float) -> np.ndarray:
    """Isotropic Heisenberg exchange plus a uniform z field on both qubits."""
    exchange = np.kron(X, X) + np.kron(Y, Y) + np.kron(Z, Z)
    field = np.kron(Z, I2) + np.kron(I2, Z)
    return J * exchange + B * field


def env_rotation(dt: float) -> np.ndarray:
    """``exp(-i X dt)`` on the environment qubit."""
    return expm(-1j * X * dt)


def cnot_generator(dt: float = 0.0) -> np.ndarray:
    """``|-><-| (x) R|1><1|R^dag`` with ``R = exp(-i X dt)``; ``exp(-i pi H)`` is a CNOT
    on the system controlled by the (rotated) environment basis."""
    minus = np.outer(KETS["-"], KETS["-"].conj())
    r = env_rotation(dt)
    one = r @ np.outer(KETS["1"], KETS["1"]) @ r.conj().T
    return np.kron(minus, one)


def nv_secular(gamma1, gamma2, gamma3, gamma4, gamma5, gamma6=0.0) -> np.ndarray:
    """Electron spin-1 (system) coupled to a 14N nuclear spin-1 (environment)."""
    sz, iz = spin1("z"), spin1("z")
    one = np.eye(3)
    h = (
        gamma1 * np.kron(sz @ sz, one)
        + gamma2 * np.kron(sz, one)
        + gamma3 * np.kron(one, iz @ iz)
        + gamma4 * np.kron(one, iz)
        + gamma5 * np.kron(sz, iz)
    )
    if gamma6:
        h = h + gamma6 * (np.kron(spin1("x"), spin1("x")) + np.kron(spin1("y"), spin1("y")))
    return h


def gell_mann(d: int) -> list[np.ndarray]:
    """Orthonormal Hermitian basis of d x d matrices (Hilbert-Schmidt), identity first."""
    basis = [np.eye(d, dtype=complex) / np.sqrt(d)]
    for j in range(d):
        for k in range(j + 1, d):
            m = np.zeros((d, d), dtype=complex)
            m[j, k] = m[k, j] = 1 / np.sqrt(2)
            basis.append(m)
            m = np.zeros((d, d), dtype=complex)
            m[j, k], m[k, j] = -1j / np.sqrt(2), 1j / np.sqrt(2)
            basis.append(m)
    for l in range(1, d):
        diag = np.zeros(d)
        diag[:l] = 1
        diag[l] = -l
        basis.append(np.diag(diag / np.sqrt(l * (l + 1))).astype(complex))
    return basis
