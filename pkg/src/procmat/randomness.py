"""Seeded random objects for property tests and examples."""
from __future__ import annotations

import numpy as np
from scipy.stats import unitary_group

from .choi import ChoiOperator, Instrument, choi_of_kraus
from .dynamics import PiecewiseConstant
from .tensor import LabeledOperator, Wire


def rng_of(seed=None) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def haar_unitary(d: int, rng=None) -> np.ndarray:
    return unitary_group.rvs(d, random_state=rng_of(rng)) if d > 1 else np.exp(2j * np.pi * rng_of(rng).random((1, 1)))


def random_hermitian(d: int, rng=None) -> np.ndarray:
    rng = rng_of(rng)
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return (g + g.conj().T) / 2


def random_density(d: int, rng=None, rank: int | None = None) -> np.ndarray:
    """Ginibre-ensemble density matrix of the given rank (full rank by default)."""
    rng = rng_of(rng)
    g = rng.normal(size=(d, rank or d)) + 1j * rng.normal(size=(d, rank or d))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def _isometry(d_in: int, d_out_total: int, rng) -> np.ndarray:
    return haar_unitary(d_out_total, rng)[:, :d_in]


def random_channel(d: int, rng=None, n_kraus: int = 2, in_label: str = "in", out_label: str = "out") -> ChoiOperator:
    v = _isometry(d, d * n_kraus, rng_of(rng)).reshape(n_kraus, d, d)
    return choi_of_kraus(list(v), [Wire(in_label, d)], [Wire(out_label, d)])


def random_instrument(d: int, n_outcomes: int = 2, rank: int = 2, rng=None, label: str = "") -> Instrument:
    """Instrument whose branches each have ``rank`` Kraus operators from one random isometry."""
    v = _isometry(d, d * n_outcomes * rank, rng_of(rng)).reshape(n_outcomes, rank, d, d)
    branches = tuple(
        (str(m), choi_of_kraus(list(v[m]), [Wire("in", d)], [Wire("out", d)])) for m in range(n_outcomes)
    )
    return Instrument(branches, label)


def random_commuting_spec(d_s: int, d_e: int, n_segments: int, rng=None, n_terms: int = 2) -> PiecewiseConstant:
    """Piecewise-constant ``H = sum_j S_j (x) E_j`` with every ``E_j`` diagonal in one
    random environment basis (shared by all segments)."""
    rng = rng_of(rng)
    basis = haar_unitary(d_e, rng)
    wires = (Wire("S", d_s), Wire("E", d_e))
    segments, t = [], 0.0
    for _ in range(n_segments):
        h = np.zeros((d_s * d_e, d_s * d_e), dtype=complex)
        for _ in range(n_terms):
            e = basis @ np.diag(rng.normal(size=d_e)) @ basis.conj().T
            h += np.kron(random_hermitian(d_s, rng), e)
        dt = float(rng.uniform(0.2, 1.5))
        segments.append((t, t + dt, LabeledOperator(wires, (h + h.conj().T) / 2)))
        t += dt
    return PiecewiseConstant(tuple(segments))
