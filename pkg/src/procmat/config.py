"""Global numerical tolerances."""
from __future__ import annotations

import contextlib
import dataclasses
from typing import Iterator


@dataclasses.dataclass
class Tolerances:
    herm: float = 1e-9          # relative Frobenius, Hermiticity
    eig: float = 1e-9           # relative Frobenius, eigendecomposition residual
    unitary: float = 1e-9       # ||U^dag U - 1||_F
    tp: float = 1e-9            # trace preservation of Choi operators
    psd_floor: float = 1e-9     # most negative eigenvalue tolerated (then clamped)
    commute: float = 1e-8       # commutator norm, scaled by operator norms
    degeneracy: float = 1e-8    # eigenvalue gap treated as degenerate
    negativity: float = 1e-7    # threshold for "entanglement witnessed"
    zero_branch: float = 1e-12  # branch weights below this are dropped


TOL = Tolerances()


@contextlib.contextmanager
def tolerances(**overrides: float) -> Iterator[Tolerances]:
    """Temporarily override fields of the global :data:`TOL`."""
    saved = dataclasses.replace(TOL)
    for key, value in overrides.items():
        if not hasattr(TOL, key):
            raise AttributeError(f"unknown tolerance {key!r}")
        setattr(TOL, key, value)
    try:
        yield TOL
    finally:
        for field in dataclasses.fields(Tolerances):
            setattr(TOL, field.name, getattr(saved, field.name))
