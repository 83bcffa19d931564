"""Operators on ordered, labelled tensor factors.

The leftmost wire is the most significant index of the composite (row-major)
basis, so an operator on wires ``(A, B)`` has matrix entries indexed by
``a * dim(B) + b``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .config import TOL
from .errors import DimensionMismatch, DuplicateWire, NotHermitian, UnknownWire


@dataclass(frozen=True)
class Wire:
    label: str
    dim: int

    def __post_init__(self):
        if int(self.dim) < 1:
            raise DimensionMismatch(f"wire {self.label!r} has dimension {self.dim}")


@dataclass(frozen=True, eq=False)
class LabeledOperator:
    """A dense square matrix acting on an ordered tuple of wires."""

    wires: tuple[Wire, ...]
    matrix: np.ndarray

    def __post_init__(self):
        wires = tuple(self.wires)
        labels = [w.label for w in wires]
        if len(set(labels)) != len(labels):
            raise DuplicateWire(f"repeated wire labels in {labels}")
        matrix = np.array(self.matrix, dtype=complex)
        side = int(np.prod([w.dim for w in wires], dtype=int))
        if matrix.shape != (side, side):
            raise DimensionMismatch(
                f"matrix shape {matrix.shape} does not match wires {labels} (side {side})"
            )
        matrix.setflags(write=False)
        object.__setattr__(self, "wires", wires)
        object.__setattr__(self, "matrix", matrix)

    @classmethod
    def on(cls, matrix, *wires: tuple[str, int] | Wire) -> "LabeledOperator":
        """Shorthand: ``LabeledOperator.on(m, ("A", 2), ("B", 2))``."""
        return cls(tuple(w if isinstance(w, Wire) else Wire(*w) for w in wires), matrix)

    @classmethod
    def identity(cls, *wires: tuple[str, int] | Wire) -> "LabeledOperator":
        ws = tuple(w if isinstance(w, Wire) else Wire(*w) for w in wires)
        return cls(ws, np.eye(int(np.prod([w.dim for w in ws], dtype=int))))

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(w.label for w in self.wires)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(w.dim for w in self.wires)

    @property
    def side(self) -> int:
        return self.matrix.shape[0]

    def dim_of(self, label: str) -> int:
        for w in self.wires:
            if w.label == label:
                return w.dim
        raise UnknownWire(label)

    def trace(self) -> complex:
        return complex(np.trace(self.matrix))

    def dagger(self) -> "LabeledOperator":
        return LabeledOperator(self.wires, self.matrix.conj().T)

    def scaled(self, factor: complex) -> "LabeledOperator":
        return LabeledOperator(self.wires, factor * self.matrix)

    def relabel(self, mapping: dict[str, str]) -> "LabeledOperator":
        wires = tuple(Wire(mapping.get(w.label, w.label), w.dim) for w in self.wires)
        return LabeledOperator(wires, self.matrix)

    def as_tensor(self) -> np.ndarray:
        """Reshape to ``(d_1, ..., d_k, d_1, ..., d_k)`` (row axes, then column axes)."""
        return self.matrix.reshape(self.dims + self.dims)

    def __add__(self, other: "LabeledOperator") -> "LabeledOperator":
        other = permute_wires(other, self.labels)
        return LabeledOperator(self.wires, self.matrix + other.matrix)

    def __sub__(self, other: "LabeledOperator") -> "LabeledOperator":
        other = permute_wires(other, self.labels)
        return LabeledOperator(self.wires, self.matrix - other.matrix)

    def __matmul__(self, other: "LabeledOperator") -> "LabeledOperator":
        other = permute_wires(other, self.labels)
        return LabeledOperator(self.wires, self.matrix @ other.matrix)

    def __repr__(self) -> str:
        wires = ", ".join(f"{w.label}:{w.dim}" for w in self.wires)
        return f"LabeledOperator([{wires}], side={self.side})"


def _check_labels(op: LabeledOperator, labels: Iterable[str]) -> list[str]:
    labels = list(labels)
    missing = [l for l in labels if l not in op.labels]
    if missing:
        raise UnknownWire(f"{missing} not among {list(op.labels)}")
    return labels


def tensor(p: LabeledOperator, q: LabeledOperator) -> LabeledOperator:
    common = set(p.labels) & set(q.labels)
    if common:
        raise DuplicateWire(f"tensor of operators sharing wires {sorted(common)}")
    return LabeledOperator(p.wires + q.wires, np.kron(p.matrix, q.matrix))


def tensor_all(ops: Sequence[LabeledOperator]) -> LabeledOperator:
    out = ops[0]
    for op in ops[1:]:
        out = tensor(out, op)
    return out


def permute_wires(p: LabeledOperator, order: Sequence[str]) -> LabeledOperator:
    order = list(order)
    if sorted(order) != sorted(p.labels) or len(set(order)) != len(order):
        raise UnknownWire(f"order {order} is not a permutation of {list(p.labels)}")
    if tuple(order) == p.labels:
        return p
    perm = [p.labels.index(l) for l in order]
    k = len(perm)
    t = p.as_tensor().transpose(perm + [k + i for i in perm])
    wires = tuple(p.wires[i] for i in perm)
    return LabeledOperator(wires, t.reshape(p.side, p.side))


def partial_trace(p: LabeledOperator, labels: Iterable[str]) -> LabeledOperator:
    """Trace out ``labels``; the remaining wires keep their relative order."""
    labels = set(_check_labels(p, labels))
    if not labels:
        return p
    k = len(p.wires)
    keep = [i for i, w in enumerate(p.wires) if w.label not in labels]
    # einsum sublists: shared index for traced row/column axes
    rows = list(range(k))
    cols = [i if p.wires[i].label in labels else k + i for i in range(k)]
    out = [i for i in keep] + [k + i for i in keep]
    t = np.einsum(p.as_tensor(), rows + cols, out)
    wires = tuple(p.wires[i] for i in keep)
    side = int(np.prod([w.dim for w in wires], dtype=int))
    return LabeledOperator(wires, np.asarray(t).reshape(side, side))


def partial_transpose(p: LabeledOperator, labels: Iterable[str]) -> LabeledOperator:
    labels = set(_check_labels(p, labels))
    k = len(p.wires)
    axes = list(range(2 * k))
    for i, w in enumerate(p.wires):
        if w.label in labels:
            axes[i], axes[k + i] = k + i, i
    t = p.as_tensor().transpose(axes)
    return LabeledOperator(p.wires, t.reshape(p.side, p.side))


def is_hermitian(p: LabeledOperator | np.ndarray, tol: float | None = None) -> bool:
    m = p.matrix if isinstance(p, LabeledOperator) else np.asarray(p)
    tol = TOL.herm if tol is None else tol
    scale = max(np.linalg.norm(m), 1.0)
    return np.linalg.norm(m - m.conj().T) <= tol * scale


def hermitian_eigen(p: LabeledOperator) -> tuple[np.ndarray, np.ndarray]:
    """Ascending eigenvalues and orthonormal eigenvector columns of a Hermitian operator."""
    m = p.matrix
    norm = np.linalg.norm(m)
    if np.linalg.norm(m - m.conj().T) > TOL.herm * max(norm, 1e-300):
        raise NotHermitian(f"||P - P^dag||_F = {np.linalg.norm(m - m.conj().T):.3e}")
    vals, vecs = np.linalg.eigh((m + m.conj().T) / 2)
    return vals, vecs


def frobenius_distance(p: LabeledOperator, q: LabeledOperator) -> float:
    q = permute_wires(q, p.labels)
    return float(np.linalg.norm(p.matrix - q.matrix))


def projector(vector, *wires: tuple[str, int] | Wire) -> LabeledOperator:
    """``|v><v|`` on the given wires (``v`` is not normalised)."""
    v = np.asarray(vector, dtype=complex).reshape(-1)
    return LabeledOperator.on(np.outer(v, v.conj()), *wires)
