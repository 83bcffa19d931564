"""Choi operators, instruments and the link product.

Choi convention: a map ``M`` from wires ``in`` to wires ``out`` is represented by
``sum_ij |i><j| (x) M(|i><j|)`` on ``in + out``; a unitary ``U`` by the rank-one
projector on ``|U>> = sum_i |i> (x) U|i>``.  All transposes are taken in the
computational basis of each wire.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .config import TOL
from .errors import (
    DimensionMismatch,
    InvalidInstrument,
    NegativeProbability,
    NotUnitary,
    WireMismatch,
)
from .tensor import LabeledOperator, Wire, partial_trace, permute_wires


def _wires(ws: Iterable[Wire | tuple[str, int]]) -> tuple[Wire, ...]:
    return tuple(w if isinstance(w, Wire) else Wire(*w) for w in ws)


def _side(ws: Sequence[Wire]) -> int:
    return int(np.prod([w.dim for w in ws], dtype=int))


@dataclass(frozen=True)
class ChoiOperator:
    op: LabeledOperator
    in_wires: tuple[str, ...]
    out_wires: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "in_wires", tuple(self.in_wires))
        object.__setattr__(self, "out_wires", tuple(self.out_wires))
        labels = set(self.in_wires) | set(self.out_wires)
        if set(self.in_wires) & set(self.out_wires) or labels != set(self.op.labels):
            raise WireMismatch(
                f"in {self.in_wires} / out {self.out_wires} do not partition {self.op.labels}"
            )

    @property
    def matrix(self) -> np.ndarray:
        return self.op.matrix

    def is_cp(self, tol: float = 1e-9) -> bool:
        return bool(np.linalg.eigvalsh(self.op.matrix).min() >= -tol * max(1.0, self.op.side))

    def tp_residual(self) -> float:
        reduced = partial_trace(self.op, self.out_wires)
        return float(np.linalg.norm(reduced.matrix - np.eye(reduced.side)))

    def is_trace_preserving(self, tol: float | None = None) -> bool:
        return self.tp_residual() <= (TOL.tp if tol is None else tol)

    def relabel(self, mapping: dict[str, str]) -> "ChoiOperator":
        return ChoiOperator(
            self.op.relabel(mapping),
            tuple(mapping.get(l, l) for l in self.in_wires),
            tuple(mapping.get(l, l) for l in self.out_wires),
        )

    def on_site(self, in_label: str, out_label: str | None) -> "ChoiOperator":
        """Rename single in/out wires (``out_label=None`` for an effect with no output)."""
        if len(self.in_wires) != 1 or len(self.out_wires) > 1:
            raise WireMismatch("site relabelling needs one input and at most one output wire")
        mapping = {self.in_wires[0]: in_label}
        if self.out_wires:
            if out_label is None:
                raise WireMismatch("operator has an output wire but the site has none")
            mapping[self.out_wires[0]] = out_label
        return self.relabel(mapping)


@dataclass(frozen=True)
class Instrument:
    """Outcome-labelled CP branches summing to a trace-preserving map."""

    branches: tuple[tuple[str, ChoiOperator], ...]
    label: str = ""

    def __post_init__(self):
        branches = tuple((str(k), c) for k, c in self.branches)
        object.__setattr__(self, "branches", branches)
        if not branches:
            raise InvalidInstrument("instrument has no branches")
        first = branches[0][1]
        for name, c in branches:
            if set(c.in_wires) != set(first.in_wires) or set(c.out_wires) != set(first.out_wires):
                raise InvalidInstrument(f"branch {name!r} acts on different wires")
            if not c.is_cp():
                raise InvalidInstrument(f"branch {name!r} is not completely positive")
        if not self.total().is_trace_preserving():
            raise InvalidInstrument("branches do not sum to a trace-preserving map")

    @property
    def outcomes(self) -> tuple[str, ...]:
        return tuple(k for k, _ in self.branches)

    def total(self) -> ChoiOperator:
        first = self.branches[0][1]
        acc = first.op.matrix.copy()
        for _, c in self.branches[1:]:
            acc = acc + permute_wires(c.op, first.op.labels).matrix
        return ChoiOperator(LabeledOperator(first.op.wires, acc), first.in_wires, first.out_wires)

    def __len__(self) -> int:
        return len(self.branches)

    def __iter__(self):
        return iter(self.branches)


def _unitarity_defect(u: np.ndarray) -> float:
    return float(np.linalg.norm(u.conj().T @ u - np.eye(u.shape[1])))


def choi_vector(m: np.ndarray) -> np.ndarray:
    """``|M>> = sum_i |i> (x) M|i>`` for a ``d_out x d_in`` matrix ``M``."""
    return np.asarray(m, dtype=complex).T.reshape(-1)


def choi_of_unitary(u: LabeledOperator | np.ndarray, in_wires, out_wires) -> ChoiOperator:
    """Rank-one Choi operator of a unitary.

    ``in_wires``/``out_wires`` are a :class:`Wire` or a list of wires (or
    ``(label, dim)`` pairs); their composite dimensions must match ``u``.
    """
    m = u.matrix if isinstance(u, LabeledOperator) else np.asarray(u, dtype=complex)
    ins = _wires([in_wires] if isinstance(in_wires, Wire) else in_wires)
    outs = _wires([out_wires] if isinstance(out_wires, Wire) else out_wires)
    if m.shape != (_side(outs), _side(ins)):
        raise DimensionMismatch(f"unitary shape {m.shape} vs in {_side(ins)} / out {_side(outs)}")
    if m.shape[0] != m.shape[1] or _unitarity_defect(m) > TOL.unitary:
        raise NotUnitary(f"||U^dag U - 1||_F = {_unitarity_defect(m):.3e}")
    v = choi_vector(m)
    op = LabeledOperator(ins + outs, np.outer(v, v.conj()))
    return ChoiOperator(op, tuple(w.label for w in ins), tuple(w.label for w in outs))


def choi_of_kraus(kraus: Sequence[LabeledOperator | np.ndarray], in_wires, out_wires) -> ChoiOperator:
    ins = _wires([in_wires] if isinstance(in_wires, Wire) else in_wires)
    outs = _wires([out_wires] if isinstance(out_wires, Wire) else out_wires)
    d_in, d_out = _side(ins), _side(outs)
    acc = np.zeros((d_in * d_out, d_in * d_out), dtype=complex)
    for k in kraus:
        m = k.matrix if isinstance(k, LabeledOperator) else np.asarray(k, dtype=complex)
        if m.shape != (d_out, d_in):
            raise DimensionMismatch(f"Kraus operator of shape {m.shape}, expected {(d_out, d_in)}")
        v = choi_vector(m)
        acc += np.outer(v, v.conj())
    op = LabeledOperator(ins + outs, acc)
    return ChoiOperator(op, tuple(w.label for w in ins), tuple(w.label for w in outs))


def kraus_from_choi(c: ChoiOperator, cutoff: float = 1e-12) -> list[np.ndarray]:
    """Canonical Kraus set: eigenvectors of the Choi operator with eigenvalue above ``cutoff``."""
    op = permute_wires(c.op, c.in_wires + c.out_wires)
    d_in = _side([w for w in op.wires if w.label in c.in_wires])
    d_out = op.side // d_in
    vals, vecs = np.linalg.eigh((op.matrix + op.matrix.conj().T) / 2)
    out = []
    for lam, v in zip(vals[::-1], vecs.T[::-1]):
        if lam <= cutoff:
            break
        out.append((np.sqrt(lam) * v).reshape(d_in, d_out).T)
    return out


def link_product(p: LabeledOperator | ChoiOperator, q: LabeledOperator | ChoiOperator) -> LabeledOperator:
    """Compose two operators on their shared wires.

    Computes ``Tr_s[(1 (x) P^{T_s}) (Q (x) 1)]`` with ``s`` the shared labels.
    The result carries P's unshared wires followed by Q's, each in original order.
    """
    p = p.op if isinstance(p, ChoiOperator) else p
    q = q.op if isinstance(q, ChoiOperator) else q
    shared = [l for l in p.labels if l in q.labels]
    for l in shared:
        if p.dim_of(l) != q.dim_of(l):
            raise DimensionMismatch(f"shared wire {l!r}: {p.dim_of(l)} vs {q.dim_of(l)}")
    if not shared:
        return LabeledOperator(p.wires + q.wires, np.kron(p.matrix, q.matrix))

    # index ids: P rows / cols, Q rows / cols; shared rows and columns coincide
    kp = len(p.wires)
    ids = iter(range(10_000))
    p_rows = [next(ids) for _ in range(kp)]
    p_cols = [next(ids) for _ in range(kp)]
    q_rows, q_cols = [], []
    for w in q.wires:
        if w.label in shared:
            i = p.labels.index(w.label)
            q_rows.append(p_rows[i])
            q_cols.append(p_cols[i])
        else:
            q_rows.append(next(ids))
            q_cols.append(next(ids))
    p_free = [i for i, l in enumerate(p.labels) if l not in shared]
    q_free = [i for i, l in enumerate(q.labels) if l not in shared]
    out = (
        [p_rows[i] for i in p_free]
        + [q_rows[i] for i in q_free]
        + [p_cols[i] for i in p_free]
        + [q_cols[i] for i in q_free]
    )
    t = np.einsum(p.as_tensor(), p_rows + p_cols, q.as_tensor(), q_rows + q_cols, out, optimize=True)
    wires = tuple(p.wires[i] for i in p_free) + tuple(q.wires[i] for i in q_free)
    side = _side(wires)
    return LabeledOperator(wires, np.asarray(t).reshape(side, side))


def link_all(ops: Sequence[LabeledOperator | ChoiOperator]) -> LabeledOperator:
    out = ops[0].op if isinstance(ops[0], ChoiOperator) else ops[0]
    for op in ops[1:]:
        out = link_product(out, op)
    return out


def born_rule(w, ops: Sequence[ChoiOperator | LabeledOperator]) -> float:
    """Outcome probability ``Tr[(M_1 (x) ... (x) M_N)^T W]``.

    ``ops[k]`` is placed on site ``k+1``: its input wire becomes ``A_I.k+1`` and
    its output (if any) ``A_O.k+1``; the final site takes an effect on ``A_I.N``.
    ``w`` is a :class:`~procmat.process.ProcessMatrix` or a labelled operator with
    the standard site labels.
    """
    op = getattr(w, "op", w)
    n_sites = sum(1 for l in op.labels if l.startswith("A_I."))
    if len(ops) != n_sites:
        raise WireMismatch(f"{len(ops)} operations for {n_sites} sites")
    placed = []
    for k, m in enumerate(ops, start=1):
        in_l, out_l = f"A_I.{k}", (f"A_O.{k}" if f"A_O.{k}" in op.labels else None)
        if isinstance(m, LabeledOperator):
            if len(m.wires) == 1:
                m = ChoiOperator(m, (m.labels[0],), ())
            else:
                m = ChoiOperator(m, (m.labels[0],), (m.labels[1],))
        if len(m.out_wires) != (1 if out_l else 0):
            raise WireMismatch(f"operation {k} does not match the wires of site {k}")
        placed.append(m.on_site(in_l, out_l).op)
    if sorted(l for p in placed for l in p.labels) != sorted(op.labels):
        raise WireMismatch("operations do not tile the process wires")
    full = placed[0]
    for p in placed[1:]:
        full = LabeledOperator(full.wires + p.wires, np.kron(full.matrix, p.matrix))
    full = permute_wires(full, op.labels)
    # Tr[M^T W] = sum_ij M_ij W_ij
    value = np.sum(full.matrix * op.matrix)
    prob = float(value.real)
    if prob < -TOL.psd_floor:
        raise NegativeProbability(f"Born rule returned {prob:.3e}")
    return max(prob, 0.0)


# ---------------------------------------------------------------------------
# common instruments

def measure_and_prepare(basis: np.ndarray, in_wire: Wire | tuple[str, int], out_wire: Wire | tuple[str, int]) -> Instrument:
    """Lüders projective measurement in the orthonormal columns of ``basis``."""
    basis = np.asarray(basis, dtype=complex)
    branches = []
    for i in range(basis.shape[1]):
        proj = np.outer(basis[:, i], basis[:, i].conj())
        branches.append((str(i), choi_of_kraus([proj], [in_wire], [out_wire])))
    return Instrument(tuple(branches))


def trace_effect(in_wire: Wire | tuple[str, int]) -> ChoiOperator:
    """Choi operator of the trace map (the identity on its input)."""
    w = _wires([in_wire])
    return ChoiOperator(LabeledOperator.identity(*w), (w[0].label,), ())


def povm_effects(basis: np.ndarray, in_wire: Wire | tuple[str, int]) -> list[ChoiOperator]:
    """Projective effects on a final site, as Choi operators with no output.

    The Choi form of ``rho -> Tr[E rho]`` is ``E^T``.
    """
    w = _wires([in_wire])
    basis = np.asarray(basis, dtype=complex)
    out = []
    for i in range(basis.shape[1]):
        proj = np.outer(basis[:, i], basis[:, i].conj())
        out.append(ChoiOperator(LabeledOperator(w, proj.T), (w[0].label,), ()))
    return out
