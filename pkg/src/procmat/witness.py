"""Memory diagnostics: Markov residual, mixed-unitary residual and PT negativity."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .config import TOL
from .dynamics import HamiltonianSpec
from .errors import ConditionFails, ShapeMismatch, WireMismatch, ZeroTrace
from .process import ProcessMatrix, build_mixed_unitary
from .structure import MixedUnitaryDecomposition, mixed_unitary_components, theorem1_certificate
from .tensor import LabeledOperator, partial_trace, partial_transpose, permute_wires, tensor_all

Cut = tuple[tuple[str, ...], tuple[str, ...]]

PPT_NOTE = (
    "negativity is a one-sided witness: a positive value certifies quantum memory across the cut, "
    "zero negativity does not certify classical memory"
)


def _op(w: ProcessMatrix | LabeledOperator) -> LabeledOperator:
    return w.op if isinstance(w, ProcessMatrix) else w


def normalize_process(w: ProcessMatrix | LabeledOperator) -> LabeledOperator:
    """Unit-trace rescaling of ``W``."""
    op = _op(w)
    tr = op.trace().real
    if not tr > 1e-300:
        raise ZeroTrace("process matrix has zero trace")
    return op.scaled(1.0 / tr)


def _check_cut(op: LabeledOperator, cut) -> Cut:
    first, second = (tuple(part) for part in cut)
    labels = set(op.labels)
    if set(first) & set(second) or set(first) | set(second) != labels or len(first) + len(second) != len(labels):
        raise WireMismatch(f"bipartition {first}|{second} does not tile {op.labels}")
    if not first or not second:
        raise WireMismatch("both sides of a bipartition must be non-empty")
    return first, second


def negativity(w: ProcessMatrix | LabeledOperator, cut) -> float:
    """Sum of the absolute negative eigenvalues of the unit-trace ``W`` partially
    transposed on the first part of ``cut``."""
    op = normalize_process(w)
    first, _ = _check_cut(op, cut)
    pt = partial_transpose(op, first).matrix
    vals = np.linalg.eigvalsh((pt + pt.conj().T) / 2)
    return float(np.abs(vals[vals < 0]).sum())


def _labels(w) -> tuple[str, ...]:
    return _op(w).labels


def default_cuts(w: ProcessMatrix) -> list[Cut]:
    """``A_I.1 | rest`` and each cut between consecutive Markov factors.

    The k-th temporal cut puts ``A_I.1 .. A_I.k`` and ``A_O.1 .. A_O.k-1`` in
    the past, i.e. it separates the factor ``T^{k-1}`` (ending on ``A_I.k``)
    from ``T^k`` (starting on ``A_O.k``).
    """
    labels = _labels(w)
    cuts = []
    for k in range(1, w.n_sites):
        past = tuple(l for l in labels if _site_index(l) < k or l == f"A_I.{k}")
        future = tuple(l for l in labels if l not in past)
        cuts.append((past, future))
    return cuts


def _site_index(label: str) -> int:
    return int(label.rsplit(".", 1)[1])


def cut_name(cut: Cut) -> str:
    return " ".join(cut[0]) + "|" + " ".join(cut[1])


def markov_residual(w: ProcessMatrix) -> float:
    """Frobenius distance of the unit-trace ``W`` from the product of its
    normalised site-group marginals."""
    op = normalize_process(w)
    parts = []
    for group in w.site_groups():
        rest = [l for l in op.labels if l not in group]
        m = partial_trace(op, rest)
        parts.append(m.scaled(1.0 / m.trace().real))
    prod = permute_wires(tensor_all(parts), op.labels)
    return float(np.linalg.norm(op.matrix - prod.matrix))


def theorem1_residual(w: ProcessMatrix, decomp: MixedUnitaryDecomposition) -> float:
    """``||W - sum_nu p(nu) W_nu||_F`` with each ``W_nu`` unitary-Markovian."""
    if decomp.n_sites != w.n_sites:
        raise ShapeMismatch(f"decomposition has {decomp.n_sites} sites, process has {w.n_sites}")
    ref = build_mixed_unitary(decomp)
    if ref.op.wires != w.op.wires:
        raise ShapeMismatch(f"decomposition wires {ref.op.wires} differ from {w.op.wires}")
    return float(np.linalg.norm(w.matrix - ref.matrix))


@dataclass
class ClassificationReport:
    markov_residual: float
    theorem1_residual: float | None
    negativities: dict[str, float]
    markovian: bool
    mixed_unitary_certified: bool
    quantum_memory_witnessed: bool
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "markov_residual": self.markov_residual,
            "theorem1_residual": self.theorem1_residual,
            "negativities": dict(self.negativities),
            "verdicts": {
                "markovian": self.markovian,
                "mixed_unitary_certified": self.mixed_unitary_certified,
                "quantum_memory_witnessed": self.quantum_memory_witnessed,
            },
            "notes": list(self.notes),
        }


def classify(
    w: ProcessMatrix,
    spec: HamiltonianSpec | None = None,
    rho_init: LabeledOperator | None = None,
    decomp: MixedUnitaryDecomposition | None = None,
    cuts: Iterable[Cut] | None = None,
    rng=None,
    markov_tol: float = 1e-8,
    theorem1_tol: float = 1e-8,
) -> ClassificationReport:
    """Run all diagnostics on ``W``.

    A mixed-unitary verdict needs a decomposition: either ``decomp`` directly or
    ``spec`` + ``rho_init`` (and ``W.probe_times``) from which one is derived
    when the commuting-environment certificate holds.
    """
    notes = [PPT_NOTE]
    if decomp is None and spec is not None:
        cert = theorem1_certificate(spec, rng=rng)
        if not cert:
            notes.append(f"commuting-environment certificate fails: {cert.evidence.get('violating_pair')}")
        elif rho_init is None or w.probe_times is None:
            notes.append("certificate holds; no initial state or probe times to build a decomposition")
        else:
            try:
                decomp = mixed_unitary_components(spec, w.probe_times, rho_init, rng=rng)
            except ConditionFails as exc:
                notes.append(str(exc))
    t1 = theorem1_residual(w, decomp) if decomp is not None else None

    cut_list = list(cuts) if cuts is not None else default_cuts(w)
    negs = {cut_name(c): negativity(w, c) for c in cut_list}
    mr = markov_residual(w)
    return ClassificationReport(
        markov_residual=mr,
        theorem1_residual=t1,
        negativities=negs,
        markovian=mr <= markov_tol,
        mixed_unitary_certified=t1 is not None and t1 <= theorem1_tol,
        quantum_memory_witnessed=any(v > TOL.negativity for v in negs.values()),
        notes=notes,
    )
