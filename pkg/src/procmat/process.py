"""Process matrices: dynamics-driven and the canonical memory classes."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .choi import ChoiOperator, Instrument, choi_of_unitary, link_product
from .config import TOL
from .dynamics import ProbeTimes
from .errors import (
    BadDistribution,
    DimensionMismatch,
    InvalidInstrument,
    NotDensityOperator,
    NotPositive,
    NotTracePreserving,
    WireMismatch,
)
from .structure import MixedUnitaryDecomposition
from .tensor import LabeledOperator, Wire, is_hermitian, partial_trace, permute_wires, tensor_all

log = logging.getLogger(__name__)


def site_labels(n_sites: int) -> list[str]:
    """``A_I.1, A_O.1, ..., A_O.N-1, A_I.N`` (the last site has no output)."""
    out = []
    for n in range(1, n_sites + 1):
        out.append(f"A_I.{n}")
        if n < n_sites:
            out.append(f"A_O.{n}")
    return out


@dataclass(frozen=True)
class ProcessMatrix:
    op: LabeledOperator
    n_sites: int
    probe_times: ProbeTimes | None = None
    provenance: str = ""

    @property
    def matrix(self) -> np.ndarray:
        return self.op.matrix

    @property
    def labels(self) -> tuple[str, ...]:
        return self.op.labels

    def expected_trace(self) -> float:
        return float(np.prod([w.dim for w in self.op.wires if w.label.startswith("A_O.")]))

    def site_groups(self) -> list[list[str]]:
        """Wire groups of the product form: ``[A_I.1], [A_O.1, A_I.2], ...``."""
        groups = [["A_I.1"]]
        for n in range(1, self.n_sites):
            groups.append([f"A_O.{n}", f"A_I.{n + 1}"])
        return groups


def _matrix(x) -> np.ndarray:
    return x.matrix if isinstance(x, LabeledOperator) else np.asarray(x, dtype=complex)


def _check_density(rho: np.ndarray, what: str = "initial state") -> None:
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise NotDensityOperator(f"{what} is not square")
    if not is_hermitian(rho) or abs(np.trace(rho) - 1) > 1e-9:
        raise NotDensityOperator(f"{what} is not a unit-trace Hermitian operator")
    if np.linalg.eigvalsh((rho + rho.conj().T) / 2).min() < -TOL.psd_floor:
        raise NotDensityOperator(f"{what} has negative eigenvalues")


def finalize(op: LabeledOperator, n_sites: int, probe_times=None, provenance: str = "") -> ProcessMatrix:
    """Order wires canonically and enforce positivity and normalisation.

    Eigenvalues in ``[-psd_floor, -1e-12)`` (relative to the trace) are clamped
    to zero with a warning; more negative ones raise :class:`NotPositive`.
    """
    op = permute_wires(op, site_labels(n_sites))
    m = (op.matrix + op.matrix.conj().T) / 2
    scale = max(1.0, abs(np.trace(m)))
    vals, vecs = np.linalg.eigh(m)
    if vals[0] < -TOL.psd_floor * scale:
        raise NotPositive(f"process matrix has eigenvalue {vals[0]:.3e}")
    if vals[0] < -1e-12 * scale:
        log.warning("clamping process eigenvalue %.3e to zero", vals[0])
        m = (vecs * np.clip(vals, 0, None)) @ vecs.conj().T
    w = ProcessMatrix(LabeledOperator(op.wires, m), n_sites, probe_times, provenance)
    expected = w.expected_trace()
    if abs(np.trace(m).real - expected) > 1e-8 * expected:
        raise NotTracePreserving(f"trace {np.trace(m).real:.12g}, expected {expected:g}")
    return w


def build_from_dynamics(
    rho_init: LabeledOperator,
    unitaries: Sequence[LabeledOperator | np.ndarray],
    probe_times: ProbeTimes | None = None,
) -> ProcessMatrix:
    """Reduced system process of an initial joint state and joint unitaries.

    ``rho_init`` acts on ``(system, environment)``; each unitary acts on the same
    pair of wires.  Input and output environment spaces of consecutive steps are
    identified by renaming, and the last environment is traced out.
    """
    if len(rho_init.wires) != 2:
        raise WireMismatch("initial state must act on exactly (system, environment)")
    rho = rho_init.matrix
    _check_density(rho)
    d_s, d_e = rho_init.dims
    chain = LabeledOperator((Wire("A_I.1", d_s), Wire("E.1", d_e)), rho)
    for n, u in enumerate(unitaries, start=1):
        m = _matrix(u)
        if m.shape != (d_s * d_e, d_s * d_e):
            raise DimensionMismatch(f"unitary {n} has shape {m.shape}, expected side {d_s * d_e}")
        c = choi_of_unitary(
            m,
            [Wire(f"A_O.{n}", d_s), Wire(f"E.{n}", d_e)],
            [Wire(f"A_I.{n + 1}", d_s), Wire(f"E.{n + 1}", d_e)],
        )
        chain = link_product(chain, c)
    n_sites = len(unitaries) + 1
    chain = partial_trace(chain, [f"E.{n_sites}"])
    return finalize(chain, n_sites, probe_times, "dynamics")


def _site_channel(c: ChoiOperator, n: int) -> LabeledOperator:
    if len(c.in_wires) != 1 or len(c.out_wires) != 1:
        raise WireMismatch("step channels must have one input and one output wire")
    if not c.is_trace_preserving():
        raise NotTracePreserving(f"channel {n} is not trace preserving ({c.tp_residual():.2e})")
    c = c.on_site(f"A_O.{n}", f"A_I.{n + 1}")
    return permute_wires(c.op, [f"A_O.{n}", f"A_I.{n + 1}"])


def _markov_op(rho, channels: Sequence[ChoiOperator]) -> LabeledOperator:
    rho = _matrix(rho)
    _check_density(rho)
    parts = [LabeledOperator((Wire("A_I.1", len(rho)),), rho)]
    for n, c in enumerate(channels, start=1):
        part = _site_channel(c, n)
        if part.dims[0] != parts[-1].dims[-1]:
            raise DimensionMismatch(f"channel {n} input dimension does not match the previous output")
        parts.append(part)
    return tensor_all(parts)


def build_markov(rho, channels: Sequence[ChoiOperator]) -> ProcessMatrix:
    """``W = rho (x) T^1 (x) ... (x) T^{N-1}``."""
    return finalize(_markov_op(rho, channels), len(channels) + 1, provenance="markov")


def _unitary_chois(unitaries) -> list[ChoiOperator]:
    out = []
    for u in unitaries:
        m = _matrix(u)
        out.append(choi_of_unitary(m, [Wire("in", m.shape[1])], [Wire("out", m.shape[0])]))
    return out


def build_unitary_markov(rho, unitaries: Sequence[np.ndarray | LabeledOperator]) -> ProcessMatrix:
    rho = _matrix(rho)
    w = build_markov(rho, _unitary_chois(unitaries))
    return ProcessMatrix(w.op, w.n_sites, None, "unitary-markov")


def _check_weights(weights) -> np.ndarray:
    p = np.asarray(weights, dtype=float)
    if p.ndim != 1 or (p < -1e-12).any() or abs(p.sum() - 1) > 1e-9:
        raise BadDistribution(f"weights {p} do not form a probability distribution")
    return p


def build_ccc(weights, states, channels: Sequence[Sequence[ChoiOperator]]) -> ProcessMatrix:
    """Convex mixture of Markovian processes, ``sum_nu p(nu) rho_nu (x) T_nu^1 (x) ...``."""
    p = _check_weights(weights)
    if not (len(p) == len(states) == len(channels)):
        raise BadDistribution("weights, states and channels must have one entry per branch")
    acc = None
    for pk, rho, chans in zip(p, states, channels):
        term = _markov_op(rho, chans).scaled(pk)
        acc = term if acc is None else acc + term
    return finalize(acc, len(channels[0]) + 1, provenance="ccc")


def build_mixed_unitary(decomp: MixedUnitaryDecomposition) -> ProcessMatrix:
    """``sum_nu p(nu) W_nu`` with each ``W_nu`` a unitary Markovian process."""
    channels = [_unitary_chois(branch) for branch in decomp.unitaries]
    w = build_ccc(decomp.weights, decomp.states, channels)
    return ProcessMatrix(w.op, w.n_sites, None, "mixed-unitary")


# ---------------------------------------------------------------------------
# classical memory

Conditional = Callable[[tuple[int, ...], tuple[int, ...]], Sequence[float]]


@dataclass(frozen=True)
class ClassicalMemorySpec:
    """Instruments selected by classical settings with stochastic feed-forward.

    ``initial_weights[s0]`` and ``initial_states[s0]`` give the initial
    ensemble.  For step ``n`` (0-based here, acting between sites ``n+1`` and
    ``n+2``), ``instruments[n][s]`` is the instrument used under setting ``s``
    and ``conditionals[n](s_hist, m_hist)`` returns ``p(s_n | s_0..s_{n-1},
    m_1..m_{n-1})`` as a sequence over settings; ``s_hist`` holds all earlier
    settings (including ``s0``) and ``m_hist`` all earlier outcome indices.
    """

    initial_weights: Sequence[float]
    initial_states: Sequence[np.ndarray]
    instruments: Sequence[Sequence[Instrument]]
    conditionals: Sequence[Conditional]

    def __post_init__(self):
        _check_weights(self.initial_weights)
        if len(self.initial_weights) != len(self.initial_states):
            raise BadDistribution("one initial state per initial setting is required")
        for rho in self.initial_states:
            _check_density(np.asarray(rho, dtype=complex), "initial ensemble state")
        if len(self.instruments) != len(self.conditionals) or not self.instruments:
            raise InvalidInstrument("need one instrument family and one conditional per step")
        for n, family in enumerate(self.instruments):
            for s, inst in enumerate(family):
                c = inst.branches[0][1]
                if len(c.in_wires) != 1 or len(c.out_wires) != 1:
                    raise InvalidInstrument(f"instrument {s} of step {n} must map one wire to one wire")

    @property
    def n_steps(self) -> int:
        return len(self.instruments)

    def distribution(self, n: int, s_hist: tuple[int, ...], m_hist: tuple[int, ...]) -> np.ndarray:
        p = np.asarray(self.conditionals[n](tuple(s_hist), tuple(m_hist)), dtype=float)
        if len(p) != len(self.instruments[n]):
            raise BadDistribution(f"step {n}: {len(p)} probabilities for {len(self.instruments[n])} settings")
        try:
            return _check_weights(p)
        except BadDistribution as exc:
            raise BadDistribution(f"step {n}, history {s_hist}/{m_hist}: {exc}") from None


def build_classical_memory(spec: ClassicalMemorySpec) -> ProcessMatrix:
    """Sum over settings and outcomes of conditioned instrument branches.

    Each history contributes ``p(s0) rho_s0 (x) p(s1|..) T^1_{m1|s1} (x) ...``.
    """
    d0 = len(spec.initial_states[0])
    branch_ops: list[list[list[LabeledOperator]]] = []
    for n, family in enumerate(spec.instruments, start=1):
        branch_ops.append([[_branch_op(c, n) for _, c in inst] for inst in family])

    acc = None

    def walk(n: int, weight: float, s_hist: tuple, m_hist: tuple, parts: list):
        nonlocal acc
        if weight == 0.0:
            return
        if n == spec.n_steps:
            term = tensor_all(parts).scaled(weight)
            acc = term if acc is None else acc + term
            return
        p = spec.distribution(n, s_hist, m_hist)
        for s, ps in enumerate(p):
            for m, op in enumerate(branch_ops[n][s]):
                walk(n + 1, weight * ps, s_hist + (s,), m_hist + (m,), parts + [op])

    for s0, (p0, rho) in enumerate(zip(spec.initial_weights, spec.initial_states)):
        start = LabeledOperator((Wire("A_I.1", d0),), np.asarray(rho, dtype=complex))
        walk(0, float(p0), (s0,), (), [start])
    return finalize(acc, spec.n_steps + 1, provenance="classical-memory")


def _branch_op(c: ChoiOperator, n: int) -> LabeledOperator:
    c = c.on_site(f"A_O.{n}", f"A_I.{n + 1}")
    return permute_wires(c.op, [f"A_O.{n}", f"A_I.{n + 1}"])
