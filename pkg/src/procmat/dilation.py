"""Circuit models: controlled-unitary dilations, instrument dilations and
stochastic-control unitaries, with a simulator that turns a circuit back into
a process matrix."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .choi import ChoiOperator, Instrument, choi_of_kraus, choi_of_unitary, kraus_from_choi, link_product
from .config import TOL
from .errors import (
    BadDistribution,
    DimensionMismatch,
    IncompleteBasis,
    InvalidDecomposition,
    InvalidInstrument,
    NotUnitary,
    WireMismatch,
)
from .process import ClassicalMemorySpec, ProcessMatrix, finalize
from .structure import MixedUnitaryDecomposition
from .tensor import LabeledOperator, Wire, partial_trace, tensor

SYSTEM = "S"


def complete_columns(columns: np.ndarray, dim: int | None = None, skip: float = 1e-8) -> np.ndarray:
    """Extend orthonormal columns to a unitary.

    Canonical basis vectors are orthogonalised against the existing columns in
    order; candidates whose remainder has norm below ``skip`` are passed over.
    """
    cols = np.asarray(columns, dtype=complex)
    if cols.ndim == 1:
        cols = cols[:, None]
    dim = cols.shape[0] if dim is None else dim
    basis = [cols[:, k] for k in range(cols.shape[1])]
    for i in range(dim):
        if len(basis) == dim:
            break
        v = np.zeros(dim, dtype=complex)
        v[i] = 1.0
        for _ in range(2):
            for b in basis:
                v = v - (b.conj() @ v) * b
        norm = np.linalg.norm(v)
        if norm >= skip:
            basis.append(v / norm)
    return np.column_stack(basis)


def _unitary_defect(u: np.ndarray) -> float:
    return float(np.linalg.norm(u.conj().T @ u - np.eye(u.shape[1])))


# ---------------------------------------------------------------------------
# controlled unitaries


@dataclass(frozen=True)
class ControlledUnitary:
    """``sum_nu U_nu (x) |nu><nu|`` with the control on the environment."""

    branches: tuple[np.ndarray, ...]
    control_basis: np.ndarray

    def assemble(self, system: Wire | None = None, env: Wire | None = None) -> LabeledOperator:
        return assemble_controlled(self.branches, self.control_basis, system, env)


def assemble_controlled(
    branches: Sequence[np.ndarray], basis: np.ndarray | None = None, system: Wire | None = None, env: Wire | None = None
) -> LabeledOperator:
    """Controlled unitary on ``(system, env)``; ``basis`` columns are the control vectors
    (canonical basis when omitted)."""
    branches = [np.asarray(u, dtype=complex) for u in branches]
    if not branches:
        raise IncompleteBasis("no branches given")
    d_s = branches[0].shape[0]
    for k, u in enumerate(branches):
        if u.shape != (d_s, d_s):
            raise DimensionMismatch(f"branch {k} has shape {u.shape}, expected {(d_s, d_s)}")
        if _unitary_defect(u) > TOL.unitary:
            raise NotUnitary(f"branch {k} is not unitary")
    basis = np.eye(len(branches), dtype=complex) if basis is None else np.asarray(basis, dtype=complex)
    d_e = basis.shape[0]
    if basis.shape != (d_e, len(branches)) or len(branches) != d_e:
        raise IncompleteBasis(f"{len(branches)} branches for a {basis.shape} control basis")
    if np.linalg.norm(basis.conj().T @ basis - np.eye(d_e)) > 1e-9:
        raise IncompleteBasis("control basis is not orthonormal")
    m = sum(np.kron(u, np.outer(basis[:, k], basis[:, k].conj())) for k, u in enumerate(branches))
    system = system or Wire(SYSTEM, d_s)
    env = env or Wire("E", d_e)
    return LabeledOperator((system, env), m)


# ---------------------------------------------------------------------------
# circuits and their simulation


@dataclass(frozen=True)
class Prepare:
    """Bring a fresh register into the circuit in ``state`` (vector or density matrix)."""

    register: str
    state: np.ndarray


@dataclass(frozen=True)
class Gate:
    """Unitary on named registers; the system register is ``"S"``."""

    op: LabeledOperator
    name: str = ""


@dataclass(frozen=True)
class DilatedCircuit:
    """Initial state on ``S`` plus registers, then one gate list per step.

    Step ``n`` runs between sites ``n`` and ``n+1``: the system enters it from
    ``A_O.n`` and leaves into ``A_I.n+1``.  Every register still alive at the
    end is discarded.
    """

    initial: LabeledOperator
    steps: tuple[tuple[Prepare | Gate, ...], ...]
    notes: dict = field(default_factory=dict)

    def __post_init__(self):
        if SYSTEM not in self.initial.labels or self.initial.labels[0] != SYSTEM:
            raise WireMismatch("the initial state's first wire must be the system 'S'")
        live = {w.label: w.dim for w in self.initial.wires}
        for n, step in enumerate(self.steps, start=1):
            for el in step:
                if isinstance(el, Prepare):
                    if el.register in live:
                        raise WireMismatch(f"step {n}: register {el.register!r} already exists")
                    live[el.register] = len(el.state)
                else:
                    if _unitary_defect(el.op.matrix) > TOL.unitary:
                        raise NotUnitary(f"step {n}: gate {el.name or el.op.labels} is not unitary")
                    for w in el.op.wires:
                        if live.get(w.label) != w.dim:
                            raise WireMismatch(f"step {n}: gate acts on unknown or mis-sized register {w.label!r}")

    @property
    def n_sites(self) -> int:
        return len(self.steps) + 1

    def simulate(self) -> ProcessMatrix:
        return simulate_circuit(self)


def _last_use(circuit: DilatedCircuit) -> dict[str, tuple[int, int]]:
    last: dict[str, tuple[int, int]] = {}
    for n, step in enumerate(circuit.steps):
        for k, el in enumerate(step):
            regs = [el.register] if isinstance(el, Prepare) else list(el.op.labels)
            for r in regs:
                last[r] = (n, k)
    return last


def simulate_circuit(circuit: DilatedCircuit) -> ProcessMatrix:
    """Process matrix of a circuit via link products.

    Registers carry versioned labels (``name#v``); a register is traced out as
    soon as it is no longer used, which keeps intermediate operators small.
    """
    last = _last_use(circuit)
    version = {w.label: 0 for w in circuit.initial.wires}
    dims = {w.label: w.dim for w in circuit.initial.wires}

    def lab(r: str) -> str:
        return f"{r}#{version[r]}"

    chain = circuit.initial.relabel({r: lab(r) for r in circuit.initial.labels} | {SYSTEM: "A_I.1"})
    version.pop(SYSTEM)
    dead = [lab(r) for r in version if r not in last]
    if dead:
        chain = partial_trace(chain, dead)
        for r in [r for r in version if r not in last]:
            version.pop(r)

    for n, step in enumerate(circuit.steps, start=1):
        sys_label = f"A_O.{n}"
        for k, el in enumerate(step):
            if isinstance(el, Prepare):
                st = np.asarray(el.state, dtype=complex)
                rho = np.outer(st, st.conj()) if st.ndim == 1 else st
                version[el.register] = 0
                dims[el.register] = len(rho)
                chain = tensor(chain, LabeledOperator((Wire(lab(el.register), len(rho)),), rho))
                continue
            ins, outs = [], []
            for w in el.op.wires:
                if w.label == SYSTEM:
                    ins.append(Wire(sys_label, w.dim))
                    sys_label = f"S@{n}.{k}"
                    outs.append(Wire(sys_label, w.dim))
                else:
                    ins.append(Wire(lab(w.label), w.dim))
                    version[w.label] += 1
                    outs.append(Wire(lab(w.label), w.dim))
            chain = link_product(chain, choi_of_unitary(el.op.matrix, ins, outs))
            done = [r for r in el.op.labels if r != SYSTEM and last.get(r) == (n - 1, k)]
            if done:
                chain = partial_trace(chain, [lab(r) for r in done])
                for r in done:
                    version.pop(r)
        if sys_label == f"A_O.{n}":
            d = circuit.initial.dim_of(SYSTEM)
            ident = choi_of_unitary(np.eye(d), [Wire(sys_label, d)], [Wire(f"A_I.{n + 1}", d)])
            chain = tensor(chain, ident.op)
        else:
            chain = chain.relabel({sys_label: f"A_I.{n + 1}"})
    if version:
        chain = partial_trace(chain, [lab(r) for r in version])
    return finalize(chain, circuit.n_sites, provenance="circuit")


# ---------------------------------------------------------------------------
# mixed-unitary dilation


def dilate_mixed_unitary(decomp: MixedUnitaryDecomposition) -> DilatedCircuit:
    """Quantum-classical initial state ``sum_nu p(nu) rho_nu (x) |nu><nu|`` and one
    controlled unitary per step, all controlled by the same register ``E``."""
    if not isinstance(decomp, MixedUnitaryDecomposition):
        raise InvalidDecomposition("expected a MixedUnitaryDecomposition")
    k = decomp.n_branches
    d_s = len(decomp.states[0])
    if any(len(r) != d_s for r in decomp.states):
        raise InvalidDecomposition("conditional states have different dimensions")
    rho = sum(p * np.kron(np.asarray(r), np.diag(np.eye(k)[nu]).astype(complex))
              for nu, (p, r) in enumerate(zip(decomp.weights, decomp.states)))
    initial = LabeledOperator((Wire(SYSTEM, d_s), Wire("E", k)), rho)
    steps = []
    for n in range(decomp.n_steps):
        branch = [decomp.unitaries[nu][n] for nu in range(k)]
        steps.append((Gate(assemble_controlled(branch, None), name=f"U{n + 1}"),))
    return DilatedCircuit(initial, tuple(steps), {"control_dim": k})


# ---------------------------------------------------------------------------
# instrument dilation


@dataclass(frozen=True)
class InstrumentDilation:
    """Unitary on ``(system, outcome, kraus)`` whose action on ``|psi>|0>|0>`` is
    the isometry ``sum_{m,k} M_mk|psi> (x) |m> (x) |k>``.  Measuring the
    outcome register in the canonical basis selects branch ``m``."""

    unitary: LabeledOperator
    outcomes: tuple[str, ...]
    kraus_counts: tuple[int, ...]

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.unitary.dims

    def measurement_basis(self) -> np.ndarray:
        return np.eye(self.dims[1], dtype=complex)

    def kraus(self, m: int) -> list[np.ndarray]:
        d, dm, dk = self.dims
        u = self.unitary.matrix.reshape(d, dm, dk, d, dm, dk)
        return [u[:, m, k, :, 0, 0] for k in range(dk)]

    def branch_choi(self, m: int, in_wire: Wire, out_wire: Wire) -> ChoiOperator:
        return choi_of_kraus(self.kraus(m), [in_wire], [out_wire])


def instrument_dilation(instrument: Instrument, outcome_dim: int | None = None, kraus_dim: int | None = None) -> InstrumentDilation:
    """Dilate an instrument to a unitary plus a projective measurement on an ancilla."""
    kraus_sets = []
    d = None
    for label, c in instrument:
        if len(c.in_wires) != 1 or len(c.out_wires) != 1:
            raise InvalidInstrument(f"branch {label!r} must map one wire to one wire")
        ks = kraus_from_choi(c)
        d_in, d_out = c.op.dim_of(c.in_wires[0]), c.op.dim_of(c.out_wires[0])
        if d_in != d_out or (d is not None and d != d_in):
            raise InvalidInstrument("instrument dilation needs equal input and output dimensions")
        d = d_in
        kraus_sets.append(ks)
    dm = outcome_dim or len(kraus_sets)
    dk = kraus_dim or max(1, max(len(ks) for ks in kraus_sets))
    if dm < len(kraus_sets) or dk < max(len(ks) for ks in kraus_sets):
        raise InvalidInstrument("ancilla dimensions too small for the instrument")

    v = np.zeros((d, dm, dk, d), dtype=complex)
    for m, ks in enumerate(kraus_sets):
        for k, op in enumerate(ks):
            v[:, m, k, :] = op
    v = v.reshape(d * dm * dk, d)
    if np.linalg.norm(v.conj().T @ v - np.eye(d)) > 1e-9:
        raise InvalidInstrument("Kraus operators do not form an isometry")
    full = complete_columns(v)
    # place the isometry on inputs |i,0,0> and the completion elsewhere
    side = d * dm * dk
    u = np.zeros((side, side), dtype=complex)
    anchor = [i * dm * dk for i in range(d)]
    others = [j for j in range(side) if j not in anchor]
    u[:, anchor] = full[:, :d]
    u[:, others] = full[:, d:]
    op = LabeledOperator((Wire(SYSTEM, d), Wire("m", dm), Wire("k", dk)), u)
    return InstrumentDilation(op, instrument.outcomes, tuple(len(ks) for ks in kraus_sets))


# ---------------------------------------------------------------------------
# stochastic control


def stochastic_control(p: Sequence[float], basis: np.ndarray | None = None) -> np.ndarray:
    """``R`` with first column ``|xi> = sum_i sqrt(p_i)|s_i>``, completed to a unitary.

    Measuring ``R|0>`` in the basis ``{|s_i>}`` gives outcome ``i`` with
    probability ``p_i``.
    """
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or (p < -1e-12).any() or abs(p.sum() - 1) > 1e-9:
        raise BadDistribution(f"{p} is not a probability distribution")
    d = len(p)
    basis = np.eye(d, dtype=complex) if basis is None else np.asarray(basis, dtype=complex)
    if basis.shape != (d, d) or np.linalg.norm(basis.conj().T @ basis - np.eye(d)) > 1e-9:
        raise BadDistribution("basis must be an orthonormal basis matching the distribution")
    xi = basis @ np.sqrt(np.clip(p, 0, None))
    return complete_columns(xi / np.linalg.norm(xi))


def stochastic_controls(table: Sequence[Sequence[float]], basis: np.ndarray | None = None) -> list[np.ndarray]:
    """One ``R_a`` per row ``p(. | a)``."""
    return [stochastic_control(row, basis) for row in table]


# ---------------------------------------------------------------------------
# classical-memory circuits


def _controlled_on(dims: Sequence[int], blocks: dict, target_dim: int) -> np.ndarray:
    """``sum_h |h><h| (x) R_h`` over control registers with ``dims``; histories
    without a block get the identity."""
    d_c = int(np.prod(dims))
    out = np.zeros((d_c * target_dim, d_c * target_dim), dtype=complex)
    for h in itertools.product(*[range(dd) for dd in dims]):
        idx = int(np.ravel_multi_index(h, dims)) if dims else 0
        sl = slice(idx * target_dim, (idx + 1) * target_dim)
        out[sl, sl] = blocks.get(h, np.eye(target_dim))
    return out


def classical_memory_circuit(spec: ClassicalMemorySpec) -> DilatedCircuit:
    """Circuit with stochastic feed-forward for a classical-memory spec.

    Register ``s0`` holds the initial setting.  Step ``n`` prepares ``s{n}``,
    draws it with a stochastic-control unitary controlled on all earlier
    settings and outcomes, then applies the dilated instrument of that setting
    (controlled on ``s{n}``) writing the outcome to ``m{n}`` and the Kraus index
    to ``k{n}``.  Everything but the system is discarded at the end.
    """
    n0 = len(spec.initial_weights)
    d = len(spec.initial_states[0])
    rho = sum(p * np.kron(np.asarray(r, dtype=complex), np.diag(np.eye(n0)[s]).astype(complex))
              for s, (p, r) in enumerate(zip(spec.initial_weights, spec.initial_states)))
    initial = LabeledOperator((Wire(SYSTEM, d), Wire("s0", n0)), rho)

    hist_regs: list[tuple[str, int]] = [("s0", n0)]
    n_outcomes_hist: list[list[int]] = []  # per step: outcome count for each setting
    steps = []
    for n, family in enumerate(spec.instruments, start=1):
        n_set = len(family)
        dilations_raw = [instrument_dilation(inst) for inst in family]
        dm = max(len(inst) for inst in family)
        dk = max(max(dil.kraus_counts) for dil in dilations_raw)
        dils = [instrument_dilation(inst, dm, dk) for inst in family]
        for dil in dils:
            if dil.dims[0] != d:
                raise InvalidInstrument(f"step {n}: instrument dimension {dil.dims[0]} differs from {d}")

        # stochastic control over every reachable history
        dims = [dd for _, dd in hist_regs]
        blocks = {}
        for h in itertools.product(*[range(dd) for dd in dims]):
            s_hist = (h[0],) + tuple(h[1::2])
            m_hist = tuple(h[2::2])
            if any(m >= n_outcomes_hist[j][s_hist[j + 1]] for j, m in enumerate(m_hist)):
                continue
            blocks[h] = stochastic_control(spec.distribution(n - 1, s_hist, m_hist))
        r_gate = _controlled_on(dims, blocks, n_set)
        r_op = LabeledOperator(tuple(Wire(r, dd) for r, dd in hist_regs) + (Wire(f"s{n}", n_set),), r_gate)

        inst_gate = sum(np.kron(np.diag(np.eye(n_set)[s]).astype(complex), dil.unitary.matrix) for s, dil in enumerate(dils))
        inst_op = LabeledOperator((Wire(f"s{n}", n_set), Wire(SYSTEM, d), Wire(f"m{n}", dm), Wire(f"k{n}", dk)), inst_gate)

        zero = lambda k: np.eye(k, dtype=complex)[0]
        steps.append((
            Prepare(f"s{n}", zero(n_set)),
            Gate(r_op, name=f"R{n}"),
            Prepare(f"m{n}", zero(dm)),
            Prepare(f"k{n}", zero(dk)),
            Gate(inst_op, name=f"T{n}"),
        ))
        hist_regs += [(f"s{n}", n_set), (f"m{n}", dm)]
        n_outcomes_hist.append([len(inst) for inst in family])
    return DilatedCircuit(initial, tuple(steps), {"registers": [r for r, _ in hist_regs]})


def classical_memory_circuit_process(spec: ClassicalMemorySpec) -> ProcessMatrix:
    """Process matrix of :func:`classical_memory_circuit`, obtained by simulation."""
    w = classical_memory_circuit(spec).simulate()
    return ProcessMatrix(w.op, w.n_sites, None, "classical-memory-circuit")
