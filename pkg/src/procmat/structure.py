"""Commuting-environment structure of system-environment Hamiltonians.

A Hamiltonian ``H = sum_j S_j (x) E_j`` with all ``E_j`` (at all times)
commuting is equivalently one whose environment blocks
``K_ij = (<i| (x) 1) H (|j> (x) 1)`` form a commuting, adjoint-closed family:
both say that ``H(t)`` is block diagonal in one fixed environment basis.  The
block test is decidable, so it is what :func:`theorem1_certificate` runs.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .config import TOL
from .dynamics import HamiltonianSpec, ProbeTimes, segment_unitaries
from .errors import (
    ConditionFails,
    InvalidDecomposition,
    NotCommuting,
    NotDensityOperator,
    NotHermitian,
    WireMismatch,
)
from .operators import gell_mann
from .tensor import LabeledOperator, Wire, is_hermitian, permute_wires

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class EnvBlockFamily:
    """Environment blocks keyed by ``(sample tag, i, j)``."""

    blocks: dict[tuple[str, int, int], np.ndarray]
    env: Wire
    system: Wire

    def nonzero(self, atol: float = 1e-14) -> dict[tuple[str, int, int], np.ndarray]:
        return {k: b for k, b in self.blocks.items() if np.linalg.norm(b) > atol}


@dataclass(frozen=True)
class CommutationCheck:
    commuting: bool
    max_norm: float
    worst_pair: tuple[tuple[str, int, int], tuple[str, int, int]] | None

    def __bool__(self) -> bool:
        return self.commuting


@dataclass(frozen=True)
class SchmidtTerms:
    """``H = sum_j S_j (x) E_j`` with Hermitian factors and descending weights."""

    terms: list[tuple[LabeledOperator, LabeledOperator]]
    weights: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return sum(np.kron(s.matrix, e.matrix) for s, e in self.terms)

    def __len__(self) -> int:
        return len(self.terms)


@dataclass(frozen=True)
class Certificate:
    holds: bool
    basis: np.ndarray | None
    evidence: dict = field(default_factory=dict)

    def __bool__(self) -> bool:
        return self.holds


@dataclass(frozen=True)
class MixedUnitaryDecomposition:
    """``W = sum_nu p(nu) rho_nu (x) |U_nu^1>><<U_nu^1| (x) ...``.

    ``unitaries[nu][n]`` is the system unitary of branch ``nu`` on step ``n``.
    ``basis`` holds the environment vectors as columns when the decomposition
    came from a Hamiltonian; it is ``None`` for hand-made decompositions.
    """

    weights: np.ndarray
    states: list[np.ndarray]
    unitaries: list[list[np.ndarray]]
    basis: np.ndarray | None = None

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "weights", w)
        if w.ndim != 1 or len(w) != len(self.states) or len(w) != len(self.unitaries):
            raise InvalidDecomposition("weights, states and unitaries must have one entry per branch")
        if (w < -1e-12).any() or abs(w.sum() - 1) > 1e-9:
            raise InvalidDecomposition(f"weights {w} are not a probability distribution")
        steps = {len(u) for u in self.unitaries}
        if len(steps) != 1:
            raise InvalidDecomposition("branches have different numbers of steps")
        for rho in self.states:
            rho = np.asarray(rho)
            if not is_hermitian(rho) or abs(np.trace(rho) - 1) > 1e-9 or np.linalg.eigvalsh(rho).min() < -1e-9:
                raise InvalidDecomposition("conditional state is not a density operator")
        for branch in self.unitaries:
            for u in branch:
                u = np.asarray(u)
                if np.linalg.norm(u.conj().T @ u - np.eye(len(u))) > TOL.unitary:
                    raise InvalidDecomposition("branch operator is not unitary")

    @property
    def n_branches(self) -> int:
        return len(self.weights)

    @property
    def n_steps(self) -> int:
        return len(self.unitaries[0])

    @property
    def n_sites(self) -> int:
        return self.n_steps + 1


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(0 if seed is None else seed)


def blocks_of(h: LabeledOperator) -> dict[tuple[int, int], np.ndarray]:
    d_s, d_e = h.dims
    t = h.matrix.reshape(d_s, d_e, d_s, d_e)
    return {(i, j): t[i, :, j, :].copy() for i in range(d_s) for j in range(d_s)}


def env_blocks(spec: HamiltonianSpec) -> EnvBlockFamily:
    if spec.env is None:
        raise ConditionFails("Hamiltonian has no environment wire")
    blocks = {}
    for tag, h in spec.samples():
        for (i, j), b in blocks_of(h).items():
            blocks[(tag, i, j)] = b
    return EnvBlockFamily(blocks, spec.env, spec.system)


def commuting_family_check(family: EnvBlockFamily, tol: float | None = None) -> CommutationCheck:
    tol = TOL.commute if tol is None else tol
    items = list(family.nonzero().items())
    if not items:
        return CommutationCheck(True, 0.0, None)
    keys = [k for k, _ in items]
    stack = np.stack([b for _, b in items])
    norms = np.linalg.norm(stack, axis=(1, 2))
    prod = np.einsum("aij,bjk->abik", stack, stack)
    comm = np.linalg.norm(prod - prod.transpose(1, 0, 2, 3), axis=(2, 3))
    scale = np.maximum(1.0, np.outer(norms, norms))
    ratio = comm / scale
    a, b = np.unravel_index(np.argmax(ratio), ratio.shape)
    worst = float(ratio[a, b])
    ok = worst <= tol
    return CommutationCheck(ok, worst, None if worst == 0.0 else (keys[a], keys[b]))


def _hermitian_generators(mats: Sequence[np.ndarray]) -> list[np.ndarray]:
    out = []
    for k in mats:
        for h in ((k + k.conj().T) / 2, (k - k.conj().T) / 2j):
            if np.linalg.norm(h) > 1e-14:
                out.append(h)
    return out


def _is_scalar(m: np.ndarray, atol: float) -> bool:
    return np.linalg.norm(m - np.trace(m) / len(m) * np.eye(len(m))) <= atol


def _simdiag(herms: list[np.ndarray], rng: np.random.Generator, depth: int = 0) -> np.ndarray:
    d = herms[0].shape[0] if herms else 1
    scale = max([np.linalg.norm(h) for h in herms] + [1.0])
    atol = TOL.commute * scale
    active = [h for h in herms if not _is_scalar(h, atol)]
    if not active or d == 1:
        return np.eye(d, dtype=complex)
    for _ in range(8):
        coeffs = rng.normal(size=len(active))
        t = sum(c * h for c, h in zip(coeffs, active))
        vals, vecs = np.linalg.eigh(t)
        # split into clusters of (near-)degenerate eigenvalues
        gap = TOL.degeneracy * max(1.0, np.abs(vals).max())
        clusters, start = [], 0
        for i in range(1, d + 1):
            if i == d or vals[i] - vals[i - 1] > gap:
                clusters.append(list(range(start, i)))
                start = i
        if len(clusters) == 1:
            continue
        columns = []
        for cl in clusters:
            v = vecs[:, cl]
            if len(cl) > 1:
                inner = [v.conj().T @ h @ v for h in active]
                v = v @ _simdiag(inner, rng, depth + 1)
            columns.append(v)
        basis = np.hstack(columns)
        off = max(_offdiag(basis.conj().T @ h @ basis) for h in active)
        if off <= 1e-8 * scale:
            return basis
    raise NotCommuting("environment blocks could not be diagonalised simultaneously")


def _offdiag(m: np.ndarray) -> float:
    return float(np.abs(m - np.diag(np.diag(m))).max()) if m.size else 0.0


def _canonical(basis: np.ndarray) -> np.ndarray:
    """Deterministic ordering (by dominant component) and phase (dominant entry real > 0)."""
    lead = np.argmax(np.abs(basis) > np.abs(basis).max(axis=0) - 1e-9, axis=0)
    order = np.argsort(lead, kind="stable")
    basis = basis[:, order]
    idx = np.argmax(np.abs(basis), axis=0)
    phases = basis[idx, np.arange(basis.shape[1])]
    return basis * (np.abs(phases) / phases)


def simultaneous_eigenbasis(family: EnvBlockFamily, rng=None, tol: float | None = None) -> np.ndarray:
    """Orthonormal environment basis (columns) diagonalising every block."""
    check = commuting_family_check(family, tol)
    if not check:
        raise NotCommuting(f"blocks {check.worst_pair} do not commute (norm {check.max_norm:.3e})")
    herms = _hermitian_generators(list(family.nonzero().values()))
    if not herms:
        return np.eye(family.env.dim, dtype=complex)
    basis = _canonical(_simdiag(herms, _rng(rng)))
    return basis


def operator_schmidt(h: LabeledOperator, cut: str | None = None, rtol: float = 1e-12) -> SchmidtTerms:
    """Hermitian operator-Schmidt decomposition of a bipartite ``H``.

    ``cut`` names the system wire (default: the first).  Environment factors are
    scaled to Frobenius norm ``sqrt(d_E)`` so a product of Paulis comes back as
    its own factors.
    """
    if not is_hermitian(h):
        raise NotHermitian("operator Schmidt decomposition needs a Hermitian operator")
    if cut is not None and cut != h.labels[0]:
        h = permute_wires(h, [cut] + [l for l in h.labels if l != cut])
    d_s, d_e = h.dims
    gs, ge = gell_mann(d_s), gell_mann(d_e)
    coeff = np.array([[np.trace(np.kron(a, b).conj().T @ h.matrix).real for b in ge] for a in gs])
    u, s, vt = np.linalg.svd(coeff)
    keep = s > rtol * max(s.max(), 1e-300)
    terms = []
    for k in np.flatnonzero(keep):
        e_vec = vt[k]
        sign = np.sign(e_vec[np.argmax(np.abs(e_vec))])
        s_op = sign * s[k] / np.sqrt(d_e) * sum(c * g for c, g in zip(u[:, k], gs))
        e_op = sign * np.sqrt(d_e) * sum(c * g for c, g in zip(e_vec, ge))
        terms.append((LabeledOperator(h.wires[:1], s_op), LabeledOperator(h.wires[1:], e_op)))
    return SchmidtTerms(terms, s[keep])


def _pair_name(key) -> str:
    tag, i, j = key
    return f"K[{i},{j}]@{tag}"


def theorem1_certificate(spec: HamiltonianSpec, tol: float | None = None, rng=None) -> Certificate:
    """Check for a fixed environment eigenbasis over every time the spec can take."""
    family = env_blocks(spec)
    check = commuting_family_check(family, tol)
    evidence = {"max_commutator": check.max_norm, "n_blocks": len(family.nonzero())}
    if not check:
        a, b = check.worst_pair
        evidence["violating_pair"] = (_pair_name(a), _pair_name(b))
        return Certificate(False, None, evidence)
    basis = simultaneous_eigenbasis(family, rng=rng, tol=tol)
    residual = 0.0
    for _, h in spec.samples():
        d_s, d_e = h.dims
        t = h.matrix.reshape(d_s, d_e, d_s, d_e)
        rot = np.einsum("em,aebf,fn->ambn", basis.conj(), t, basis)
        for m in range(d_e):
            for n in range(d_e):
                if m != n:
                    residual = max(residual, float(np.abs(rot[:, m, :, n]).max()))
    evidence["offdiagonal_residual"] = residual
    return Certificate(True, basis, evidence)


def branch_weights(rho_init: LabeledOperator, basis: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
    """``p(nu) = Tr[rho (1 (x) |nu><nu|)]`` and the steered states ``rho_nu``."""
    d_s, d_e = rho_init.dims
    t = rho_init.matrix.reshape(d_s, d_e, d_s, d_e)
    weights, states = [], []
    for k in range(basis.shape[1]):
        v = basis[:, k]
        unnorm = np.einsum("e,aebf,f->ab", v.conj(), t, v)
        p = float(np.trace(unnorm).real)
        weights.append(p)
        states.append(unnorm / p if p > TOL.zero_branch else None)
    return np.array(weights), states


def mixed_unitary_components(
    spec: HamiltonianSpec,
    probes: ProbeTimes | Sequence[float],
    rho_init: LabeledOperator,
    slices: int = 1000,
    rng=None,
    tol: float | None = None,
) -> MixedUnitaryDecomposition:
    """Branch weights, steered states and conditional unitaries of a certified Hamiltonian.

    Branches with ``p(nu)`` below ``TOL.zero_branch`` are dropped and the rest
    renormalised.
    """
    cert = theorem1_certificate(spec, tol=tol, rng=rng)
    if not cert:
        raise ConditionFails(f"commuting-environment condition fails: {cert.evidence}")
    if not is_hermitian(rho_init) or abs(rho_init.trace() - 1) > 1e-9:
        raise NotDensityOperator("initial state must be a unit-trace Hermitian operator")
    if rho_init.dims != (spec.system.dim, spec.env.dim):
        raise WireMismatch(f"initial state dims {rho_init.dims} vs Hamiltonian {(spec.system.dim, spec.env.dim)}")
    weights, states = branch_weights(rho_init, cert.basis)
    keep = [k for k, p in enumerate(weights) if p > TOL.zero_branch]
    if len(keep) < len(weights):
        log.warning("dropping %d zero-probability branch(es)", len(weights) - len(keep))
    unitaries = []
    for k in keep:
        cond = spec.conditional(cert.basis[:, k])
        unitaries.append([u.matrix for u in segment_unitaries(cond, probes, slices)])
    w = weights[keep]
    return MixedUnitaryDecomposition(w / w.sum(), [states[k] for k in keep], unitaries, cert.basis[:, keep])
