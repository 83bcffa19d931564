"""Time-dependent Hamiltonians and their time-ordered propagators (hbar = 1)."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import InvalidInterval, NotHermitian, NotUnitary, ValidationError, WireMismatch
from .config import TOL
from .tensor import LabeledOperator, Wire, hermitian_eigen, is_hermitian, tensor

__all__ = [
    "HamiltonianSpec",
    "Constant",
    "PiecewiseConstant",
    "PulseTrain",
    "ProductTerms",
    "ProbeTimes",
    "expm_hermitian",
    "propagator",
    "segment_unitaries",
]


def expm_hermitian(h: LabeledOperator, tau: float) -> LabeledOperator:
    """``exp(-i H tau)`` through the spectral decomposition of ``H``."""
    vals, vecs = hermitian_eigen(h)
    u = (vecs * np.exp(-1j * vals * tau)) @ vecs.conj().T
    return LabeledOperator(h.wires, u)


def _require_hermitian(h: LabeledOperator, what: str) -> None:
    if not is_hermitian(h):
        raise NotHermitian(f"{what} is not Hermitian")


def _same_wires(ops: Sequence[LabeledOperator]) -> tuple[Wire, ...]:
    wires = ops[0].wires
    for op in ops[1:]:
        if op.wires != wires:
            raise WireMismatch(f"Hamiltonian pieces act on {op.labels} and {ops[0].labels}")
    return wires


def _sandwich_env(h: LabeledOperator, vec: np.ndarray) -> LabeledOperator:
    """``(1 (x) <v|) H (1 (x) |v>)`` for ``H`` on (system, environment)."""
    d_s, d_e = h.dims
    t = h.matrix.reshape(d_s, d_e, d_s, d_e)
    m = np.einsum("e,aebf,f->ab", vec.conj(), t, vec)
    return LabeledOperator(h.wires[:1], m)


@dataclass(frozen=True)
class HamiltonianSpec:
    """Base for the Hamiltonian variants.

    Operators act on ``(system,)`` or ``(system, environment)`` wires; the
    first wire is always the system.
    """

    @property
    def wires(self) -> tuple[Wire, ...]:
        raise NotImplementedError

    @property
    def system(self) -> Wire:
        return self.wires[0]

    @property
    def env(self) -> Wire | None:
        return self.wires[1] if len(self.wires) > 1 else None

    def samples(self) -> list[tuple[str, LabeledOperator]]:
        """Tagged Hamiltonian matrices covering every time this spec can take."""
        raise NotImplementedError

    def conditional(self, vec: np.ndarray) -> "HamiltonianSpec":
        """System-only spec ``<v|H(t)|v>_E`` for an environment vector ``v``."""
        raise NotImplementedError


@dataclass(frozen=True)
class Constant(HamiltonianSpec):
    h: LabeledOperator

    def __post_init__(self):
        _require_hermitian(self.h, "Hamiltonian")

    @property
    def wires(self):
        return self.h.wires

    def samples(self):
        return [("const", self.h)]

    def conditional(self, vec):
        return Constant(_sandwich_env(self.h, vec))


@dataclass(frozen=True)
class PiecewiseConstant(HamiltonianSpec):
    """Contiguous segments ``(t_start, t_end, H)``; zero Hamiltonian outside them."""

    segments: tuple[tuple[float, float, LabeledOperator], ...]

    def __post_init__(self):
        segs = tuple((float(a), float(b), h) for a, b, h in self.segments)
        object.__setattr__(self, "segments", segs)
        if not segs:
            raise ValidationError("piecewise Hamiltonian needs at least one segment")
        _same_wires([h for _, _, h in segs])
        for k, (a, b, h) in enumerate(segs):
            if not b > a:
                raise InvalidInterval(f"segment {k} has t_end <= t_start")
            _require_hermitian(h, f"segment {k} Hamiltonian")
            if k and not math.isclose(a, segs[k - 1][1], rel_tol=1e-12, abs_tol=1e-12):
                raise InvalidInterval(f"segment {k} does not start where segment {k - 1} ends")

    @property
    def wires(self):
        return self.segments[0][2].wires

    def samples(self):
        return [(f"seg{k}", h) for k, (_, _, h) in enumerate(self.segments)]

    def conditional(self, vec):
        return PiecewiseConstant(tuple((a, b, _sandwich_env(h, vec)) for a, b, h in self.segments))


@dataclass(frozen=True)
class PulseTrain(HamiltonianSpec):
    """Delta pulses ``H_bar delta(t - t*)`` on top of an optional constant base."""

    pulses: tuple[tuple[float, LabeledOperator], ...]
    base: LabeledOperator | None = None

    def __post_init__(self):
        pulses = tuple((float(t), h) for t, h in self.pulses)
        object.__setattr__(self, "pulses", pulses)
        ops = [h for _, h in pulses] + ([self.base] if self.base is not None else [])
        if not ops:
            raise ValidationError("pulse train has neither pulses nor a base Hamiltonian")
        _same_wires(ops)
        for op in ops:
            _require_hermitian(op, "pulse Hamiltonian")
        times = [t for t, _ in pulses]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValidationError("pulse times must be strictly increasing")

    @property
    def wires(self):
        return (self.pulses[0][1] if self.pulses else self.base).wires

    def samples(self):
        out = [("base", self.base)] if self.base is not None else []
        return out + [(f"pulse{k}", h) for k, (_, h) in enumerate(self.pulses)]

    def conditional(self, vec):
        base = None if self.base is None else _sandwich_env(self.base, vec)
        return PulseTrain(tuple((t, _sandwich_env(h, vec)) for t, h in self.pulses), base)


@dataclass(frozen=True)
class ProductTerms(HamiltonianSpec):
    """``H(t) = sum_j f_j(t) S_j (x) E_j``.

    ``terms`` holds ``(f_j, S_j, E_j)``; ``E_j`` may be ``None`` for a
    system-only term.  ``window`` is the time range sampled when the spec is
    analysed (``n_samples`` midpoints).
    """

    terms: tuple[tuple[Callable[[float], float], LabeledOperator, LabeledOperator | None], ...]
    window: tuple[float, float] = (0.0, 1.0)
    n_samples: int = 64

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(tuple(t) for t in self.terms))
        if not self.terms:
            raise ValidationError("product-terms Hamiltonian has no terms")
        for k, (_, s, e) in enumerate(self.terms):
            _require_hermitian(s, f"system factor of term {k}")
            if e is not None:
                _require_hermitian(e, f"environment factor of term {k}")
        _same_wires([self._full(s, e) for _, s, e in self.terms])

    def _full(self, s: LabeledOperator, e: LabeledOperator | None) -> LabeledOperator:
        if e is None:
            env = next((e2 for _, _, e2 in self.terms if e2 is not None), None)
            if env is None:
                return s
            return tensor(s, LabeledOperator.identity(*env.wires))
        return tensor(s, e)

    @property
    def wires(self):
        return self._full(*self.terms[0][1:]).wires

    def at(self, t: float) -> LabeledOperator:
        acc = None
        for f, s, e in self.terms:
            term = self._full(s, e).scaled(float(f(t)))
            acc = term if acc is None else acc + term
        return acc

    def sample_times(self) -> np.ndarray:
        a, b = self.window
        return a + (np.arange(self.n_samples) + 0.5) * (b - a) / self.n_samples

    def samples(self):
        return [(f"t={t:.6g}", self.at(t)) for t in self.sample_times()]

    def conditional(self, vec):
        terms = []
        for f, s, e in self.terms:
            weight = 1.0 if e is None else complex(vec.conj() @ e.matrix @ vec).real
            terms.append((f, s.scaled(weight), None))
        return ProductTerms(tuple(terms), self.window, self.n_samples)


@dataclass(frozen=True)
class ProbeTimes:
    times: tuple[float, ...]

    def __post_init__(self):
        times = tuple(float(t) for t in self.times)
        object.__setattr__(self, "times", times)
        if len(times) < 2:
            raise ValidationError("at least two probe times are required")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValidationError("probe times must be strictly increasing")

    def __len__(self) -> int:
        return len(self.times)

    def intervals(self) -> list[tuple[float, float]]:
        return list(zip(self.times, self.times[1:]))


def _check_unitary(u: LabeledOperator) -> LabeledOperator:
    defect = np.linalg.norm(u.matrix.conj().T @ u.matrix - np.eye(u.side))
    if defect > TOL.unitary:
        raise NotUnitary(f"propagator drifted from unitarity ({defect:.3e})")
    return u


def propagator(spec: HamiltonianSpec, t0: float, t1: float, slices: int = 1000) -> LabeledOperator:
    """Time-ordered ``T exp(-i int_{t0}^{t1} H(t) dt)``.

    Constant, piecewise-constant and pulsed specs are exact.  Product-term specs
    use ``slices`` midpoint steps (second order in the step size); later times
    multiply from the left.
    """
    if not t1 > t0:
        raise InvalidInterval(f"propagator needs t0 < t1, got [{t0}, {t1}]")
    side = int(np.prod([w.dim for w in spec.wires]))
    u = np.eye(side, dtype=complex)

    if isinstance(spec, Constant):
        return expm_hermitian(spec.h, t1 - t0)

    if isinstance(spec, PiecewiseConstant):
        for a, b, h in spec.segments:
            lo, hi = max(a, t0), min(b, t1)
            if hi > lo:
                u = expm_hermitian(h, hi - lo).matrix @ u
        return _check_unitary(LabeledOperator(spec.wires, u))

    if isinstance(spec, PulseTrain):
        now = t0
        for tp, h in spec.pulses:
            if not (t0 < tp <= t1):
                continue
            if spec.base is not None and tp > now:
                u = expm_hermitian(spec.base, tp - now).matrix @ u
            u = expm_hermitian(h, 1.0).matrix @ u
            now = tp
        if spec.base is not None and t1 > now:
            u = expm_hermitian(spec.base, t1 - now).matrix @ u
        return _check_unitary(LabeledOperator(spec.wires, u))

    if isinstance(spec, ProductTerms):
        if slices < 1:
            raise InvalidInterval("slices must be positive")
        dt = (t1 - t0) / slices
        for k in range(slices):
            u = expm_hermitian(spec.at(t0 + (k + 0.5) * dt), dt).matrix @ u
        return _check_unitary(LabeledOperator(spec.wires, u))

    raise TypeError(f"unsupported Hamiltonian spec {type(spec).__name__}")


def segment_unitaries(
    spec: HamiltonianSpec, probes: ProbeTimes | Sequence[float], slices_per_segment: int = 1000
) -> list[LabeledOperator]:
    """Propagators ``U^n`` between consecutive probe times."""
    if not isinstance(probes, ProbeTimes):
        probes = ProbeTimes(tuple(probes))
    return [propagator(spec, a, b, slices_per_segment) for a, b in probes.intervals()]
