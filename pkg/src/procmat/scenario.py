"""JSON scenarios: parsing, validation and execution of analyses."""
from __future__ import annotations

import ast
import copy
import json
import math
import operator
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Callable

import jsonschema
import numpy as np

from . import operators as ops
from .choi import ChoiOperator, born_rule, choi_of_kraus, choi_of_unitary, trace_effect
from .dilation import dilate_mixed_unitary
from .dynamics import (
    Constant,
    HamiltonianSpec,
    PiecewiseConstant,
    ProbeTimes,
    ProductTerms,
    PulseTrain,
    segment_unitaries,
)
from .errors import InputError, ProcmatError, SchemaError, ValidationError
from .process import ProcessMatrix, build_from_dynamics
from .structure import mixed_unitary_components, theorem1_certificate
from .tensor import LabeledOperator, Wire, is_hermitian
from .witness import classify, cut_name, default_cuts, negativity

SCHEMA_VERSION = 1

# ---------------------------------------------------------------------------
# scalar expressions

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul, ast.Div: operator.truediv, ast.Pow: operator.pow}
_UNARY = {ast.USub: operator.neg, ast.UAdd: operator.pos}
_FUNCS = {"sin": math.sin, "cos": math.cos, "exp": math.exp, "sqrt": math.sqrt, "tanh": math.tanh}
_NAMES = {"pi": math.pi, "e": math.e}


def _eval_node(node, env: dict[str, float]) -> float:
    if isinstance(node, ast.Expression):
        return _eval_node(node.body, env)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
        return float(node.value)
    if isinstance(node, ast.Name):
        if node.id in env:
            return env[node.id]
        if node.id in _NAMES:
            return _NAMES[node.id]
        raise ValueError(f"unknown name {node.id!r}")
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        return _BINOPS[type(node.op)](_eval_node(node.left, env), _eval_node(node.right, env))
    if isinstance(node, ast.UnaryOp) and type(node.op) in _UNARY:
        return _UNARY[type(node.op)](_eval_node(node.operand, env))
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in _FUNCS and len(node.args) == 1:
        return _FUNCS[node.func.id](_eval_node(node.args[0], env))
    raise ValueError("unsupported expression")


def scalar(value, path: str = "", env: dict[str, float] | None = None) -> float:
    """A number or an arithmetic expression such as ``"5*pi/2"``."""
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    try:
        return float(_eval_node(ast.parse(str(value), mode="eval"), env or {}))
    except (SyntaxError, ValueError, ZeroDivisionError, OverflowError) as exc:
        raise ValidationError(f"cannot evaluate {value!r}: {exc}", path) from None


def time_function(expr, path: str) -> Callable[[float], float]:
    if isinstance(expr, (int, float)):
        c = float(expr)
        return lambda t: c
    tree = ast.parse(str(expr), mode="eval")
    scalar(expr, path, {"t": 0.0})  # fail early on bad expressions
    return lambda t: _eval_node(tree, {"t": float(t)})


def matrix(value, path: str) -> np.ndarray:
    """Nested lists whose entries are numbers or ``[re, im]`` pairs."""
    try:
        rows = [[complex(*x) if isinstance(x, list) else complex(x) for x in row] for row in value]
        m = np.array(rows, dtype=complex)
    except (TypeError, ValueError):
        raise ValidationError("malformed matrix", path) from None
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValidationError(f"matrix is not square (shape {m.shape})", path)
    return m


def matrix_to_json(m: np.ndarray) -> list:
    m = np.atleast_2d(m)
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


# ---------------------------------------------------------------------------
# JSON pointers


def _pointer_parts(pointer: str) -> list[str]:
    if not pointer.startswith("/"):
        raise ValidationError(f"JSON pointer must start with '/': {pointer!r}")
    return [p.replace("~1", "/").replace("~0", "~") for p in pointer[1:].split("/")]


def set_pointer(doc: Any, pointer: str, value: Any) -> Any:
    """Copy of ``doc`` with the scalar at ``pointer`` replaced."""
    doc = copy.deepcopy(doc)
    parts = _pointer_parts(pointer)
    node = doc
    try:
        for p in parts[:-1]:
            node = node[int(p)] if isinstance(node, list) else node[p]
        last = parts[-1]
        if isinstance(node, list):
            idx = int(last)
            if not isinstance(node[idx], (int, float, str)):
                raise ValidationError(f"{pointer} does not name a scalar", pointer)
            node[idx] = value
        else:
            if last in node and not isinstance(node[last], (int, float, str)):
                raise ValidationError(f"{pointer} does not name a scalar", pointer)
            node[last] = value
    except (KeyError, IndexError, ValueError, TypeError):
        raise ValidationError(f"JSON pointer {pointer} does not resolve", pointer) from None
    return doc


def _pointer(path) -> str:
    return "".join(f"/{str(p).replace('~', '~0').replace('/', '~1')}" for p in path)


# ---------------------------------------------------------------------------
# parsing


def schema() -> dict:
    text = resources.files("procmat").joinpath("data/scenario.schema.json").read_text(encoding="utf-8")
    return json.loads(text)


_VALIDATOR = None


def _validator():
    global _VALIDATOR
    if _VALIDATOR is None:
        s = schema()
        _VALIDATOR = jsonschema.Draft202012Validator(s)
    return _VALIDATOR


@dataclass
class Scenario:
    doc: dict
    name: str
    seed: int
    system: Wire
    env: Wire
    hamiltonian: HamiltonianSpec
    initial_state: LabeledOperator
    probes: ProbeTimes
    slices: int
    analyses: list[dict] = field(default_factory=list)


def _generator(g: dict, d_s: int, d_e: int, path: str) -> np.ndarray:
    name = g["generator"]
    params = g.get("params", {})
    p = {k: (v if k == "matrix" or k in ("system", "environment") else scalar(v, f"{path}/params/{k}")) for k, v in params.items()}
    try:
        if name == "zero":
            h = np.zeros((d_s * d_e, d_s * d_e), dtype=complex)
        elif name == "pauli_product":
            h = ops.pauli_product(p.get("w", 1.0), params.get("system", "Z"), params.get("environment", "Z"))
        elif name == "swap":
            h = ops.SWAP.copy()
        elif name == "heisenberg":
            h = ops.heisenberg(p.get("J", 1.0), p.get("B", 0.0))
        elif name == "cnot_generator":
            h = ops.cnot_generator(p.get("dt", 0.0))
        elif name == "nv_secular":
            h = ops.nv_secular(*(p.get(f"gamma{k}", 0.0) for k in range(1, 6)), p.get("gamma6", 0.0))
        elif name == "matrix":
            if "matrix" not in params:
                raise ValidationError("matrix generator needs params.matrix", f"{path}/params")
            h = matrix(params["matrix"], f"{path}/params/matrix")
        else:  # pragma: no cover - the schema rejects this
            raise ValidationError(f"unknown generator {name!r}", f"{path}/generator")
    except KeyError as exc:
        raise ValidationError(f"bad generator parameter {exc}", f"{path}/params") from None
    h = h * scalar(g.get("scale", 1.0), f"{path}/scale")
    if h.shape != (d_s * d_e, d_s * d_e):
        raise ValidationError(f"generator {name!r} has side {h.shape[0]}, wires need {d_s * d_e}", path)
    if not is_hermitian(h):
        raise ValidationError(f"generator {name!r} is not Hermitian", path)
    return h


def _hamiltonian(doc: dict, system: Wire, env: Wire) -> HamiltonianSpec:
    h = doc["hamiltonian"]
    wires = (system, env)
    d_s, d_e = system.dim, env.dim
    kind = h["type"]
    if kind == "constant":
        return Constant(LabeledOperator(wires, _generator(h, d_s, d_e, "/hamiltonian")))
    if kind == "piecewise":
        segs = []
        for k, seg in enumerate(h["segments"]):
            path = f"/hamiltonian/segments/{k}"
            segs.append((scalar(seg["start"], f"{path}/start"), scalar(seg["end"], f"{path}/end"),
                         LabeledOperator(wires, _generator(seg, d_s, d_e, path))))
        return PiecewiseConstant(tuple(segs))
    if kind == "pulses":
        pulses = tuple(
            (scalar(p["time"], f"/hamiltonian/pulses/{k}/time"), LabeledOperator(wires, _generator(p, d_s, d_e, f"/hamiltonian/pulses/{k}")))
            for k, p in enumerate(h["pulses"])
        )
        base = LabeledOperator(wires, _generator(h["base"], d_s, d_e, "/hamiltonian/base")) if "base" in h else None
        return PulseTrain(pulses, base)
    if kind == "product_terms":
        terms = []
        for k, t in enumerate(h["terms"]):
            path = f"/hamiltonian/terms/{k}"
            s = LabeledOperator((system,), matrix(t["system"], f"{path}/system"))
            e = t.get("environment")
            e = None if e is None else LabeledOperator((env,), matrix(e, f"{path}/environment"))
            terms.append((time_function(t["f"], f"{path}/f"), s, e))
        window = tuple(scalar(x, "/hamiltonian/window") for x in h.get("window", (0.0, 1.0)))
        return ProductTerms(tuple(terms), window, int(h.get("samples", 64)))
    raise ValidationError(f"unknown Hamiltonian type {kind!r}", "/hamiltonian/type")  # pragma: no cover


def _local_state(value, d: int, path: str) -> np.ndarray:
    if isinstance(value, dict):
        rho = matrix(value["matrix"], f"{path}/matrix")
    else:
        if isinstance(value, str):
            v = ops.KETS[value]
        else:
            v = np.array([complex(*x) if isinstance(x, list) else complex(x) for x in value])
        n = np.linalg.norm(v)
        if n == 0:
            raise ValidationError("zero state vector", path)
        v = v / n
        rho = np.outer(v, v.conj())
    if rho.shape != (d, d):
        raise ValidationError(f"state has side {rho.shape[0]}, wire has dimension {d}", path)
    return rho


def _initial_state(doc: dict, system: Wire, env: Wire) -> LabeledOperator:
    st = doc["initial_state"]
    d_s, d_e = system.dim, env.dim
    kind = st["type"]
    if kind == "bell":
        if (d_s, d_e) != (2, 2):
            raise ValidationError("bell states need qubit system and environment", "/initial_state")
        v = ops.bell_states()[st.get("index", 0)]
        rho = np.outer(v, v.conj())
    elif kind == "maximally_entangled":
        if d_s != d_e:
            raise ValidationError("maximally entangled state needs equal dimensions", "/initial_state")
        v = ops.max_entangled(d_s)
        rho = np.outer(v, v.conj())
    elif kind == "product":
        rho = np.kron(_local_state(st["system"], d_s, "/initial_state/system"),
                      _local_state(st["environment"], d_e, "/initial_state/environment"))
    elif kind == "quantum_classical":
        w = np.array([scalar(x, f"/initial_state/weights/{k}") for k, x in enumerate(st["weights"])])
        if len(w) != len(st["states"]) or len(w) > d_e:
            raise ValidationError("need one system state per weight, at most d_E of them", "/initial_state")
        if (w < 0).any() or abs(w.sum() - 1) > 1e-9:
            raise ValidationError(f"weights {w.tolist()} are not a probability distribution", "/initial_state/weights")
        basis = matrix(st["basis"], "/initial_state/basis") if "basis" in st else np.eye(d_e, dtype=complex)
        rho = sum(
            p * np.kron(_local_state(s, d_s, f"/initial_state/states/{k}"), np.outer(basis[:, k], basis[:, k].conj()))
            for k, (p, s) in enumerate(zip(w, st["states"]))
        )
    elif kind == "matrix":
        rho = matrix(st["matrix"], "/initial_state/matrix")
    else:  # pragma: no cover
        raise ValidationError(f"unknown state type {kind!r}", "/initial_state/type")
    if rho.shape != (d_s * d_e, d_s * d_e):
        raise ValidationError(f"initial state has side {rho.shape[0]}, expected {d_s * d_e}", "/initial_state")
    if not is_hermitian(rho) or abs(np.trace(rho) - 1) > 1e-9 or np.linalg.eigvalsh((rho + rho.conj().T) / 2).min() < -1e-9:
        raise ValidationError("initial state is not a density operator", "/initial_state")
    return LabeledOperator((system, env), rho)


def parse_document(doc: Any) -> Scenario:
    errors = sorted(_validator().iter_errors(doc), key=lambda e: e.path)
    if errors:
        err = jsonschema.exceptions.best_match(errors)
        raise SchemaError(err.message, _pointer(err.absolute_path) or "/")
    system = Wire("S", doc["wires"]["system"])
    env = Wire("E", doc["wires"]["environment"])
    try:
        spec = _hamiltonian(doc, system, env)
    except ValidationError:
        raise
    except ProcmatError as exc:
        raise ValidationError(str(exc), "/hamiltonian") from None
    rho = _initial_state(doc, system, env)
    try:
        probes = ProbeTimes(tuple(scalar(t, f"/probe_times/{k}") for k, t in enumerate(doc["probe_times"])))
    except ValidationError as exc:
        raise ValidationError(str(exc), exc.path or "/probe_times") from None
    return Scenario(
        doc=doc,
        name=doc.get("name", ""),
        seed=int(doc.get("seed", 0)),
        system=system,
        env=env,
        hamiltonian=spec,
        initial_state=rho,
        probes=probes,
        slices=int(doc.get("slices", 1000)),
        analyses=list(doc.get("analyses", [])),
    )


def parse_scenario(text: str) -> Scenario:
    """Parse and validate a scenario document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON: {exc}", "") from None
    return parse_document(doc)


def shipped_scenarios() -> list[str]:
    root = resources.files("procmat").joinpath("data/scenarios")
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def load_text(ref: str) -> str:
    """Read a scenario from a path, or a shipped scenario by name."""
    path = Path(ref)
    if path.exists():
        return path.read_text(encoding="utf-8")
    name = ref[:-5] if ref.endswith(".json") else ref
    if name in shipped_scenarios():
        return resources.files("procmat").joinpath(f"data/scenarios/{name}.json").read_text(encoding="utf-8")
    raise InputError(f"no scenario file or shipped scenario named {ref!r}")


# ---------------------------------------------------------------------------
# running


def build_process(sc: Scenario) -> ProcessMatrix:
    us = segment_unitaries(sc.hamiltonian, sc.probes, sc.slices)
    return build_from_dynamics(sc.initial_state, us, sc.probes)


def _cut(value, w: ProcessMatrix, path: str):
    if value in (None, "default"):
        return default_cuts(w)[0]
    first, second = value
    if set(first) | set(second) != set(w.labels) or set(first) & set(second):
        raise ValidationError(f"cut {first}|{second} does not tile {list(w.labels)}", path)
    return tuple(first), tuple(second)


@dataclass
class SweepRow:
    parameter: str
    value: float
    negativity: float
    cut: str


@dataclass
class ResultBundle:
    scenario: str
    seed: int
    results: list[dict] = field(default_factory=list)

    def sweeps(self) -> list[SweepRow]:
        return [row for r in self.results if r["type"] == "negativity-sweep" for row in r["_rows"]]

    def to_json(self) -> dict:
        clean = [{k: v for k, v in r.items() if not k.startswith("_")} for r in self.results]
        return {"scenario": self.scenario, "seed": self.seed, "results": clean}


def _site_op(spec: dict, k: int, n_sites: int, d: int, path: str) -> ChoiOperator:
    last = k == n_sites - 1
    kind = spec["kind"]
    w_in, w_out = Wire("in", d), Wire("out", d)
    if kind == "identity":
        return trace_effect(w_in) if last else choi_of_unitary(np.eye(d), [w_in], [w_out])
    if kind == "projector":
        basis = {"z": np.eye(2), "x": np.column_stack([ops.KETS["+"], ops.KETS["-"]]),
                 "y": np.column_stack([ops.KETS["+i"], ops.KETS["-i"]])}[spec.get("basis", "z")]
        if d != 2:
            raise ValidationError("named projector bases are for qubits", path)
        outcome = spec.get("outcome", 0)
        proj = np.outer(basis[:, outcome], basis[:, outcome].conj())
        if last:
            return ChoiOperator(LabeledOperator((w_in,), proj.T), ("in",), ())
        return choi_of_kraus([proj], [w_in], [w_out])
    if kind == "unitary":
        if last:
            raise ValidationError("the final site takes an effect, not a unitary", path)
        return choi_of_unitary(matrix(spec["matrix"], f"{path}/matrix"), [w_in], [w_out])
    raise ValidationError(f"unknown site operation {kind!r}", path)  # pragma: no cover


def _sweep_point(sc: Scenario, a: dict, value: float) -> float:
    doc = set_pointer(sc.doc, a["parameter"], value)
    doc.pop("analyses", None)
    sub = parse_document(doc)
    w = build_process(sub)
    return negativity(w, _cut(a.get("cut"), w, "cut"))


def sweep_values(a: dict) -> np.ndarray:
    return np.linspace(scalar(a["start"], "start"), scalar(a["stop"], "stop"), int(a["steps"]))


def run_sweep(sc: Scenario, a: dict, jobs: int = 1) -> list[SweepRow]:
    values = sweep_values(a)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            negs = list(pool.map(lambda v: _sweep_point(sc, a, float(v)), values))
    else:
        negs = [_sweep_point(sc, a, float(v)) for v in values]
    w0 = build_process(sc)
    name = cut_name(_cut(a.get("cut"), w0, "cut"))
    rows = [SweepRow(a["parameter"], float(v), float(n), name) for v, n in zip(values, negs)]
    return sorted(rows, key=lambda r: r.value)


def run_analysis(sc: Scenario, a: dict, w: ProcessMatrix, rng: np.random.Generator, jobs: int = 1) -> dict:
    kind = a["type"]
    out: dict = {"type": kind}
    if "name" in a:
        out["name"] = a["name"]
    if kind == "certificate":
        cert = theorem1_certificate(sc.hamiltonian, rng=rng)
        out.update(holds=cert.holds, evidence=_jsonable(cert.evidence),
                   basis=None if cert.basis is None else matrix_to_json(cert.basis))
    elif kind == "classify":
        cuts = None
        if "cuts" in a:
            cuts = []
            for k, c in enumerate(a["cuts"]):
                cuts.extend(default_cuts(w) if c == "default" else [_cut(c, w, f"cuts/{k}")])
        report = classify(w, spec=sc.hamiltonian, rho_init=sc.initial_state, cuts=cuts, rng=rng)
        out.update(report.to_dict())
    elif kind == "negativity-sweep":
        rows = run_sweep(sc, a, jobs)
        out["_rows"] = rows
        out["rows"] = [row.__dict__ for row in rows]
    elif kind == "dilate":
        decomp = mixed_unitary_components(sc.hamiltonian, sc.probes, sc.initial_state, sc.slices, rng=rng)
        circuit = dilate_mixed_unitary(decomp)
        wc = circuit.simulate()
        out.update(branches=decomp.n_branches, weights=decomp.weights.tolist(),
                   residual=float(np.linalg.norm(w.matrix - wc.matrix)))
    elif kind == "born":
        d = sc.system.dim
        if len(a["instruments"]) != w.n_sites:
            raise ValidationError(f"{len(a['instruments'])} site operations for {w.n_sites} sites", "instruments")
        site_ops = [_site_op(s, k, w.n_sites, d, f"instruments/{k}") for k, s in enumerate(a["instruments"])]
        out["probability"] = born_rule(w, site_ops)
    elif kind == "unitaries":
        us = segment_unitaries(sc.hamiltonian, sc.probes, sc.slices)
        out["unitaries"] = [matrix_to_json(u.matrix) for u in us]
        out["identity_deviation"] = [float(np.abs(u.matrix - np.eye(u.side)).max()) for u in us]
    return out


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    return x


def run(sc: Scenario, seed: int | None = None, jobs: int = 1, only: str | None = None) -> ResultBundle:
    """Execute the scenario's analyses in order (or only the one named ``only``)."""
    seed = sc.seed if seed is None else seed
    rng = np.random.default_rng(seed)
    bundle = ResultBundle(sc.name, seed)
    analyses = list(enumerate(sc.analyses))
    if only is not None:
        analyses = [(i, a) for i, a in analyses if a.get("name") == only]
        if not analyses:
            raise InputError(f"no analysis named {only!r}")
    if not analyses:
        return bundle
    w = build_process(sc)
    for i, a in analyses:
        try:
            bundle.results.append({"index": i, **run_analysis(sc, a, w, rng, jobs)})
        except ProcmatError as exc:
            exc.args = (f"analysis {i} ({a['type']}): {exc.args[0] if exc.args else exc}",) + exc.args[1:]
            raise
    return bundle


# ---------------------------------------------------------------------------
# output


def sweep_csv(rows: list[SweepRow]) -> str:
    lines = ["parameter,value,negativity,cut"]
    for r in rows:
        lines.append(f"{r.parameter},{r.value:.12e},{r.negativity:.12e},{r.cut}")
    return "\n".join(lines) + "\n"


def emit(bundle: ResultBundle, fmt: str = "json", path: str | Path | None = None) -> str:
    """Render results as JSON (full bundle) or CSV (sweep rows); write to ``path`` if given."""
    if fmt == "csv":
        text = sweep_csv(bundle.sweeps())
    elif fmt == "json":
        text = json.dumps(bundle.to_json(), indent=2) + "\n"
    else:
        raise InputError(f"unknown output format {fmt!r}")
    if path is not None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    return text
