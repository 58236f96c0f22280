"""Process definitions, JSON serialization, simulation, and the two built-in benchmarks."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable, Mapping

import numpy as np

from .basis import Distribution, Normal, Uniform
from .dag import ProcessDag
from .data import Dataset
from .errors import DagSobolError, EvaluationFailure, SpecError
from .expr import Expression, parse_expression

SPEC_VERSION = 1

NodeFunction = str | Callable[[Mapping[str, np.ndarray]], np.ndarray]


@dataclass
class ProcessSpec:
    """A DAG plus input distributions and node equations.

    ``node_functions`` maps each non-source node to an expression string in
    its direct predecessors and the ``constants``, or to a callable taking
    that same mapping of arrays.
    """

    dag: ProcessDag
    input_dists: dict[str, Distribution]
    node_functions: dict[str, NodeFunction]
    constants: dict[str, float] = field(default_factory=dict)
    output: str | None = None
    name: str = ""
    notes: str = ""

    def __post_init__(self):
        self._compiled: dict[str, Expression | Callable] = {}
        for v in self.dag.nodes:
            preds = self.dag.direct_predecessors(v)
            if not preds:
                if v not in self.input_dists:
                    raise SpecError(f"source node {v!r} has no distribution")
                if v in self.node_functions:
                    raise SpecError(f"source node {v!r} must not have a function")
                continue
            if v in self.input_dists:
                raise SpecError(f"non-source node {v!r} must not have a distribution")
            fn = self.node_functions.get(v)
            if fn is None:
                raise SpecError(f"node {v!r} has no function")
            if isinstance(fn, str):
                expr = parse_expression(fn)
                free = expr.names - set(preds) - set(self.constants)
                if free:
                    raise SpecError(
                        f"function of {v!r} uses {sorted(free)}, which are neither "
                        "direct predecessors nor constants"
                    )
                self._compiled[v] = expr
            elif callable(fn):
                self._compiled[v] = fn
            else:
                raise SpecError(f"function of {v!r} must be an expression string or callable")
        extra = set(self.input_dists) - set(self.dag.nodes)
        if extra:
            raise SpecError(f"distributions given for unknown nodes {sorted(extra)}")
        if self.output is None:
            sinks = [s for s in self.dag.sinks() if not self.dag.is_source(s)]
            if len(sinks) != 1:
                raise SpecError(f"cannot infer the output node; sinks are {sinks}")
            self.output = sinks[0]
        elif self.output not in self.dag.index:
            raise SpecError(f"output {self.output!r} is not a node")

    @property
    def inputs(self) -> tuple[str, ...]:
        return self.dag.sources()

    def evaluate(self, sources: Mapping[str, np.ndarray], nodes: tuple[str, ...] | None = None) -> dict[str, np.ndarray]:
        """Evaluate every node (topological order) from source columns."""
        order = self.dag.topological_order()
        vals: dict[str, np.ndarray] = {}
        m = None
        for v in order:
            if self.dag.is_source(v):
                if v not in sources:
                    raise SpecError(f"missing values for source {v!r}")
                vals[v] = np.asarray(sources[v], dtype=float)
                m = len(vals[v]) if m is None else m
                continue
            env = {u: vals[u] for u in self.dag.direct_predecessors(v)}
            env.update(self.constants)
            with np.errstate(all="ignore"):
                try:
                    out = self._compiled[v](env)
                except ZeroDivisionError:
                    raise EvaluationFailure(v, 0, "division by zero") from None
                out = np.broadcast_to(np.asarray(out, dtype=float), (m,)).copy()
            bad = ~np.isfinite(out)
            if bad.any():
                raise EvaluationFailure(v, int(np.nonzero(bad)[0][0]))
            vals[v] = out
        if nodes is not None:
            return {v: vals[v] for v in nodes}
        return vals

    def model(self, output: str | None = None) -> Callable[[Mapping[str, np.ndarray]], np.ndarray]:
        """The output as a function of the source columns."""
        target = output or self.output

        def f(x: Mapping[str, np.ndarray]) -> np.ndarray:
            return self.evaluate(x)[target]

        return f

    def to_dict(self) -> dict:
        funcs = {}
        for v, fn in self.node_functions.items():
            if not isinstance(fn, str):
                raise SpecError(f"function of {v!r} is a callable and cannot be serialized")
            funcs[v] = fn
        out = {
            "spec_version": SPEC_VERSION,
            "name": self.name,
            "nodes": list(self.dag.nodes),
            "edges": [[a, b] for a, b in sorted(self.dag.edges, key=lambda e: (self.dag.index[e[1]], self.dag.index[e[0]]))],
            "inputs": {v: self.input_dists[v].to_dict() for v in self.inputs},
            "functions": funcs,
            "constants": dict(self.constants),
            "output": self.output,
        }
        if self.notes:
            out["notes"] = self.notes
        return out

    def to_json(self, path: str | Path | None = None) -> str:
        text = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            Path(path).write_text(text + "\n", encoding="utf-8")
        return text


def input_distribution(d: Mapping) -> Distribution:
    """Parse ``{"dist": "normal"|"uniform", "params": [a, b]}``.

    Normal parameters are ``[mean, stddev]``.  With ``"convention":
    "variance"`` the second Normal parameter is read as a variance instead.
    """
    if not isinstance(d, Mapping):
        raise SpecError(f"distribution must be an object, got {d!r}")
    kind = str(d.get("dist", "")).lower()
    params = d.get("params")
    if not isinstance(params, list) or len(params) != 2:
        raise SpecError(f"distribution needs two params, got {params!r}")
    try:
        a, b = float(params[0]), float(params[1])
    except (TypeError, ValueError):
        raise SpecError(f"non-numeric distribution params {params!r}") from None
    try:
        if kind == "normal":
            conv = d.get("convention", "stddev")
            if conv == "variance":
                if b < 0:
                    raise SpecError("variance must be non-negative")
                b = float(np.sqrt(b))
            elif conv != "stddev":
                raise SpecError(f"unknown Normal convention {conv!r}")
            return Normal(a, b)
        if kind == "uniform":
            return Uniform(a, b)
    except ValueError as exc:
        raise SpecError(str(exc)) from None
    raise SpecError(f"unknown distribution kind {kind!r}")


def spec_from_dict(doc: Mapping) -> ProcessSpec:
    if not isinstance(doc, Mapping):
        raise SpecError("process spec must be a JSON object")
    version = doc.get("spec_version")
    if version != SPEC_VERSION:
        raise SpecError(f"unsupported spec_version {version!r} (expected {SPEC_VERSION})")
    for key in ("nodes", "edges", "inputs", "functions"):
        if key not in doc:
            raise SpecError(f"process spec lacks {key!r}")
    try:
        edges = [(str(a), str(b)) for a, b in doc["edges"]]
    except (TypeError, ValueError):
        raise SpecError("edges must be a list of [from, to] pairs") from None
    try:
        dag = ProcessDag([str(v) for v in doc["nodes"]], edges)
        consts = {str(k): float(v) for k, v in doc.get("constants", {}).items()}
        return ProcessSpec(
            dag,
            {str(k): input_distribution(v) for k, v in doc["inputs"].items()},
            {str(k): str(v) for k, v in doc["functions"].items()},
            consts,
            output=doc.get("output"),
            name=str(doc.get("name", "")),
            notes=str(doc.get("notes", "")),
        )
    except SpecError:
        raise
    except DagSobolError as exc:
        raise SpecError(str(exc)) from None


def load_spec(path: str | Path) -> ProcessSpec:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise SpecError(f"cannot read {path}: {exc.strerror}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from None
    return spec_from_dict(doc)


def simulate(spec: ProcessSpec, m: int, seed: int | np.random.SeedSequence | None = None) -> Dataset:
    """Draw ``m`` independent rows: sources first, then every node in topological order."""
    if m < 1:
        raise ValueError("m must be at least 1")
    rng = np.random.default_rng(seed)
    sources = {v: spec.input_dists[v].sample(rng, m) for v in spec.inputs}
    vals = spec.evaluate(sources)
    order = spec.dag.topological_order()
    return Dataset({v: vals[v] for v in order}, provenance=f"simulated({seed})")


# built-ins ------------------------------------------------------------------


def _builtin_doc(name: str) -> dict:
    text = resources.files("dagsobol").joinpath("specs", f"{name}.json").read_text(encoding="utf-8")
    return json.loads(text)


def builtin_welding(printed_formula: bool = False) -> ProcessSpec:
    """Welding energy process: 11 Normal inputs, weld volume ``V``, energy ``E``.

    The default reads the second Normal parameter of each input as a
    variance and uses ``0.5*(l - g)*(t - e)`` in the volume; this is the
    combination whose Sobol indices match the reference indices.  With
    ``printed_formula=True`` the volume uses ``(l - 9)`` and the second
    parameter is a standard deviation.
    """
    doc = _builtin_doc("welding")
    if printed_formula:
        doc["functions"]["V"] = doc["functions"]["V"].replace("(l - g)", "(l - 9)")
        for d in doc["inputs"].values():
            d.pop("convention", None)
        doc["name"] = "welding-printed"
        doc["notes"] = "Volume with the literal (l - 9) factor; Normal params are (mean, stddev)."
    return spec_from_dict(doc)


def builtin_injection_molding(**constants: float) -> ProcessSpec:
    """Injection-molding reset energy; keyword arguments override the constants."""
    doc = _builtin_doc("injection_molding")
    unknown = set(constants) - set(doc["constants"])
    if unknown:
        raise SpecError(f"unknown constants {sorted(unknown)}")
    doc["constants"].update({k: float(v) for k, v in constants.items()})
    return spec_from_dict(doc)


BUILTINS = {"welding": builtin_welding, "injection_molding": builtin_injection_molding}


def builtin(name: str) -> ProcessSpec:
    try:
        return BUILTINS[name]()
    except KeyError:
        raise SpecError(f"unknown builtin {name!r}; choose from {sorted(BUILTINS)}") from None
