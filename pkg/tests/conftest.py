from __future__ import annotations

import numpy as np
import pytest

from dagsobol.basis import Normal, Uniform
from dagsobol.dag import ProcessDag
from dagsobol.processes import ProcessSpec

NET13_NODES = [f"v{i}" for i in range(1, 14)]
NET13_EDGES = [
    ("v1", "v2"), ("v1", "v7"), ("v2", "v7"), ("v2", "v8"), ("v3", "v8"),
    ("v4", "v9"), ("v5", "v9"), ("v6", "v10"), ("v7", "v11"), ("v8", "v11"),
    ("v9", "v12"), ("v10", "v12"), ("v11", "v13"), ("v12", "v13"),
]


def net13_dag() -> ProcessDag:
    return ProcessDag(NET13_NODES, NET13_EDGES)


def net13_spec() -> ProcessSpec:
    """Thirteen-node process with mild polynomial links (each node degree <= 2 in its parents)."""
    funcs = {
        "v2": "0.8 * v1 + 0.3 * v1 ^ 2",
        "v7": "v1 + v2",
        "v8": "v2 - 0.5 * v3",
        "v9": "v4 + 0.5 * v5 + 0.2 * v4 * v5",
        "v10": "1.5 * v6",
        "v11": "v7 + 0.5 * v8",
        "v12": "v9 + v10 + 0.1 * v9 * v10",
        "v13": "v11 + v12",
    }
    dists = {
        "v1": Normal(0.0, 1.0),
        "v3": Uniform(-1.0, 1.0),
        "v4": Normal(1.0, 0.5),
        "v5": Uniform(0.0, 2.0),
        "v6": Normal(0.0, 0.7),
    }
    return ProcessSpec(net13_dag(), dists, funcs, name="net13")


def linear_net13_spec(coefs: dict[tuple[str, str], float], sds: dict[str, float]) -> ProcessSpec:
    funcs = {}
    for v in NET13_NODES:
        terms = [f"{coefs[(a, b)]!r} * {a}" for a, b in NET13_EDGES if b == v]
        if terms:
            funcs[v] = " + ".join(terms)
    dists = {v: Normal(0.0, sds[v]) for v in ("v1", "v3", "v4", "v5", "v6")}
    return ProcessSpec(net13_dag(), dists, funcs, name="linear-net13")


def linear_indices(coefs: dict[tuple[str, str], float], sds: dict[str, float]) -> dict[str, float]:
    """Analytic first-order indices of the linear process: propagate input gains."""
    dag = net13_dag()
    gain: dict[str, dict[str, float]] = {}
    for v in dag.topological_order():
        if dag.is_source(v):
            gain[v] = {v: 1.0}
            continue
        acc: dict[str, float] = {}
        for a in dag.direct_predecessors(v):
            for s, g in gain[a].items():
                acc[s] = acc.get(s, 0.0) + coefs[(a, v)] * g
        gain[v] = acc
    contrib = {s: (g * sds[s]) ** 2 for s, g in gain["v13"].items()}
    total = sum(contrib.values())
    return {s: c / total for s, c in contrib.items()}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def criterion(request):
    """Record one acceptance line; the lines are echoed in the terminal summary."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def record(number: int, ok: bool, detail: str) -> bool:
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        lines.append(line)
        print(line)
        return ok

    return record


_ACCEPTANCE = pytest.StashKey[list]()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
