"""The three estimators: naive PCE, network PCE and sparse network PCE.

Every engine ends with an orthonormal expansion of the output in the network
inputs, from which Sobol indices are read off exactly.

The network engines work level by level.  The output is first regressed on
a basis over its direct predecessors.  Each non-source node left in the
expansion is then itself regressed on a basis over *its* direct
predecessors (one sub-fit per node, at the next level's degree), and the
fitted polynomials are substituted into the expansion.  Substitution is done
exactly on monomials in standardized coordinates, so no observations are
spent on re-expressing the composite; once only inputs remain, the monomials
are converted back to the inputs' orthonormal families.
"""

from __future__ import annotations

import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from math import comb
from typing import Callable, Mapping, Sequence

import numpy as np

from .basis import (
    Distribution,
    Empirical,
    GroupBasis,
    OrthonormalBasis,
    group_basis,
    monomial_inverse,
    tensor_over_groups,
    univariate_group,
)
from .dag import ProcessDag
from .data import Dataset
from .errors import ConstraintUnmet, DataError, InsufficientData, Underdetermined, ZeroVariance
from .polyalg import Poly, family_inverse, to_orthonormal
from .regression import CoefficientVector, FitConfig, fit
from .sobol import SobolReport, sobol_from_pce, summarize

PRUNE_RTOL = 1e-12


@dataclass(frozen=True)
class EngineConfig:
    """Engine settings.

    ``degrees[l-1]`` is the highest total degree at level ``l``; levels past
    the end of the tuple reuse its last entry.  Network sub-fits of nodes
    substituted at level ``l`` use the degree of level ``l + 1``.
    """

    degrees: tuple[int, ...] = (3,)
    fit: FitConfig = field(default_factory=FitConfig)
    seed: int | None = None

    def __post_init__(self):
        degs = tuple(int(d) for d in self.degrees)
        if not degs or min(degs) < 1:
            raise ValueError(f"all degrees must be >= 1, got {self.degrees}")
        object.__setattr__(self, "degrees", degs)

    @classmethod
    def uniform(cls, p: int, gamma: float = 1e-3, mode: str = "sparse", seed: int | None = None) -> "EngineConfig":
        return cls((p,), FitConfig(mode=mode, gamma=gamma), seed)

    def degree(self, level: int) -> int:
        return self.degrees[min(level, len(self.degrees)) - 1]


@dataclass
class LevelExpansion:
    """One fitted regression of the recursion.

    ``target`` is the output (level 1) or the node being re-expressed;
    ``basis.index`` holds the per-group function indices of each term.
    """

    level: int
    target: str
    groups: tuple[tuple[str, ...], ...]
    basis: OrthonormalBasis
    coefficients: CoefficientVector


@dataclass
class PceModel:
    """Final expansion of the output in orthonormal functions of the inputs."""

    output: str
    engine: str
    basis: OrthonormalBasis
    theta: np.ndarray
    inputs: tuple[str, ...]
    expansions: list[LevelExpansion] = field(default_factory=list)
    excluded: tuple[str, ...] = ()
    diagnostics: dict = field(default_factory=dict)

    @property
    def support(self) -> int:
        return int(np.count_nonzero(self.theta))

    def predict(self, data: Mapping[str, np.ndarray]) -> np.ndarray:
        return self.basis.evaluate(data) @ self.theta


# helpers ----------------------------------------------------------------------


def _columns(data) -> Mapping[str, np.ndarray]:
    return data.columns if isinstance(data, Dataset) else data


def _require(cols: Mapping[str, np.ndarray], names, context: str) -> None:
    from .errors import MissingColumn

    for v in names:
        if v not in cols:
            raise MissingColumn(v, context)


def _row_count(cols: Mapping[str, np.ndarray]) -> int:
    return len(next(iter(cols.values())))


class _Coordinates:
    """Standardization of every node: known distributions for inputs, sample moments otherwise."""

    def __init__(self, dag: ProcessDag, cols: Mapping[str, np.ndarray], dists: Mapping[str, Distribution]):
        self.dag, self.cols = dag, cols
        self.dists: dict[str, Distribution] = {}
        self.loc: dict[str, float] = {}
        self.scale: dict[str, float] = {}
        self.degenerate: set[str] = set()
        self._dists_in = dists

    def add(self, v: str) -> None:
        if v in self.loc or v in self.degenerate:
            return
        dist = self._dists_in.get(v) if self.dag.is_source(v) else None
        if dist is None:
            dist = Empirical(self.cols[v])
        if dist.degenerate:
            self.degenerate.add(v)
            return
        self.dists[v] = dist
        self.loc[v], self.scale[v] = dist.loc, dist.scale

    def usable(self, names: Sequence[str]) -> list[str]:
        for v in names:
            self.add(v)
        return [v for v in names if v not in self.degenerate]

    def z(self, v: str) -> np.ndarray:
        return (self.cols[v] - self.loc[v]) / self.scale[v]

    def group(self, members: Sequence[str], p: int) -> GroupBasis:
        if len(members) == 1 and self.dag.is_source(members[0]) and self.dists[members[0]].family:
            v = members[0]
            return univariate_group(v, self.dists[v], p)
        return group_basis(
            {v: self.cols[v] for v in members},
            p,
            loc=[self.loc[v] for v in members],
            scale=[self.scale[v] for v in members],
            variables=members,
        )


def _regress(
    dag: ProcessDag,
    coords: _Coordinates,
    regressors: Sequence[str],
    y: np.ndarray,
    p: int,
    cfg: FitConfig,
    level: int,
    target: str,
) -> LevelExpansion:
    usable = coords.usable(regressors)
    dec = dag.independent_decomposition(usable, level=level)
    where = f"level {level} fit of {target!r}"
    try:
        groups = [coords.group(g, p) for g in dec.groups]
    except InsufficientData as exc:
        raise InsufficientData(f"{where}: {exc}") from None
    basis = tensor_over_groups(groups, p)
    Psi = basis.evaluate(coords.cols)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConstraintUnmet)
        coef = fit(Psi, y, cfg, subproblem=where)
    return LevelExpansion(level, target, dec.groups, basis, coef)


def _prune(theta: np.ndarray) -> np.ndarray:
    theta = np.asarray(theta, dtype=float).copy()
    if theta.size and np.abs(theta).max() > 0:
        theta[np.abs(theta) <= PRUNE_RTOL * np.abs(theta).max()] = 0.0
    return theta


def _final_basis(poly: Poly, inputs: Sequence[str], coords: _Coordinates) -> tuple[OrthonormalBasis, np.ndarray]:
    """Re-express a monomial polynomial in the inputs' orthonormal families."""
    used = [v for v in inputs if v in poly.vars]
    poly = poly.reorder(used)
    maxdeg = {v: int(poly.exps[:, j].max()) if poly.n_terms else 0 for j, v in enumerate(used)}
    groups = [coords.group([v], maxdeg[v]) for v in used]
    inverses = {}
    for v, g in zip(used, groups):
        inverses[v] = family_inverse(g.family, maxdeg[v]) if g.family else monomial_inverse(g)
    idx, coefs = to_orthonormal(poly, inverses)
    # graded order of the multi-indices
    order = sorted(range(len(coefs)), key=lambda i: (int(idx[i].sum()), tuple(-idx[i])))
    idx, coefs = idx[order], coefs[order]
    basis = OrthonormalBasis(tuple(groups), idx.reshape(len(coefs), len(used)))
    return basis, coefs


def _report(model: PceModel, engine: str, output: str, m: int) -> SobolReport:
    basis, theta = model.basis, model.theta
    names = model.inputs
    try:
        sub = sobol_from_pce(theta, basis) if basis.size else None
    except ZeroVariance:
        sub = None
    first = np.zeros(len(names))
    total = np.zeros(len(names))
    extra: dict = {}
    if sub is None:
        mean = float(theta[0]) if theta.size else 0.0
        var = 0.0
        extra["zero_variance"] = True
    else:
        pos = {v: i for i, v in enumerate(names)}
        for v, s, t in zip(sub.inputs, sub.first, sub.total):
            first[pos[v]], total[pos[v]] = s, t
        mean, var = sub.mean, sub.variance
    if model.excluded:
        extra["excluded_degenerate"] = list(model.excluded)
    extra.update(model.diagnostics)
    return SobolReport(
        tuple(names), first, total, mean, var, engine=engine, output=output,
        support=model.support, n_obs=m, extra=extra,
    )


# engines ----------------------------------------------------------------------


def fit_naive(
    dag: ProcessDag,
    output: str,
    data,
    dists: Mapping[str, Distribution],
    cfg: EngineConfig | None = None,
) -> tuple[PceModel, SobolReport]:
    """Tensor-product expansion of the output directly in the network inputs."""
    cfg = cfg or EngineConfig()
    cols = _columns(data)
    inputs = dag.influencing_inputs(output)
    if not inputs:
        raise DataError(f"output {output!r} has no inputs")
    _require(cols, list(inputs) + [output], "naive fit")
    coords = _Coordinates(dag, cols, dists)
    usable = coords.usable(inputs)
    p = cfg.degree(1)
    groups = [coords.group([v], p) for v in usable]
    basis = tensor_over_groups(groups, p)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConstraintUnmet)
        coef = fit(basis.evaluate(cols), cols[output], cfg.fit, subproblem=f"naive fit of {output!r}")
    theta = _prune(coef.theta)
    engine = "naive" if cfg.fit.mode == "dense" else "naive-sparse"
    model = PceModel(
        output, engine, basis, theta, tuple(inputs),
        [LevelExpansion(1, output, tuple((v,) for v in usable), basis, coef)],
        tuple(v for v in inputs if v in coords.degenerate),
        {"constraint_unmet": [] if coef.constraint_met else [output]},
    )
    return model, _report(model, engine, output, _row_count(cols))


def _fit_network(dag, output, data, dists, cfg: EngineConfig, engine: str):
    cols = _columns(data)
    seq = dag.predecessor_sequence(output)
    needed = sorted(dag.ancestors(output), key=dag.index.__getitem__)
    _require(cols, needed, f"{engine} fit")
    inputs = dag.influencing_inputs(output)
    coords = _Coordinates(dag, cols, dists)

    y = cols[output]
    top = _regress(dag, coords, dag.direct_predecessors(output), y, cfg.degree(1), cfg.fit, 1, output)
    expansions = [top]
    unmet = [] if top.coefficients.constraint_met else [output]
    poly = top.basis.to_poly(_prune(top.coefficients.theta))
    constant = Poly.constant(0.0)

    cache: dict[tuple[str, int], Poly] = {}
    level = 0
    while True:
        level += 1
        pending = [v for v in poly.used_vars() if not dag.is_source(v)]
        if not pending:
            break
        if level > len(seq):
            raise AssertionError("substitution did not terminate")
        p_next = cfg.degree(level + 1)
        mapping = {}
        for v in sorted(pending, key=dag.index.__getitem__):
            key = (v, p_next)
            if key not in cache:
                sub = _regress(dag, coords, dag.direct_predecessors(v), coords.z(v), p_next, cfg.fit, level + 1, v)
                expansions.append(sub)
                if not sub.coefficients.constraint_met:
                    unmet.append(v)
                cache[key] = sub.basis.to_poly(_prune(sub.coefficients.theta))
            mapping[v] = cache[key]
        poly = poly.substitute(mapping)

    poly = (poly + constant).compact()
    # classify every input, including those hidden behind a degenerate node
    usable = coords.usable(inputs)
    basis, theta = _final_basis(poly, usable, coords)
    theta = _prune(theta)
    model = PceModel(
        output, engine, basis, theta, tuple(inputs), expansions,
        tuple(v for v in inputs if v in coords.degenerate),
        {"constraint_unmet": unmet},
    )
    return model, _report(model, engine, output, _row_count(cols))


def fit_network(dag, output, data, dists, cfg: EngineConfig | None = None) -> tuple[PceModel, SobolReport]:
    """Network PCE with least-squares fits at every level."""
    cfg = cfg or EngineConfig()
    cfg = replace(cfg, fit=replace(cfg.fit, mode="dense"))
    return _fit_network(dag, output, data, dists, cfg, "network")


def fit_sparse_network(dag, output, data, dists, cfg: EngineConfig | None = None) -> tuple[PceModel, SobolReport]:
    """Network PCE with goodness-of-fit-constrained LASSO at every level."""
    cfg = cfg or EngineConfig()
    cfg = replace(cfg, fit=replace(cfg.fit, mode="sparse"))
    return _fit_network(dag, output, data, dists, cfg, "sn")


ENGINES: dict[str, Callable] = {
    "naive": lambda dag, out, data, dists, cfg: fit_naive(
        dag, out, data, dists, replace(cfg, fit=replace(cfg.fit, mode="dense"))
    ),
    "naive-sparse": lambda dag, out, data, dists, cfg: fit_naive(
        dag, out, data, dists, replace(cfg, fit=replace(cfg.fit, mode="sparse"))
    ),
    "network": fit_network,
    "sn": fit_sparse_network,
}


# sample-size bookkeeping --------------------------------------------------------


@dataclass(frozen=True)
class MinObservations:
    n_inputs: int
    width: int
    naive: int
    network: int

    @property
    def ratio(self) -> float:
        return self.width / self.n_inputs


def network_min_observations(dag: ProcessDag, output: str, p: int) -> MinObservations:
    """Rows needed by a dense naive fit and by the largest dense network sub-fit."""
    n = len(dag.influencing_inputs(output))
    d = dag.max_regression_width(output)
    return MinObservations(n, d, comb(n + p, n), comb(d + p, d))


# replication ------------------------------------------------------------------


def _thread_count(reps: int) -> int:
    try:
        cap = int(os.environ.get("DAGSOBOL_THREADS", "1"))
    except ValueError:
        cap = 1
    return max(1, min(cap, reps))


def replicate(
    engine: Callable | str,
    dag: ProcessDag,
    output: str,
    dists: Mapping[str, Distribution],
    cfg: EngineConfig,
    reps: int,
    resampler: Callable[[np.random.SeedSequence], object],
    seed: int | np.random.SeedSequence | None = None,
) -> SobolReport:
    """Run ``engine`` on ``reps`` independent datasets and average the indices.

    ``resampler`` maps a per-replication seed sequence to a dataset (fresh
    simulation or a bootstrap resample).  Seeds are spawned from ``seed`` by
    index, so results do not depend on thread scheduling.  Failed
    replications are counted; if all fail the first error is raised.
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")
    fn = ENGINES[engine] if isinstance(engine, str) else engine
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    children = root.spawn(reps)

    def one(child):
        data = resampler(child)
        return fn(dag, output, data, dists, cfg)[1]

    def guarded(child):
        try:
            return one(child), None
        except (DataError, ArithmeticError) as exc:
            return None, exc
        except Exception as exc:  # numerical failures are counted, not fatal
            from .errors import NumericalError

            if isinstance(exc, NumericalError):
                return None, exc
            raise

    threads = _thread_count(reps)
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(guarded, children))
    else:
        results = [guarded(c) for c in children]
    reports = [r for r, _ in results if r is not None]
    errors = [e for _, e in results if e is not None]
    if not reports:
        raise errors[0]
    out = summarize(reports)
    out.extra["failures"] = len(errors)
    if errors:
        out.extra["failure_messages"] = sorted({str(e) for e in errors})
    unmet = sum(1 for r in reports if r.extra.get("constraint_unmet"))
    out.extra["reps_with_constraint_unmet"] = unmet
    return out


def standard_errors(report: SobolReport) -> tuple[np.ndarray, np.ndarray]:
    """Standard errors of the replicated means."""
    if report.first_sd is None or report.reps < 2:
        z = np.zeros(len(report.inputs))
        return z, z
    k = np.sqrt(report.reps)
    return report.first_sd / k, report.total_sd / k


def simulator(spec, m: int) -> Callable[[np.random.SeedSequence], Dataset]:
    from .processes import simulate

    return lambda child: simulate(spec, m, child)


def bootstrapper(data: Dataset) -> Callable[[np.random.SeedSequence], Dataset]:
    def draw(child):
        rng = np.random.default_rng(child)
        return data.take(rng.integers(0, data.m, data.m))

    return draw
