"""Sobol indices from orthonormal expansions and by pick-freeze sampling."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .basis import Distribution, OrthonormalBasis
from .errors import ModelEvaluationFailure, ZeroVariance


@dataclass
class SobolReport:
    """First-order and total Sobol indices of one output.

    ``first`` and ``total`` follow the order of ``inputs``.  Replicated runs
    fill ``first_sd``/``total_sd`` with the spread across replications.
    """

    inputs: tuple[str, ...]
    first: np.ndarray
    total: np.ndarray
    mean: float
    variance: float
    engine: str = ""
    output: str = ""
    support: int | None = None
    n_obs: int | None = None
    reps: int = 1
    first_sd: np.ndarray | None = None
    total_sd: np.ndarray | None = None
    extra: dict = field(default_factory=dict)

    def as_mapping(self, which: str = "total") -> dict[str, float]:
        vals = self.total if which == "total" else self.first
        return {v: float(s) for v, s in zip(self.inputs, vals)}

    def to_dict(self) -> dict:
        out = {
            "engine": self.engine,
            "output": self.output,
            "inputs": list(self.inputs),
            "first_order": {v: float(s) for v, s in zip(self.inputs, self.first)},
            "total": {v: float(s) for v, s in zip(self.inputs, self.total)},
            "mean": float(self.mean),
            "variance": float(self.variance),
            "reps": int(self.reps),
        }
        if self.support is not None:
            out["support"] = int(self.support)
        if self.n_obs is not None:
            out["n_obs"] = int(self.n_obs)
        if self.first_sd is not None:
            out["first_order_sd"] = {v: float(s) for v, s in zip(self.inputs, self.first_sd)}
            out["total_sd"] = {v: float(s) for v, s in zip(self.inputs, self.total_sd)}
        if self.extra:
            out["extra"] = self.extra
        return out


def moments_from_pce(theta: np.ndarray, basis: OrthonormalBasis) -> tuple[float, float]:
    """Mean and variance of an orthonormal expansion."""
    theta = np.asarray(theta, dtype=float)
    const = ~basis.involved().any(axis=1)
    return float(theta[const].sum()), float(np.sum(theta[~const] ** 2))


def sobol_from_pce(theta: np.ndarray, basis: OrthonormalBasis, engine: str = "", output: str = "") -> SobolReport:
    """Indices read off the squared coefficients.

    A function counts toward the first-order index of ``v`` when ``v`` is the
    only variable it depends on, and toward the total index of ``v`` whenever
    it depends on ``v``.  Variables sharing a dependent group are
    inseparable, so their first-order indices are zero and their totals carry
    the group's contribution.
    """
    theta = np.asarray(theta, dtype=float)
    inv = basis.involved()
    mean, var = moments_from_pce(theta, basis)
    if not var > 0.0:
        raise ZeroVariance("expansion has zero variance")
    sq = theta**2
    only = inv & (inv.sum(axis=1) == 1)[:, None]
    first = sq @ only / var
    total = sq @ inv / var
    return SobolReport(basis.variables, first, total, mean, var, engine=engine, output=output)


def sobol_pick_freeze(
    model: Callable[[Mapping[str, np.ndarray]], np.ndarray],
    dists: Mapping[str, Distribution],
    n: int,
    rng: np.random.Generator | int | None = None,
) -> SobolReport:
    """Monte Carlo indices from two independent samples A and B.

    For each input ``i`` the matrix ``AB_i`` is A with column ``i`` taken
    from B.  First order uses ``mean(fB * (fAB_i - fA)) / V``, total uses
    ``mean((fA - fAB_i)**2) / (2 V)``.  Estimates are not clipped to [0, 1].
    """
    if n < 2:
        raise ValueError("pick-freeze needs n >= 2")
    rng = np.random.default_rng(rng)
    names = tuple(dists)
    A = {v: dists[v].sample(rng, n) for v in names}
    B = {v: dists[v].sample(rng, n) for v in names}

    def run(X, tag):
        y = np.asarray(model(X), dtype=float).reshape(-1)
        if y.shape[0] != n or not np.all(np.isfinite(y)):
            raise ModelEvaluationFailure(f"model returned unusable values on sample {tag}")
        return y

    fA, fB = run(A, "A"), run(B, "B")
    f0 = np.mean(np.concatenate([fA, fB]))
    fA, fB = fA - f0, fB - f0
    V = np.var(np.concatenate([fA, fB]))
    if not V > 0.0:
        raise ZeroVariance("model output has zero variance")
    first = np.empty(len(names))
    total = np.empty(len(names))
    for i, v in enumerate(names):
        ABi = dict(A)
        ABi[v] = B[v]
        fAB = run(ABi, f"AB_{v}") - f0
        first[i] = np.mean(fB * (fAB - fA)) / V
        total[i] = np.mean((fA - fAB) ** 2) / (2 * V)
    return SobolReport(names, first, total, float(f0), float(V), engine="pick-freeze", n_obs=n)


def summarize(reports: Sequence[SobolReport]) -> SobolReport:
    """Average replicated reports; the spread goes into the ``*_sd`` fields."""
    if not reports:
        raise ValueError("nothing to summarize")
    first = np.array([r.first for r in reports])
    total = np.array([r.total for r in reports])
    head = reports[0]
    sup = [r.support for r in reports if r.support is not None]
    out = SobolReport(
        head.inputs,
        first.mean(axis=0),
        total.mean(axis=0),
        float(np.mean([r.mean for r in reports])),
        float(np.mean([r.variance for r in reports])),
        engine=head.engine,
        output=head.output,
        support=int(max(sup)) if sup else None,
        n_obs=head.n_obs,
        reps=len(reports),
        first_sd=first.std(axis=0, ddof=1) if len(reports) > 1 else np.zeros(len(head.inputs)),
        total_sd=total.std(axis=0, ddof=1) if len(reports) > 1 else np.zeros(len(head.inputs)),
    )
    if sup:
        out.extra["support_per_rep"] = [int(s) for s in sup]
    return out


def pareto_data(report: SobolReport, which: str = "first") -> list[tuple[str, float, float]]:
    """``(input, index, cumulative share)`` sorted by decreasing index."""
    if which not in ("total", "first"):
        raise ValueError("which must be 'total' or 'first'")
    vals = report.total if which == "total" else report.first
    order = sorted(range(len(vals)), key=lambda i: (-vals[i], report.inputs[i]))
    pos = np.clip(np.asarray(vals, dtype=float)[order], 0.0, None)
    cum = np.cumsum(pos)
    # divide by the last partial sum so the final share is exactly 1
    share = cum / cum[-1] if len(cum) and cum[-1] > 0 else np.zeros(len(order))
    return [(report.inputs[i], float(vals[i]), min(1.0, float(c))) for i, c in zip(order, share)]
