"""Orthonormal polynomial bases.

Every basis is built from *groups*: sets of variables that are treated
jointly.  A singleton group with a known distribution uses a classical
family (normalized Hermite for Normal, normalized Legendre for Uniform);
anything else is orthonormalized against the empirical measure of the data
by modified Gram-Schmidt.  Multivariate bases are tensor products over
mutually independent groups.

All polynomials act on standardized coordinates ``z = (x - loc) / scale``.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from math import comb
from typing import Mapping, Sequence

import numpy as np
from scipy.linalg import solve_triangular

from .errors import (
    AllMonomialsDegenerate,
    DegenerateDistribution,
    InsufficientData,
    MissingColumn,
    MomentOverflow,
)
from .polyalg import Poly, family_coefficients, family_inverse

DEGENERATE_VARIANCE = 1e-300
DROP_RATIO = 1e-10


# distributions --------------------------------------------------------------


@dataclass(frozen=True)
class Normal:
    mean: float
    stddev: float

    def __post_init__(self):
        if not self.stddev >= 0:
            raise ValueError(f"Normal stddev must be non-negative, got {self.stddev}")

    family = "hermite"

    @property
    def degenerate(self) -> bool:
        return self.stddev == 0

    @property
    def loc(self) -> float:
        return float(self.mean)

    @property
    def scale(self) -> float:
        return float(self.stddev)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.normal(self.mean, self.stddev, n)

    def to_dict(self) -> dict:
        return {"dist": "normal", "params": [self.mean, self.stddev]}


@dataclass(frozen=True)
class Uniform:
    lower: float
    upper: float

    def __post_init__(self):
        if self.upper < self.lower:
            raise ValueError(f"Uniform bounds out of order: {self.lower} > {self.upper}")

    family = "legendre"

    @property
    def degenerate(self) -> bool:
        return self.upper == self.lower

    @property
    def loc(self) -> float:
        return 0.5 * (self.lower + self.upper)

    @property
    def scale(self) -> float:
        return 0.5 * (self.upper - self.lower)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.uniform(self.lower, self.upper, n)

    def to_dict(self) -> dict:
        return {"dist": "uniform", "params": [self.lower, self.upper]}


@dataclass(frozen=True, eq=False)
class Empirical:
    """The empirical measure of an observed sample."""

    sample_values: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.asarray(self.sample_values, dtype=float).reshape(-1)
        object.__setattr__(self, "sample_values", arr)

    family = None

    @property
    def degenerate(self) -> bool:
        return len(self.sample_values) < 2 or np.var(self.sample_values) <= DEGENERATE_VARIANCE

    @property
    def loc(self) -> float:
        return float(np.mean(self.sample_values))

    @property
    def scale(self) -> float:
        return float(np.std(self.sample_values))

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.choice(self.sample_values, size=n, replace=True)

    def to_dict(self) -> dict:
        return {"dist": "empirical", "params": []}


Distribution = Normal | Uniform | Empirical


def distribution_from_dict(d: Mapping) -> Distribution:
    kind = str(d.get("dist", "")).lower()
    params = list(d.get("params", []))
    if kind == "normal" and len(params) == 2:
        return Normal(float(params[0]), float(params[1]))
    if kind == "uniform" and len(params) == 2:
        return Uniform(float(params[0]), float(params[1]))
    raise ValueError(f"unsupported distribution spec {dict(d)!r}")


# multi-indices --------------------------------------------------------------


def graded_lex(n: int, p: int) -> np.ndarray:
    """All multi-indices of ``n`` variables with total degree ``<= p``.

    Ordered by total degree, then lexicographically with larger leading
    exponents first: ``(0,0), (1,0), (0,1), (2,0), (1,1), (0,2), ...``.
    """
    out: list[tuple[int, ...]] = []
    for deg in range(p + 1):
        out.extend(_compositions(n, deg))
    return np.array(out, dtype=np.int64).reshape(-1, n)


def _compositions(n: int, deg: int):
    if n == 0:
        if deg == 0:
            yield ()
        return
    if n == 1:
        yield (deg,)
        return
    for first in range(deg, -1, -1):
        for rest in _compositions(n - 1, deg - first):
            yield (first,) + rest


def min_observations(n_vars: int, p: int) -> int:
    """Number of basis functions of total degree ``<= p`` in ``n_vars`` variables."""
    if n_vars < 1 or p < 0:
        raise ValueError("need n_vars >= 1 and p >= 0")
    out = comb(n_vars + p, n_vars)
    if out > sys.maxsize:
        raise OverflowError(f"C({n_vars}+{p}, {n_vars}) does not fit in a machine integer")
    return out


# univariate -----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class UnivariatePoly:
    """Polynomial in ``z = (x - loc) / scale`` with monomial ``coefficients``."""

    coefficients: np.ndarray
    loc: float = 0.0
    scale: float = 1.0

    @property
    def degree(self) -> int:
        nz = np.nonzero(self.coefficients)[0]
        return int(nz[-1]) if len(nz) else 0

    def __call__(self, x) -> np.ndarray:
        z = (np.asarray(x, dtype=float) - self.loc) / self.scale
        return np.polynomial.polynomial.polyval(z, self.coefficients)


def univariate_basis(dist: Distribution, p: int) -> list[UnivariatePoly]:
    gb = univariate_group("x", dist, p)
    return [UnivariatePoly(gb.coef[:, k].copy(), gb.loc[0], gb.scale[0]) for k in range(gb.size)]


def univariate_group(name: str, dist: Distribution, p: int) -> "GroupBasis":
    if p < 0:
        raise ValueError("degree must be non-negative")
    if dist.degenerate:
        raise DegenerateDistribution(f"distribution of {name!r} has zero variance")
    if dist.family is None:
        return group_basis({name: dist.sample_values}, p)
    C = family_coefficients(dist.family, p)
    return GroupBasis(
        variables=(name,),
        exponents=np.arange(p + 1)[:, None],
        coef=C.T.copy(),
        degrees=np.arange(p + 1),
        loc=np.array([dist.loc]),
        scale=np.array([dist.scale]),
        family=dist.family,
    )


# groups ---------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GroupBasis:
    """Orthonormal functions of one group of variables.

    ``coef[:, k]`` holds the monomial coefficients (rows follow
    ``exponents``) of the k-th function in standardized coordinates.
    Function 0 is the constant 1.
    """

    variables: tuple[str, ...]
    exponents: np.ndarray
    coef: np.ndarray
    degrees: np.ndarray
    loc: np.ndarray
    scale: np.ndarray
    family: str | None = None
    dropped: tuple[tuple[int, ...], ...] = ()

    @property
    def size(self) -> int:
        return self.coef.shape[1]

    @property
    def max_degree(self) -> int:
        return int(self.degrees.max())

    def standardized(self, data: Mapping[str, np.ndarray]) -> np.ndarray:
        cols = []
        for v in self.variables:
            if v not in data:
                raise MissingColumn(v, "basis evaluation")
            cols.append(np.asarray(data[v], dtype=float))
        Z = np.column_stack(cols) if cols else np.zeros((0, 0))
        return (Z - self.loc) / self.scale

    def monomials(self, Z: np.ndarray) -> np.ndarray:
        maxdeg = self.exponents.max(axis=0)
        pw = [np.vander(Z[:, j], int(maxdeg[j]) + 1, increasing=True) for j in range(Z.shape[1])]
        M = np.ones((Z.shape[0], len(self.exponents)))
        for j, P in enumerate(pw):
            M *= P[:, self.exponents[:, j]]
        return M

    def evaluate(self, data: Mapping[str, np.ndarray]) -> np.ndarray:
        return self.monomials(self.standardized(data)) @ self.coef

    def function_poly(self, k: int) -> Poly:
        return Poly(self.variables, self.exponents, self.coef[:, k]).compact()


def group_basis(
    data: Mapping[str, np.ndarray],
    p: int,
    loc: Sequence[float] | None = None,
    scale: Sequence[float] | None = None,
    variables: Sequence[str] | None = None,
) -> GroupBasis:
    """Orthonormalize graded-lex monomials against the empirical measure of ``data``.

    Modified Gram-Schmidt with one re-orthogonalization pass.  A monomial
    whose norm after projection falls below ``1e-10`` of its norm before
    projection is considered linearly dependent and dropped.
    """
    variables = tuple(variables if variables is not None else data.keys())
    cols = []
    for v in variables:
        if v not in data:
            raise MissingColumn(v, "group basis")
        cols.append(np.asarray(data[v], dtype=float))
    X = np.column_stack(cols)
    m = X.shape[0]
    loc_arr = np.asarray(loc if loc is not None else X.mean(axis=0), dtype=float)
    scale_arr = np.asarray(scale if scale is not None else X.std(axis=0), dtype=float)
    if np.any(scale_arr <= np.sqrt(DEGENERATE_VARIANCE)):
        bad = [v for v, s in zip(variables, scale_arr) if s <= np.sqrt(DEGENERATE_VARIANCE)]
        raise DegenerateDistribution(f"zero-variance variables in group: {bad}")

    exps = graded_lex(len(variables), p)
    if m <= len(exps):
        raise InsufficientData(
            f"group {variables} at degree {p} has {len(exps)} monomials but only {m} rows"
        )
    shell = GroupBasis(variables, exps, np.eye(len(exps)), np.zeros(len(exps), int), loc_arr, scale_arr)
    M = shell.monomials((X - loc_arr) / scale_arr)
    if not np.all(np.isfinite(M)):
        raise MomentOverflow(f"non-finite monomial values for group {variables} at degree {p}")

    Q: list[np.ndarray] = []
    C: list[np.ndarray] = []
    kept, dropped = [], []
    for j in range(len(exps)):
        v = M[:, j].copy()
        c = np.zeros(len(exps))
        c[j] = 1.0
        pre = np.sqrt(np.mean(v * v))
        for _ in range(2):
            for q, cq in zip(Q, C):
                r = np.mean(v * q)
                v -= r * q
                c -= r * cq
        post = np.sqrt(np.mean(v * v))
        if not np.isfinite(post):
            raise MomentOverflow(f"non-finite norm for monomial {tuple(exps[j])}")
        if post < DROP_RATIO * pre or post == 0.0:
            dropped.append(tuple(int(e) for e in exps[j]))
            continue
        Q.append(v / post)
        C.append(c / post)
        kept.append(j)
    if len(kept) <= 1 and p > 0:
        raise AllMonomialsDegenerate(f"no non-constant monomial survives for group {variables}")
    coef = np.column_stack(C)
    degrees = exps[kept].sum(axis=1)
    return GroupBasis(variables, exps, coef, degrees, loc_arr, scale_arr, None, tuple(dropped))


# tensor products ------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class OrthonormalBasis:
    """Tensor-product basis over independent groups.

    Row ``i`` of ``index`` selects one function per group; basis function
    ``i`` is the product of those functions.
    """

    groups: tuple[GroupBasis, ...]
    index: np.ndarray

    @property
    def size(self) -> int:
        return self.index.shape[0]

    @property
    def variables(self) -> tuple[str, ...]:
        return tuple(v for g in self.groups for v in g.variables)

    @property
    def degrees(self) -> np.ndarray:
        d = np.zeros(self.size, dtype=np.int64)
        for j, g in enumerate(self.groups):
            d += g.degrees[self.index[:, j]]
        return d

    @property
    def multi_indices(self) -> np.ndarray:
        """Per-variable degrees; defined when every group is a single variable."""
        if any(len(g.variables) != 1 for g in self.groups):
            raise ValueError("multi-indices need singleton groups")
        return np.column_stack([g.degrees[self.index[:, j]] for j, g in enumerate(self.groups)])

    def involved(self) -> np.ndarray:
        """Boolean matrix (functions x variables): does function i depend on variable j."""
        blocks = []
        for j, g in enumerate(self.groups):
            nonconst = (self.index[:, j] != 0)[:, None]
            blocks.append(np.repeat(nonconst, len(g.variables), axis=1))
        return np.hstack(blocks) if blocks else np.zeros((self.size, 0), bool)

    def evaluate(self, data: Mapping[str, np.ndarray]) -> np.ndarray:
        out = None
        for j, g in enumerate(self.groups):
            vals = g.evaluate(data)[:, self.index[:, j]]
            out = vals if out is None else out * vals
        if out is None:
            m = len(next(iter(data.values()))) if data else 1
            return np.ones((m, self.size))
        return out

    def to_poly(self, theta: np.ndarray) -> Poly:
        """Expand ``sum_i theta_i psi_i`` into monomials of the standardized variables."""
        theta = np.asarray(theta, dtype=float)
        order = self.variables
        total = Poly(order, np.zeros((0, len(order))), [])
        cache: dict[tuple[int, int], Poly] = {}
        terms_e, terms_c = [], []
        for i in np.nonzero(theta)[0]:
            acc = Poly.constant(theta[i])
            for j, g in enumerate(self.groups):
                k = int(self.index[i, j])
                if k == 0:
                    continue
                key = (j, k)
                if key not in cache:
                    cache[key] = g.function_poly(k)
                acc = acc * cache[key]
            acc = acc.reorder(order)
            terms_e.append(acc.exps)
            terms_c.append(acc.coefs)
        if not terms_e:
            return total
        return Poly(order, np.vstack(terms_e), np.concatenate(terms_c)).compact()


def tensor_over_groups(groups: Sequence[GroupBasis], p: int | None) -> OrthonormalBasis:
    """All products of group functions with total degree ``<= p`` (no cap if ``None``)."""
    groups = tuple(groups)
    rows = []

    def walk(j: int, budget: int | None, deg: int, combo: tuple[int, ...]) -> None:
        if j == len(groups):
            rows.append((deg, tuple(-k for k in combo), combo))
            return
        g = groups[j]
        for k in range(g.size):
            d = int(g.degrees[k])
            if budget is None or d <= budget:
                walk(j + 1, None if budget is None else budget - d, deg + d, combo + (k,))

    walk(0, p, 0, ())
    rows.sort()
    index = np.array([r[2] for r in rows], dtype=np.int64).reshape(len(rows), len(groups))
    return OrthonormalBasis(groups, index)


def tensor_basis(dists: Mapping[str, Distribution] | Sequence[Distribution], p: int) -> OrthonormalBasis:
    """Tensor-product basis of independent variables, total degree ``<= p``.

    Functions are in graded lexicographic order of their multi-index, so the
    basis has ``C(n + p, n)`` members.
    """
    if not isinstance(dists, Mapping):
        dists = {f"x{j + 1}": d for j, d in enumerate(dists)}
    groups = tuple(univariate_group(v, d, p) for v, d in dists.items())
    alphas = graded_lex(len(groups), p)
    return OrthonormalBasis(groups, alphas)


def evaluate_basis(basis: OrthonormalBasis, rows: Mapping[str, np.ndarray]) -> np.ndarray:
    return basis.evaluate(rows)


def family_for(name: str, dist: Distribution, degree: int) -> GroupBasis:
    """Univariate family of ``dist`` up to ``degree`` (used for final expansions)."""
    return univariate_group(name, dist, degree)


def monomial_inverse(group: GroupBasis) -> np.ndarray:
    """``T[n, k]`` expanding ``z**n`` over a univariate group's functions."""
    if len(group.variables) != 1:
        raise ValueError("monomial inverse needs a univariate group")
    p = group.max_degree
    if group.family is not None:
        return family_inverse(group.family, p)
    if group.size != p + 1:
        raise ValueError("monomial inverse needs a complete univariate family")
    # psi = z_pows @ C with C upper triangular  =>  z_pows = psi @ C^-1
    inv = solve_triangular(group.coef, np.eye(p + 1), lower=False)
    return inv.T
