"""Sparse multivariate polynomials and exact tables for the classical families.

Polynomials are kept in the monomial basis of named (standardized) variables.
They exist so that composed network surrogates can be expanded exactly
instead of re-fitted.
"""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache
from math import factorial, sqrt
from typing import Mapping, Sequence

import numpy as np

# families -------------------------------------------------------------------


@lru_cache(maxsize=None)
def _hermite_rational(p: int) -> tuple[tuple[Fraction, ...], ...]:
    """Monomial coefficients of probabilists' Hermite He_0..He_p."""
    rows = [[Fraction(1)], [Fraction(0), Fraction(1)]]
    for k in range(1, p):
        prev, cur = rows[k - 1], rows[k]
        nxt = [Fraction(0)] + cur
        for i, c in enumerate(prev):
            nxt[i] -= k * c
        rows.append(nxt)
    return tuple(tuple(r) for r in rows[: p + 1])


@lru_cache(maxsize=None)
def _legendre_rational(p: int) -> tuple[tuple[Fraction, ...], ...]:
    rows = [[Fraction(1)], [Fraction(0), Fraction(1)]]
    for k in range(1, p):
        prev, cur = rows[k - 1], rows[k]
        nxt = [Fraction(0)] + [Fraction(2 * k + 1, k + 1) * c for c in cur]
        for i, c in enumerate(prev):
            nxt[i] -= Fraction(k, k + 1) * c
        rows.append(nxt)
    return tuple(tuple(r) for r in rows[: p + 1])


def _rational_table(family: str, p: int):
    if family == "hermite":
        return _hermite_rational(max(p, 1)), [sqrt(factorial(k)) for k in range(p + 1)]
    if family == "legendre":
        return _legendre_rational(max(p, 1)), [1.0 / sqrt(2 * k + 1) for k in range(p + 1)]
    raise ValueError(f"unknown family {family!r}")


def _invert_lower(rows: Sequence[Sequence[Fraction]], p: int) -> list[list[Fraction]]:
    # rows[k][j]: coefficient of z^j in poly k; returns inv[n][k] with z^n = sum_k inv[n][k] poly_k
    inv: list[list[Fraction]] = []
    for n in range(p + 1):
        lead = rows[n][n]
        vec = [Fraction(0)] * (p + 1)
        vec[n] = 1 / lead
        # z^n = (poly_n - sum_{j<n} rows[n][j] z^j) / lead
        for j in range(n):
            c = rows[n][j] if j < len(rows[n]) else Fraction(0)
            if c:
                for k in range(j + 1):
                    vec[k] -= c / lead * inv[j][k]
        inv.append(vec)
    return inv


@lru_cache(maxsize=None)
def family_coefficients(family: str, p: int) -> np.ndarray:
    """``C[k, j]``: coefficient of ``z**j`` in the k-th orthonormal polynomial."""
    rows, norm = _rational_table(family, p)
    out = np.zeros((p + 1, p + 1))
    for k in range(p + 1):
        for j, c in enumerate(rows[k]):
            out[k, j] = float(c) / norm[k]
    out.setflags(write=False)
    return out


@lru_cache(maxsize=None)
def family_inverse(family: str, p: int) -> np.ndarray:
    """``T[n, k]`` with ``z**n = sum_k T[n, k] * psi_k(z)`` (exact up to rounding)."""
    rows, norm = _rational_table(family, p)
    inv = _invert_lower([list(r) + [Fraction(0)] * (p + 1 - len(r)) for r in rows[: p + 1]], p)
    out = np.zeros((p + 1, p + 1))
    for n in range(p + 1):
        for k in range(n + 1):
            out[n, k] = float(inv[n][k]) * norm[k]
    out.setflags(write=False)
    return out


# sparse polynomials ---------------------------------------------------------


class Poly:
    """Sparse polynomial ``sum_t coefs[t] * prod_j vars[j] ** exps[t, j]``."""

    __slots__ = ("vars", "exps", "coefs")

    def __init__(self, variables: Sequence[str], exps, coefs):
        self.vars = tuple(variables)
        self.coefs = np.asarray(coefs, dtype=float).reshape(-1)
        if self.vars:
            self.exps = np.asarray(exps, dtype=np.int64).reshape(-1, len(self.vars))
        else:
            self.exps = np.zeros((len(self.coefs), 0), dtype=np.int64)
        if self.exps.shape[0] != self.coefs.shape[0]:
            raise ValueError("exponent rows and coefficients differ in length")

    @classmethod
    def constant(cls, value: float, variables: Sequence[str] = ()) -> "Poly":
        return cls(variables, np.zeros((1, len(variables)), dtype=np.int64), [value])

    @classmethod
    def variable(cls, name: str) -> "Poly":
        return cls((name,), [[1]], [1.0])

    @classmethod
    def univariate(cls, name: str, coefs: Sequence[float]) -> "Poly":
        coefs = np.asarray(coefs, dtype=float)
        return cls((name,), np.arange(len(coefs))[:, None], coefs).compact()

    def __repr__(self) -> str:
        return f"Poly(vars={self.vars}, terms={len(self.coefs)}, degree={self.degree})"

    @property
    def n_terms(self) -> int:
        return len(self.coefs)

    @property
    def degree(self) -> int:
        return int(self.exps.sum(axis=1).max()) if self.n_terms else 0

    def constant_term(self) -> float:
        mask = ~self.exps.any(axis=1)
        return float(self.coefs[mask].sum())

    def used_vars(self) -> tuple[str, ...]:
        used = self.exps[self.coefs != 0].any(axis=0)
        return tuple(v for v, u in zip(self.vars, used) if u)

    def copy(self) -> "Poly":
        return Poly(self.vars, self.exps.copy(), self.coefs.copy())

    def reorder(self, variables: Sequence[str]) -> "Poly":
        """Re-express over ``variables`` (a superset of the used variables)."""
        variables = tuple(variables)
        pos = {v: i for i, v in enumerate(variables)}
        exps = np.zeros((self.n_terms, len(variables)), dtype=np.int64)
        for j, v in enumerate(self.vars):
            col = self.exps[:, j]
            if v not in pos:
                if col[self.coefs != 0].any():
                    raise ValueError(f"variable {v!r} is used but missing from target order")
                continue
            exps[:, pos[v]] = col
        return Poly(variables, exps, self.coefs)

    def compact(self, tol: float = 0.0) -> "Poly":
        """Merge duplicate monomials and drop zero (or ``<= tol``) coefficients."""
        if self.n_terms == 0:
            return self
        exps, coefs = _merge(self.exps, self.coefs)
        keep = np.abs(coefs) > tol
        return Poly(self.vars, exps[keep], coefs[keep])

    def __add__(self, other: "Poly") -> "Poly":
        order = _union(self.vars, other.vars)
        a, b = self.reorder(order), other.reorder(order)
        return Poly(order, np.vstack([a.exps, b.exps]), np.concatenate([a.coefs, b.coefs])).compact()

    def __neg__(self) -> "Poly":
        return Poly(self.vars, self.exps, -self.coefs)

    def __sub__(self, other: "Poly") -> "Poly":
        return self + (-other)

    def scale(self, c: float) -> "Poly":
        return Poly(self.vars, self.exps, self.coefs * c)

    def shift(self, c: float) -> "Poly":
        return self + Poly.constant(c)

    def __mul__(self, other: "Poly") -> "Poly":
        if isinstance(other, (int, float)):
            return self.scale(float(other))
        order = _union(self.vars, other.vars)
        a, b = self.reorder(order), other.reorder(order)
        if a.n_terms == 0 or b.n_terms == 0:
            return Poly(order, np.zeros((0, len(order))), [])
        exps = (a.exps[:, None, :] + b.exps[None, :, :]).reshape(-1, len(order))
        coefs = np.multiply.outer(a.coefs, b.coefs).reshape(-1)
        return Poly(order, exps, coefs).compact()

    __rmul__ = __mul__

    def powers(self, n: int) -> list["Poly"]:
        """``[self**0, ..., self**n]``."""
        out = [Poly.constant(1.0, self.vars)]
        for _ in range(n):
            out.append(out[-1] * self)
        return out

    def evaluate(self, values: Mapping[str, np.ndarray]) -> np.ndarray:
        cols = [np.asarray(values[v], dtype=float) for v in self.vars]
        m = len(cols[0]) if cols else 1
        out = np.zeros(m)
        if self.n_terms == 0:
            return out
        maxdeg = self.exps.max(axis=0) if self.vars else []
        pw = [np.vander(c, int(d) + 1, increasing=True) for c, d in zip(cols, maxdeg)]
        for e, c in zip(self.exps, self.coefs):
            term = np.full(m, c)
            for j, k in enumerate(e):
                if k:
                    term = term * pw[j][:, k]
            out += term
        return out

    def substitute(self, mapping: Mapping[str, "Poly"]) -> "Poly":
        """Replace variables simultaneously by polynomials in other variables.

        Variables absent from ``mapping`` are kept.  A replacement may use
        names that also occur in ``self``; the substitution is simultaneous,
        so replacements are never substituted into again.
        """
        tag = "\x00new:"
        result = self
        targets = [v for v in self.vars if v in mapping]
        renamed = {}
        for v in targets:
            rep = mapping[v]
            renamed[v] = Poly([tag + u for u in rep.vars], rep.exps, rep.coefs)
        for v in targets:
            result = _substitute_one(result, v, renamed[v])
        names = [u[len(tag):] if u.startswith(tag) else u for u in result.vars]
        # after renaming, a kept variable and a replacement variable may coincide
        uniq = list(dict.fromkeys(names))
        if len(uniq) == len(names):
            return Poly(names, result.exps, result.coefs)
        exps = np.zeros((result.n_terms, len(uniq)), dtype=np.int64)
        pos = {v: i for i, v in enumerate(uniq)}
        for j, v in enumerate(names):
            exps[:, pos[v]] += result.exps[:, j]
        return Poly(uniq, exps, result.coefs).compact()


def _union(a: Sequence[str], b: Sequence[str]) -> tuple[str, ...]:
    return tuple(dict.fromkeys(list(a) + list(b)))


def _merge(exps: np.ndarray, coefs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if exps.shape[1] == 0:
        return np.zeros((1, 0), dtype=np.int64), np.array([coefs.sum()])
    base = exps.max(axis=0).astype(np.int64) + 1
    # mixed-radix key when it fits in int64, else row-unique
    if np.sum(np.log2(base.astype(float))) < 62:
        mult = np.cumprod(np.concatenate([[1], base[:-1]])).astype(np.int64)
        keys = exps @ mult
        uniq, inv = np.unique(keys, return_inverse=True)
        out = np.zeros((len(uniq), exps.shape[1]), dtype=np.int64)
        out[inv] = exps
    else:
        out, inv = np.unique(exps, axis=0, return_inverse=True)
    summed = np.bincount(inv.reshape(-1), weights=coefs, minlength=len(out))
    return out, summed


def _substitute_one(poly: Poly, var: str, rep: Poly) -> Poly:
    j = poly.vars.index(var)
    rest_vars = poly.vars[:j] + poly.vars[j + 1:]
    col = poly.exps[:, j]
    rest = np.delete(poly.exps, j, axis=1)
    pows = rep.powers(int(col.max()) if len(col) else 0)
    acc = None
    for k in np.unique(col):
        mask = col == k
        part = Poly(rest_vars, rest[mask], poly.coefs[mask])
        term = part * pows[int(k)] if k else part
        acc = term if acc is None else acc + term
    if acc is None:
        return Poly(rest_vars, np.zeros((0, len(rest_vars))), [])
    return acc


def to_orthonormal(poly: Poly, inverses: Mapping[str, np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    """Convert monomials to products of univariate orthonormal polynomials.

    ``inverses[v][n, k]`` expands ``z_v**n`` over the orthonormal family of
    ``v``.  Returns ``(multi_indices, coefficients)`` over ``poly.vars``.
    """
    exps, coefs = poly.exps.copy(), poly.coefs.copy()
    for j, v in enumerate(poly.vars):
        if not len(coefs):
            break
        T = inverses[v]
        col = exps[:, j]
        if col.size and col.max() >= T.shape[0]:
            raise ValueError(f"degree {col.max()} of {v!r} exceeds the available family degree")
        new_e, new_c = [], []
        for n in np.unique(col):
            mask = col == n
            ks = np.nonzero(T[n, : n + 1])[0]
            for k in ks:
                e = exps[mask].copy()
                e[:, j] = k
                new_e.append(e)
                new_c.append(coefs[mask] * T[n, k])
        exps, coefs = _merge(np.vstack(new_e), np.concatenate(new_c))
    return exps, coefs
