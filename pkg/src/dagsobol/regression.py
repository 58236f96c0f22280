"""Coefficient estimation: dense least squares and goodness-of-fit-constrained LASSO."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import ConstraintUnmet, NonFiniteInput, Underdetermined, ZeroVariance

SUPPORT_RTOL = 1e-12


@dataclass(frozen=True)
class FitConfig:
    """Settings of the sparse solver.

    ``gamma`` bounds the relative residual ``sum (y - yhat)**2 / sum (y - ybar)**2``.
    The regularization path has ``n_lambda`` geometric points from the
    smallest penalty that zeroes every coefficient down to ``lambda_ratio``
    times that value.  The first feasible point is refined by ``bisect_steps``
    bisections toward the largest feasible penalty.
    """

    mode: str = "sparse"
    gamma: float = 1e-3
    svd_cutoff: float | None = None
    n_lambda: int = 100
    lambda_ratio: float = 1e-6
    bisect_steps: int = 25
    max_sweeps: int = 20000
    tol: float = 1e-10

    def __post_init__(self):
        if self.mode not in ("dense", "sparse"):
            raise ValueError(f"mode must be 'dense' or 'sparse', got {self.mode!r}")
        if not (0.0 <= self.gamma <= 1.0):
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma}")
        if self.n_lambda < 2 or not (0.0 < self.lambda_ratio < 1.0):
            raise ValueError("bad regularization path settings")


@dataclass(frozen=True)
class CoefficientVector:
    """Fitted coefficients with the diagnostics of the fit that produced them."""

    theta: np.ndarray
    rel_residual: float
    lam: float | None = None
    constraint_met: bool = True

    @property
    def support(self) -> int:
        return support_size(self.theta)


def support_size(theta: np.ndarray) -> int:
    theta = np.abs(np.asarray(theta, dtype=float))
    if theta.size == 0 or theta.max() == 0.0:
        return 0
    return int(np.count_nonzero(theta > SUPPORT_RTOL * theta.max()))


def relative_residual(y: np.ndarray, yhat: np.ndarray) -> float:
    ss = float(np.sum((y - y.mean()) ** 2))
    if ss == 0.0:
        raise ZeroVariance("response has zero variance")
    return float(np.sum((y - yhat) ** 2)) / ss


def _check_inputs(Psi: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    Psi = np.asarray(Psi, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1)
    if Psi.ndim != 2 or Psi.shape[0] != y.shape[0]:
        raise ValueError(f"design {Psi.shape} does not match response of length {y.shape[0]}")
    if not (np.all(np.isfinite(Psi)) and np.all(np.isfinite(y))):
        raise NonFiniteInput("design matrix or response contains non-finite values")
    return Psi, y


def dense_fit(
    Psi: np.ndarray, y: np.ndarray, cfg: FitConfig | None = None, subproblem: str = ""
) -> CoefficientVector:
    """Least squares through the SVD; minimum-norm among minimizers.

    Requires at least as many rows as basis functions.
    """
    Psi, y = _check_inputs(Psi, y)
    m, P = Psi.shape
    if m < P:
        raise Underdetermined(P, m, subproblem)
    rcond = cfg.svd_cutoff if cfg is not None else None
    theta, *_ = np.linalg.lstsq(Psi, y, rcond=rcond)
    ss = float(np.sum((y - y.mean()) ** 2))
    rr = float(np.sum((y - Psi @ theta) ** 2)) / ss if ss > 0 else 0.0
    return CoefficientVector(theta, rr)


def fit(Psi: np.ndarray, y: np.ndarray, cfg: FitConfig, subproblem: str = "") -> CoefficientVector:
    if cfg.mode == "dense":
        return dense_fit(Psi, y, cfg, subproblem)
    return sparse_fit(Psi, y, cfg)


# sparse ---------------------------------------------------------------------


@njit(cache=True)
def _soft(z, lam):
    if z > lam:
        return z - lam
    if z < -lam:
        return z + lam
    return 0.0


@njit(cache=True)
def _cd_lasso(G, c, lam, beta, max_sweeps, tol):
    """Coordinate descent for ``0.5 b'Gb - c'b + lam |b|_1`` with unit diagonal G.

    Alternates full sweeps with sweeps restricted to the active set.
    Updates ``beta`` in place and returns the number of sweeps.
    """
    P = c.shape[0]
    grad = c - G @ beta
    sweeps = 0
    full = True
    while sweeps < max_sweeps:
        sweeps += 1
        maxd = 0.0
        scale = 0.0
        for j in range(P):
            if not full and beta[j] == 0.0:
                continue
            old = beta[j]
            new = _soft(grad[j] + G[j, j] * old, lam) / G[j, j]
            if new != old:
                d = new - old
                for k in range(P):
                    grad[k] -= d * G[k, j]
                beta[j] = new
                if abs(d) > maxd:
                    maxd = abs(d)
            if abs(new) > scale:
                scale = abs(new)
        if maxd <= tol * max(scale, 1e-300):
            if full:
                break
            full = True
        else:
            full = False
    return sweeps


class _Problem:
    """Centered, column-normalized regression problem shared along a path."""

    def __init__(self, Psi: np.ndarray, y: np.ndarray, cfg: FitConfig):
        self.Psi, self.y, self.cfg = Psi, y, cfg
        m, P = Psi.shape
        self.const = np.all(Psi == Psi[0], axis=0)
        self.cols = np.nonzero(~self.const)[0]
        X = Psi[:, self.cols]
        self.xmean = X.mean(axis=0)
        Xc = X - self.xmean
        self.xscale = np.sqrt(np.mean(Xc * Xc, axis=0))
        self.X = Xc / self.xscale
        self.ymean = y.mean()
        self.yc = y - self.ymean
        self.G = np.ascontiguousarray(self.X.T @ self.X / m)
        self.c = self.X.T @ self.yc / m
        self.lam_max = float(np.max(np.abs(self.c))) if len(self.c) else 0.0
        self.ss = float(self.yc @ self.yc)

    def solve(self, lam: float, beta: np.ndarray) -> np.ndarray:
        beta = beta.copy()
        _cd_lasso(self.G, self.c, lam, beta, self.cfg.max_sweeps, self.cfg.tol)
        return beta

    def rel_residual(self, beta: np.ndarray) -> float:
        r = self.yc - self.X @ beta
        return float(r @ r) / self.ss

    def feasible(self, rr: float) -> bool:
        return rr <= self.cfg.gamma * (1 + 1e-9) + 1e-14

    def theta(self, beta: np.ndarray) -> np.ndarray:
        P = self.Psi.shape[1]
        theta = np.zeros(P)
        coef = beta / self.xscale
        theta[self.cols] = coef
        # intercept goes on the first constant column
        const_idx = np.nonzero(self.const)[0]
        intercept = self.ymean - float(coef @ self.xmean)
        if len(const_idx):
            j = const_idx[0]
            theta[j] = intercept / self.Psi[0, j]
        return theta


def sparse_fit(Psi: np.ndarray, y: np.ndarray, cfg: FitConfig | None = None) -> CoefficientVector:
    """LASSO with the largest penalty whose relative residual is at most ``gamma``.

    The intercept (any constant column of ``Psi``) is not penalized.  Walks a
    geometric penalty path with warm starts, then bisects between the last
    infeasible and first feasible penalties.  If even the smallest penalty on
    the path misses the target, falls back to least squares; if that misses
    too, a ``ConstraintUnmet`` warning is issued and the least-residual
    solution is returned.
    """
    cfg = cfg or FitConfig()
    Psi, y = _check_inputs(Psi, y)
    prob = _Problem(Psi, y, cfg)
    if prob.const.sum() == 0:
        raise ValueError("design matrix needs a constant column for the intercept")
    n = len(prob.cols)
    beta = np.zeros(n)
    if prob.ss == 0.0:
        # constant response: the intercept alone fits exactly
        return _finish(prob, beta, 0.0, prob.lam_max)
    if n == 0 or prob.lam_max == 0.0 or prob.feasible(1.0):
        met = prob.feasible(1.0)
        if not met:
            warnings.warn("only the constant model is available", ConstraintUnmet, stacklevel=2)
        return _finish(prob, beta, 1.0, prob.lam_max, met)

    lams = prob.lam_max * np.geomspace(1.0, cfg.lambda_ratio, cfg.n_lambda)
    prev_lam, prev_beta = lams[0], beta
    for lam in lams[1:]:
        beta = prob.solve(lam, prev_beta)
        rr = prob.rel_residual(beta)
        if prob.feasible(rr):
            return _bisect(prob, prev_lam, lam, prev_beta, beta, rr)
        prev_lam, prev_beta = lam, beta

    # smallest path penalty is still infeasible: try the unpenalized solution
    ols, *_ = np.linalg.lstsq(prob.X, prob.yc, rcond=None)
    rr_ols = prob.rel_residual(ols)
    if prob.feasible(rr_ols):
        return _bisect(prob, prev_lam, 0.0, prev_beta, ols, rr_ols)
    rr_prev = prob.rel_residual(prev_beta)
    best, rr = (ols, rr_ols) if rr_ols < rr_prev else (prev_beta, rr_prev)
    warnings.warn(
        f"relative residual {rr:.3g} exceeds gamma={cfg.gamma:g} even without penalty",
        ConstraintUnmet,
        stacklevel=2,
    )
    return _finish(prob, best, rr, 0.0, met=False)


def _bisect(prob: _Problem, lo_bad: float, hi_ok: float, beta_bad, beta_ok, rr_ok) -> CoefficientVector:
    # lo_bad > hi_ok as penalties; shrink the bracket toward the largest feasible penalty
    bad, ok = lo_bad, hi_ok
    for _ in range(prob.cfg.bisect_steps):
        mid = 0.5 * (bad + ok) if ok == 0.0 else np.sqrt(bad * ok)
        beta = prob.solve(mid, beta_ok)
        rr = prob.rel_residual(beta)
        if prob.feasible(rr):
            ok, beta_ok, rr_ok = mid, beta, rr
        else:
            bad = mid
        if bad - ok <= 1e-6 * bad:
            break
    return _finish(prob, beta_ok, rr_ok, ok)


def _finish(prob: _Problem, beta, rr, lam, met: bool = True) -> CoefficientVector:
    return CoefficientVector(prob.theta(beta), rr, lam, met)
