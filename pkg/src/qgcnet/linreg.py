"""Least-squares fits for mean-based Granger networks.

``solve_ols`` gives classical OLS with t-statistics; ``solve_lasso`` minimizes
``(1/n)||y - X a||^2 + lam * ||a||_1`` by cyclic coordinate descent on the
Gram matrix.  Regressors are not standardized before penalization.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numba
import numpy as np
from scipy import stats

from .core import (
    DimensionMismatch,
    MeanFit,
    QGCError,
    TooFewSamples,
    check_lambda,
)

MAX_CYCLES = 100_000
CD_TOL = 1e-8


class RankDeficient(QGCError, np.linalg.LinAlgError):
    pass


class MissingStandardErrors(QGCError, ValueError):
    pass


class NoConvergence(QGCError, RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class LSProblem:
    design: np.ndarray
    response: np.ndarray
    lam: float = 0.0

    def __post_init__(self):
        X = np.asarray(self.design, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        y = np.asarray(self.response, dtype=float).ravel()
        if X.shape[0] != y.shape[0]:
            raise DimensionMismatch(f"design has {X.shape[0]} rows, response has {y.shape[0]}")
        if X.shape[0] < 1 or X.shape[1] < 1:
            raise DimensionMismatch(f"empty problem of shape {X.shape}")
        object.__setattr__(self, "design", X)
        object.__setattr__(self, "response", y)
        object.__setattr__(self, "lam", check_lambda(self.lam))

    @property
    def n(self) -> int:
        return self.design.shape[0]

    @property
    def k(self) -> int:
        return self.design.shape[1]


def lasso_objective(problem: LSProblem, alpha) -> float:
    resid = problem.response - problem.design @ np.asarray(alpha, dtype=float)
    return float(resid @ resid / problem.n + problem.lam * np.abs(alpha).sum())


def solve_ols(problem: LSProblem) -> MeanFit:
    X, y = problem.design, problem.response
    n, k = X.shape
    if n <= k:
        raise TooFewSamples(f"OLS needs n > k, got n={n}, k={k}")
    if np.linalg.matrix_rank(X) < k:
        raise RankDeficient("design is not of full column rank")
    Q, R = np.linalg.qr(X)
    coef = np.linalg.solve(R, Q.T @ y)
    resid = y - X @ coef
    df = n - k
    sigma2 = float(resid @ resid) / df
    Rinv = np.linalg.inv(R)
    se = np.sqrt(sigma2 * np.sum(Rinv**2, axis=1))
    return MeanFit(coef, 0.0, se, df)


def t_test_nonzero(fit: MeanFit, index: int, alpha: float = 0.05) -> bool:
    """Two-sided Student-t test of H0: coefficient[index] == 0."""
    if fit.standard_errors is None or fit.df_resid is None:
        raise MissingStandardErrors("fit carries no standard errors")
    if fit.df_resid < 1:
        raise TooFewSamples("no residual degrees of freedom")
    b = float(fit.coefficients[index])
    se = float(fit.standard_errors[index])
    if b == 0.0:
        return False
    if se == 0.0:
        return True
    crit = stats.t.ppf(1.0 - alpha / 2.0, fit.df_resid)
    return abs(b / se) > crit


def lasso_lambda_max(design, response, intercept: bool = False) -> float:
    X = np.asarray(design, dtype=float)
    y = np.asarray(response, dtype=float)
    if intercept:
        X, y = X - X.mean(axis=0), y - y.mean()
    return float(2.0 * np.max(np.abs(X.T @ y)) / X.shape[0])


@numba.njit(cache=True)
def _cd(G, q, lam, beta, tol, max_cycles):
    k = beta.shape[0]
    Gb = G @ beta
    for cycle in range(max_cycles):
        biggest = 0.0
        for j in range(k):
            gjj = G[j, j]
            old = beta[j]
            if gjj <= 0.0:
                new = 0.0
            else:
                z = q[j] - Gb[j] + gjj * old
                thr = 0.5 * lam
                if z > thr:
                    new = (z - thr) / gjj
                elif z < -thr:
                    new = (z + thr) / gjj
                else:
                    new = 0.0
            if new != old:
                delta = new - old
                for m in range(k):
                    Gb[m] += G[m, j] * delta
                beta[j] = new
                if abs(delta) > biggest:
                    biggest = abs(delta)
        if biggest < tol:
            return cycle + 1
    return -1


def _quad_objective(G, q, lam, beta) -> float:
    return float(beta @ G @ beta - 2.0 * q @ beta + lam * np.abs(beta).sum())


def _active_set_step(G, q, lam, beta):
    """Active-set descent on the current sign pattern.

    On the orthant fixed by the signs of ``beta`` the objective is a smooth
    quadratic; move towards its minimizer, stopping where a coordinate first
    hits zero and dropping it, until the minimizer keeps every sign.
    Coordinate descent still has to confirm convergence afterwards.
    """
    beta = beta.copy()
    for _ in range(beta.size):
        act = np.flatnonzero(beta)
        if act.size == 0:
            return beta
        s = np.sign(beta[act])
        cur = beta[act]
        Gaa = G[np.ix_(act, act)]
        w, V = np.linalg.eigh(Gaa)
        if w[0] <= 1e-10 * max(w[-1], 1e-300):
            # flat direction (more active columns than the rank): the objective is
            # linear along it, so slide downhill until a coordinate reaches zero
            d = V[:, 0]
            if -2.0 * q[act] @ d + lam * s @ d > 0:
                d = -d
            hits = -cur / np.where(d == 0, np.nan, d)
            hits[~(hits > 0)] = np.inf
            k = int(np.argmin(hits))
            if not np.isfinite(hits[k]):
                return beta
            beta[act] = cur + hits[k] * d
            beta[act[k]] = 0.0
            continue
        b = (V / w) @ (V.T @ (q[act] - 0.5 * lam * s))
        if not np.all(np.isfinite(b)):
            return beta
        flip = np.sign(b) != s
        if not flip.any():
            beta[act] = b
            return beta
        ratio = cur[flip] / (cur[flip] - b[flip])
        k = int(np.argmin(ratio))
        t = float(ratio[k])
        beta[act] = cur + t * (b - cur)
        beta[act[np.flatnonzero(flip)[k]]] = 0.0
    return beta


CHUNK = 500


def _cd_fit(G, q, lam, start):
    beta = np.array(start, dtype=float, copy=True)
    lam = float(lam)
    used = 0
    while used < MAX_CYCLES:
        chunk = min(CHUNK, MAX_CYCLES - used)
        cycles = _cd(G, q, lam, beta, CD_TOL, chunk)
        if cycles >= 0:
            return beta
        used += chunk
        # slow zig-zag on an ill-conditioned support: jump to its exact solution
        cand = _active_set_step(G, q, lam, beta)
        if _quad_objective(G, q, lam, cand) <= _quad_objective(G, q, lam, beta):
            beta = cand
    raise NoConvergence(f"coordinate descent did not converge in {MAX_CYCLES} cycles")


def solve_lasso(problem: LSProblem, warm_start: Optional[np.ndarray] = None) -> MeanFit:
    X, y = problem.design, problem.response
    n, k = X.shape
    G = X.T @ X / n
    q = X.T @ y / n
    start = np.zeros(k) if warm_start is None else warm_start
    beta = _cd_fit(G, q, problem.lam, start)
    return MeanFit(beta, problem.lam)


def solve_lasso_path(design, response, lambdas: Sequence[float],
                     intercept: bool = False) -> list[MeanFit]:
    """Lasso fits along a grid, each warm-started from the previous solution.

    With ``intercept=True`` the unpenalized intercept is profiled out by
    centering; it is stored on the fit as ``intercept``.
    """
    X = np.asarray(design, dtype=float)
    y = np.asarray(response, dtype=float)
    n, k = X.shape
    if intercept:
        xbar, ybar = X.mean(axis=0), y.mean()
        X, y = X - xbar, y - ybar
    G = X.T @ X / n
    q = X.T @ y / n
    beta = np.zeros(k)
    fits = []
    for lam in lambdas:
        lam = check_lambda(lam)
        beta = _cd_fit(G, q, lam, beta)
        b0 = float(ybar - xbar @ beta) if intercept else 0.0
        fits.append(MeanFit(beta.copy(), lam, intercept=b0))
    return fits
