"""Quantile regression: check loss, unpenalized and Lasso-penalized fits.

The solver works directly on the vertices of the linear program.  The l1
penalty is folded in as ``k`` pseudo-observations (design row ``e_l``,
response 0, symmetric weight ``lam``), so the penalized problem is a weighted
asymmetric-L1 fit over ``n + k`` rows.  A vertex is a set of ``k`` rows held at
zero residual; each iteration drops one of them along the edge with the most
negative directional derivative and runs an exact line search over the
residual breakpoints, in the manner of Barrodale and Roberts.  Every step
strictly decreases the objective, so the method terminates without an
anti-cycling rule; ties are always broken toward the smallest row index.

Pseudo rows that remain in the final vertex pin their coefficient to an exact
zero, which is what the network code relies on to decide edges.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import (
    DimensionMismatch,
    QGCError,
    QuantileFit,
    check_lambda,
    check_tau,
)

ZERO_TRUNCATION = 1e-10
_REFACTOR_EVERY = 25


class DegenerateDesign(QGCError, ValueError):
    pass


class SolverFailure(QGCError, RuntimeError):
    pass


def check_loss(u, tau: float):
    """rho_tau(u) = u * (tau - 1{u <= 0}); works elementwise on arrays."""
    tau = check_tau(tau)
    u = np.asarray(u, dtype=float)
    out = u * (tau - (u <= 0))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True, eq=False)
class QRProblem:
    design: np.ndarray
    response: np.ndarray
    tau: float
    lam: float = 0.0

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.design, dtype=float))
        y = np.asarray(self.response, dtype=float).ravel()
        if np.asarray(self.design).ndim == 1:
            X = X.T
        if X.shape[0] != y.shape[0]:
            raise DimensionMismatch(f"design has {X.shape[0]} rows, response has {y.shape[0]}")
        if X.shape[0] < 1 or X.shape[1] < 1:
            raise DimensionMismatch(f"empty problem of shape {X.shape}")
        object.__setattr__(self, "design", X)
        object.__setattr__(self, "response", y)
        object.__setattr__(self, "tau", check_tau(self.tau))
        object.__setattr__(self, "lam", check_lambda(self.lam))

    @property
    def n(self) -> int:
        return self.design.shape[0]

    @property
    def k(self) -> int:
        return self.design.shape[1]


def qr_objective(problem: QRProblem, beta, intercept: float = 0.0) -> float:
    beta = np.asarray(beta, dtype=float).ravel()
    if beta.shape[0] != problem.k:
        raise DimensionMismatch(f"beta has length {beta.shape[0]}, expected {problem.k}")
    resid = problem.response - problem.design @ beta - intercept
    loss = np.mean(check_loss(resid, problem.tau))
    return float(loss + problem.lam * np.abs(beta).sum())


def lambda_max(design, response, tau: float, intercept: bool = False) -> float:
    """Smallest lambda at which the all-zero slope vector is optimal."""
    X = np.asarray(design, dtype=float)
    y = np.asarray(response, dtype=float)
    if intercept:
        # residuals about the unpenalized intercept-only fit
        y = y - np.sort(y)[min(y.size - 1, int(np.floor(tau * y.size)))]
    psi = np.where(y > 0, tau, np.where(y < 0, tau - 1.0, 0.0))
    if intercept:
        # the intercept's optimality condition fixes the subgradient on the
        # zero-residual rows: all weights must sum to zero
        zero = y == 0
        psi[zero] = -psi[~zero].sum() / zero.sum()
    return float(np.max(np.abs(X.T @ psi)) / X.shape[0])


class _VertexSolver:
    """Weighted asymmetric-L1 minimization over rows of ``Z``.

    Minimizes ``sum_i wpos_i * max(r_i, 0) + wneg_i * max(-r_i, 0)`` with
    ``r = v - Z @ beta``.
    """

    def __init__(self, Z, v, wpos, wneg, max_iter=None):
        self.Z = Z
        self.v = v
        self.wpos = wpos
        self.wneg = wneg
        self.N, self.k = Z.shape
        self.max_iter = max_iter or 50 * (self.N + self.k) + 1000
        scale = max(1.0, float(np.max(np.abs(v))) if v.size else 1.0)
        self.rtol = 1e-11 * scale
        self.ctol = 1e-11
        self.iterations = 0

    def _factor(self, active):
        B = self.Z[active]
        try:
            D = np.linalg.inv(B)
        except np.linalg.LinAlgError as exc:
            raise SolverFailure("singular vertex basis") from exc
        beta = D @ self.v[active]
        C = self.Z @ D
        r = self.v - self.Z @ beta
        r[active] = 0.0
        return D, C, beta, r

    def _slopes(self, active, C, r):
        """Right directional derivatives for moving each active row up (+) or down (-)."""
        wpos, wneg = self.wpos, self.wneg
        free = np.ones(self.N, dtype=bool)
        free[active] = False
        pos = free & (r > self.rtol)
        neg = free & (r < -self.rtol)
        zero = free & ~pos & ~neg
        lin = wpos[pos] @ C[pos] - wneg[neg] @ C[neg]
        up = wpos[active] + lin
        down = wneg[active] - lin
        if zero.any():
            Cz = C[zero]
            wp = wpos[zero][:, None]
            wn = wneg[zero][:, None]
            up = up + (wp * np.maximum(Cz, 0) + wn * np.maximum(-Cz, 0)).sum(axis=0)
            down = down + (wp * np.maximum(-Cz, 0) + wn * np.maximum(Cz, 0)).sum(axis=0)
        return up, down, zero

    def _pick(self, up, down, eps):
        # steepest edge, smallest position on ties, "up" before "down"
        both = np.concatenate([up, down])
        j = int(np.argmin(both))
        if both[j] >= -eps:
            return None
        return j % self.k, (1.0 if j < self.k else -1.0), float(both[j])

    def _line_search(self, active, C, r, a, sigma, slope):
        g = sigma * C[:, a]
        free = np.ones(self.N, dtype=bool)
        free[active] = False
        moving = free & (np.abs(g) > self.ctol) & (
            ((r > self.rtol) & (g < 0)) | ((r < -self.rtol) & (g > 0))
        )
        idx = np.flatnonzero(moving)
        if idx.size == 0:
            raise SolverFailure("descent edge without a breakpoint (unbounded problem)")
        t = -r[idx] / g[idx]
        order = np.argsort(t, kind="stable")
        idx, t = idx[order], t[order]
        jumps = (self.wpos[idx] + self.wneg[idx]) * np.abs(g[idx])
        cum = slope + np.cumsum(jumps)
        stop = int(np.searchsorted(cum >= -1e-15 * (1.0 + abs(slope)), True))
        stop = min(stop, idx.size - 1)
        return int(idx[stop]), float(t[stop]), g

    def _degenerate_exchange(self, active, D, C, r, zero, eps):
        """Zero-length basis exchange with an extra zero-residual row, if it exposes descent."""
        for i in np.flatnonzero(zero):
            for pos in range(self.k):
                if abs(C[i, pos]) <= 1e-8:
                    continue
                trial = active.copy()
                trial[pos] = i
                try:
                    Dt, Ct, bt, rt = self._factor(trial)
                except SolverFailure:
                    continue
                up, down, _ = self._slopes(trial, Ct, rt)
                if self._pick(up, down, eps) is not None:
                    return trial
        return None

    def solve(self, active):
        active = np.array(active, dtype=np.intp)
        D, C, beta, r = self._factor(active)
        eps = 1e-12 * max(1.0, float(np.sum(self.wpos + self.wneg)))
        since_refactor = 0
        tried_exchange = 0
        while True:
            if self.iterations >= self.max_iter:
                raise SolverFailure(f"no convergence after {self.iterations} iterations")
            up, down, zero = self._slopes(active, C, r)
            choice = self._pick(up, down, eps)
            if choice is None:
                if zero.any() and tried_exchange < 2 * self.k:
                    tried_exchange += 1
                    trial = self._degenerate_exchange(active, D, C, r, zero, eps)
                    if trial is not None:
                        active = trial
                        D, C, beta, r = self._factor(active)
                        since_refactor = 0
                        continue
                break
            a, sigma, slope = choice
            i_new, step, g = self._line_search(active, C, r, a, sigma, slope)
            self.iterations += 1
            # pivot: row i_new replaces active position a
            piv = C[i_new, a]
            beta = beta - step * sigma * D[:, a]
            r = r + step * g
            col = D[:, a] / piv
            D = D - np.outer(col, C[i_new])
            D[:, a] = col
            ccol = C[:, a] / piv
            C = C - np.outer(ccol, C[i_new])
            C[:, a] = ccol
            active[a] = i_new
            r[active] = 0.0
            since_refactor += 1
            if since_refactor >= _REFACTOR_EVERY:
                D, C, beta, r = self._factor(active)
                since_refactor = 0
        D, C, beta, r = self._factor(active)
        return active, beta


def _objective_value(X, y, tau, lam, beta, intercept):
    resid = y - X @ beta - intercept
    return float(np.mean(check_loss(resid, tau)) + lam * np.abs(beta).sum())


def _augment(X, y, tau, lam, intercept):
    n, k = X.shape
    if intercept:
        Xd = np.column_stack([np.ones(n), X])
        pseudo = np.hstack([np.zeros((k, 1)), np.eye(k)])
    else:
        Xd = X
        pseudo = np.eye(k)
    Z = np.vstack([Xd, pseudo])
    v = np.concatenate([y, np.zeros(k)])
    wpos = np.concatenate([np.full(n, tau / n), np.full(k, lam)])
    wneg = np.concatenate([np.full(n, (1.0 - tau) / n), np.full(k, lam)])
    return Z, v, wpos, wneg


def _initial_active(n, k, y, tau, intercept):
    pseudo = list(range(n, n + k))
    if not intercept:
        return np.array(pseudo, dtype=np.intp)
    # intercept at the empirical tau-quantile of the response
    order = np.argsort(y, kind="stable")
    q = order[min(n - 1, int(np.floor(tau * n)))]
    return np.array([q] + pseudo, dtype=np.intp)


def _finish(X, y, tau, lam, active, sol, intercept, n, k, iterations, rank_deficient):
    beta = np.array(sol[1:] if intercept else sol, dtype=float)
    b0 = float(sol[0]) if intercept else 0.0
    pinned = active[active >= n] - n
    beta[pinned] = 0.0
    beta[np.abs(beta) < ZERO_TRUNCATION] = 0.0
    obj = _objective_value(X, y, tau, lam, beta, b0)
    return QuantileFit(beta, tau, lam, obj, rank_deficient, iterations, b0, active.copy())


def _check_columns(X):
    zero_cols = np.flatnonzero(~np.any(X != 0, axis=0))
    if zero_cols.size:
        raise DegenerateDesign(f"design column(s) {zero_cols.tolist()} are identically zero")


def solve_qr(problem: QRProblem, intercept: bool = False) -> QuantileFit:
    """Unpenalized quantile regression (the problem's lambda must be 0)."""
    if problem.lam != 0.0:
        raise ValueError("solve_qr expects lambda = 0; use solve_qr_lasso")
    X, y = problem.design, problem.response
    _check_columns(X)
    return solve_qr_lasso(problem, intercept=intercept)


def solve_qr_lasso(problem: QRProblem, intercept: bool = False,
                   warm_start: Optional[np.ndarray] = None) -> QuantileFit:
    """Global minimizer of (1/n) sum rho_tau(y - x'b) + lam * ||b||_1."""
    X, y, tau, lam = problem.design, problem.response, problem.tau, problem.lam
    n, k = X.shape
    Z, v, wpos, wneg = _augment(X, y, tau, lam, intercept)
    active = warm_start if warm_start is not None else _initial_active(n, k, y, tau, intercept)
    solver = _VertexSolver(Z, v, wpos, wneg)
    active, sol = solver.solve(active)
    rank_def = bool(np.linalg.matrix_rank(X) < k)
    return _finish(X, y, tau, lam, active, sol, intercept, n, k, solver.iterations, rank_def)


def solve_qr_path(design, response, tau: float, lambdas: Sequence[float],
                  intercept: bool = False) -> list[QuantileFit]:
    """Fits along a lambda grid, warm-starting each vertex search from the previous optimum.

    The vertex geometry does not depend on lambda, so the previous optimal
    vertex is a valid (usually near-optimal) starting point.
    """
    X = np.asarray(design, dtype=float)
    y = np.asarray(response, dtype=float)
    tau = check_tau(tau)
    n, k = X.shape
    active = _initial_active(n, k, y, tau, intercept)
    rank_def = bool(np.linalg.matrix_rank(X) < k) if n >= k else True
    fits = []
    for lam in lambdas:
        lam = check_lambda(lam)
        Z, v, wpos, wneg = _augment(X, y, tau, lam, intercept)
        solver = _VertexSolver(Z, v, wpos, wneg)
        active, sol = solver.solve(active)
        fits.append(_finish(X, y, tau, lam, active, sol, intercept, n, k,
                            solver.iterations, rank_def))
    return fits
