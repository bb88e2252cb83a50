"""Granger (mean) and quantile-Granger networks from a return panel.

Two constructions are provided for each loss:

* bivariate: for every pair (i, j) regress both series on the lags of both
  and test the cross coefficients;
* multivariate: regress each series on the lags of *all* series with an l1
  penalty, choosing the penalty by blocked cross-validation.

In both cases the undirected edge i-j is present iff either cross coefficient
is declared nonzero.  Lag order is one throughout.
"""
from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import stats

from .core import (
    Method,
    Network,
    QGCError,
    ReturnPanel,
    TooFewSamples,
    TooShort,
    Window,
    check_tau,
    slice_panel,
)
from .linreg import LSProblem, lasso_lambda_max, solve_lasso_path, solve_ols, t_test_nonzero
from .qreg import QRProblem, check_loss, lambda_max, solve_qr, solve_qr_path

log = logging.getLogger(__name__)

GC = "gc"
QGC = "qgc"


@dataclass(frozen=True, eq=False)
class LagDataset:
    design: np.ndarray
    responses: np.ndarray

    @property
    def n(self) -> int:
        return self.design.shape[0]


@dataclass(frozen=True)
class CVConfig:
    """Cross-validation settings.

    ``lambda_grid=None`` means a per-node default grid: ``n_grid`` log-spaced
    values from the all-zero threshold down to ``min_ratio`` times it.
    """

    n_folds: int = 10
    lambda_grid: Optional[tuple] = None
    share_lambda: bool = False
    n_grid: int = 50
    min_ratio: float = 1e-3
    # unpenalized intercept in every node regression
    intercept: bool = True

    def __post_init__(self):
        if self.n_folds < 2:
            raise ValueError(f"n_folds must be >= 2, got {self.n_folds}")
        if self.lambda_grid is not None:
            grid = tuple(float(g) for g in self.lambda_grid)
            if not grid:
                raise ValueError("lambda grid is empty")
            if any(g <= 0 for g in grid):
                raise ValueError("lambda grid must be strictly positive")
            if any(a <= b for a, b in zip(grid, grid[1:])):
                raise ValueError("lambda grid must be sorted strictly descending")
            object.__setattr__(self, "lambda_grid", grid)


def _check_method(method: str, tau: Optional[float]) -> tuple[str, Optional[float]]:
    method = str(method).lower()
    if method == GC:
        if tau is not None:
            raise ValueError("tau is only meaningful for the quantile method")
        return method, None
    if method == QGC:
        if tau is None:
            raise ValueError("the quantile method requires tau")
        return method, check_tau(tau)
    raise ValueError(f"unknown method {method!r}; expected 'gc' or 'qgc'")


def make_lag_dataset(panel: ReturnPanel) -> LagDataset:
    if panel.T < 3:
        raise TooShort(f"need at least 3 time points, got {panel.T}")
    v = panel.values
    return LagDataset(v[:-1].copy(), v[1:].copy())


# ---------------------------------------------------------------- bivariate

def hall_sheather_bandwidth(n: int, tau: float, alpha: float = 0.05) -> float:
    """Bandwidth on the probability scale for sparsity estimation."""
    x0 = stats.norm.ppf(tau)
    f0 = stats.norm.pdf(x0)
    z = stats.norm.ppf(1.0 - alpha / 2.0)
    return n ** (-1 / 3) * z ** (2 / 3) * ((1.5 * f0**2) / (2.0 * x0**2 + 1.0)) ** (1 / 3)


def residual_density_at_zero(resid, tau: float, alpha: float = 0.05) -> float:
    """Gaussian-kernel estimate of the residual density at 0."""
    r = np.asarray(resid, dtype=float)
    n = r.size
    hs = hall_sheather_bandwidth(n, tau, alpha)
    hs = min(hs, 0.999 * tau, 0.999 * (1.0 - tau))
    spread = min(np.std(r, ddof=1), stats.iqr(r) / 1.34)
    if not spread > 0:
        spread = np.std(r, ddof=1)
    h = (stats.norm.ppf(tau + hs) - stats.norm.ppf(tau - hs)) * spread
    if not h > 0:
        return np.nan
    return float(np.mean(stats.norm.pdf(r / h)) / h)


def qr_wald_nonzero(design, response, coefficients, tau: float, index: int,
                    alpha: float = 0.05) -> bool:
    """Wald test of a quantile-regression coefficient with the iid asymptotic covariance
    tau(1 - tau) / f(0)^2 * (X'X/n)^{-1} / n.
    """
    X = np.asarray(design, dtype=float)
    y = np.asarray(response, dtype=float)
    b = np.asarray(coefficients, dtype=float)
    if b[index] == 0.0:
        return False
    n = X.shape[0]
    f0 = residual_density_at_zero(y - X @ b, tau, alpha)
    if not np.isfinite(f0) or f0 <= 0:
        return False
    omega_inv = np.linalg.inv(X.T @ X / n)
    var = tau * (1.0 - tau) / f0**2 * omega_inv[index, index] / n
    if var <= 0:
        return True
    return abs(b[index]) / np.sqrt(var) > stats.norm.ppf(1.0 - alpha / 2.0)


def _pair_cross_nonzero(X, y, method, tau, cross, alpha) -> bool:
    if method == GC:
        fit = solve_ols(LSProblem(X, y))
        return t_test_nonzero(fit, cross, alpha)
    fit = solve_qr(QRProblem(X, y, tau))
    if fit.rank_deficient:
        return False
    return qr_wald_nonzero(X, y, fit.coefficients, tau, cross, alpha)


def bivariate_network(panel: ReturnPanel, method: str, tau: Optional[float] = None,
                      alpha: float = 0.05, window: Optional[Window] = None,
                      intercept: bool = True) -> Network:
    method, tau = _check_method(method, tau)
    if panel.p < 2:
        raise ValueError("a network needs at least two entities")
    data = make_lag_dataset(panel)
    p = panel.p
    off = 1 if intercept else 0
    support = np.zeros((p, p), dtype=bool)
    for i in range(p):
        for j in range(i + 1, p):
            X = data.design[:, [i, j]]
            if intercept:
                X = np.column_stack([np.ones(data.n), X])
            for target, cross, src in ((i, off + 1, j), (j, off, i)):
                try:
                    hit = _pair_cross_nonzero(X, data.responses[:, target], method, tau, cross, alpha)
                except (QGCError, np.linalg.LinAlgError) as exc:
                    log.debug("pair (%d, %d) fit failed: %s", i, j, exc)
                    hit = False
                support[target, src] = hit
    kind = Method.GC_BIVARIATE if method == GC else Method.QGC_BIVARIATE
    return Network.from_directed(support, panel.entity_ids, kind, tau, window)


# ------------------------------------------------------------- multivariate

def default_lambda_grid(design, response, method: str, tau: Optional[float] = None,
                        n_grid: int = 50, min_ratio: float = 1e-3,
                        intercept: bool = False) -> np.ndarray:
    if method == GC:
        top = lasso_lambda_max(design, response, intercept)
    else:
        top = lambda_max(design, response, tau, intercept)
    if not top > 0:
        # response carries no signal at any penalty; any positive grid gives all zeros
        top = 1.0
    return top * np.logspace(0.0, np.log10(min_ratio), n_grid)


def _path(X, y, method, tau, grid, intercept=False):
    """(slopes, intercept) per grid value."""
    if method == GC:
        fits = solve_lasso_path(X, y, grid, intercept)
    else:
        fits = solve_qr_path(X, y, tau, grid, intercept)
    return [(f.coefficients, f.intercept) for f in fits]


def _heldout_loss(method, tau, resid):
    if method == GC:
        return float(np.mean(resid**2))
    return float(np.mean(check_loss(resid, tau)))


def contiguous_folds(n: int, n_folds: int) -> list[np.ndarray]:
    return np.array_split(np.arange(n), n_folds)


def _node_grid(dataset: LagDataset, node: int, method: str, tau, cv: CVConfig) -> np.ndarray:
    if cv.lambda_grid is not None:
        return np.asarray(cv.lambda_grid, dtype=float)
    return default_lambda_grid(dataset.design, dataset.responses[:, node], method, tau,
                               cv.n_grid, cv.min_ratio, cv.intercept)


def cv_curve(dataset: LagDataset, node: int, method: str, tau: Optional[float],
             cv: CVConfig) -> tuple[np.ndarray, np.ndarray]:
    """(grid, mean held-out loss per grid value) for one response node."""
    method, tau = _check_method(method, tau)
    n = dataset.n
    if n < cv.n_folds:
        raise TooFewSamples(f"{n} samples cannot be split into {cv.n_folds} folds")
    grid = _node_grid(dataset, node, method, tau, cv)
    X = dataset.design
    y = dataset.responses[:, node]
    losses = np.zeros(grid.size)
    for fold in contiguous_folds(n, cv.n_folds):
        train = np.ones(n, dtype=bool)
        train[fold] = False
        coefs = _path(X[train], y[train], method, tau, grid, cv.intercept)
        Xh, yh = X[fold], y[fold]
        losses += [_heldout_loss(method, tau, yh - Xh @ b - b0) for b, b0 in coefs]
    return grid, losses / cv.n_folds


def select_from_curve(grid, losses) -> float:
    """Grid value with minimal loss; near-ties go to the larger lambda."""
    losses = np.asarray(losses)
    best = losses.min()
    tol = 1e-12 * max(1.0, abs(best))
    order = np.argsort(-np.asarray(grid), kind="stable")
    for j in order:
        if losses[j] <= best + tol:
            return float(grid[j])
    raise AssertionError("unreachable")


def cv_select_lambda(dataset: LagDataset, node: int, method: str, tau: Optional[float] = None,
                     cv: Optional[CVConfig] = None) -> float:
    cv = cv or CVConfig()
    grid, losses = cv_curve(dataset, node, method, tau, cv)
    return select_from_curve(grid, losses)


def fit_node(dataset: LagDataset, node: int, method: str, tau, lam: float,
             intercept: bool = False) -> np.ndarray:
    X = dataset.design
    y = dataset.responses[:, node]
    return _path(X, y, method, tau, [lam], intercept)[0][0]


def support_to_network(coef: np.ndarray, entity_ids, method: str, tau, window=None,
                       lambdas=None) -> Network:
    kind = Method.GC_MULTIVARIATE if method == GC else Method.QGC_MULTIVARIATE
    return Network.from_directed(coef != 0, entity_ids, kind, tau, window, coef, lambdas)


def multivariate_network(panel: ReturnPanel, method: str, tau: Optional[float] = None,
                         cv: Optional[CVConfig] = None, window: Optional[Window] = None) -> Network:
    method, tau = _check_method(method, tau)
    cv = cv or CVConfig()
    data = make_lag_dataset(panel)
    p = panel.p
    lams = np.full(p, np.nan)
    for i in range(p):
        try:
            lams[i] = cv_select_lambda(data, i, method, tau, cv)
        except QGCError as exc:
            log.warning("node %s: tuning failed (%s); no edges from this node",
                        panel.entity_ids[i], exc)
    if cv.share_lambda and np.isfinite(lams).any():
        lams[np.isfinite(lams)] = float(np.mean(lams[np.isfinite(lams)]))
    coef = np.zeros((p, p))
    for i in range(p):
        if not np.isfinite(lams[i]):
            continue
        try:
            coef[i] = fit_node(data, i, method, tau, lams[i], cv.intercept)
        except QGCError as exc:
            log.warning("node %s: fit failed (%s); no edges from this node",
                        panel.entity_ids[i], exc)
    return support_to_network(coef, panel.entity_ids, method, tau, window, lams)


def estimate_network(panel: ReturnPanel, method: str, tau: Optional[float] = None,
                     multivariate: bool = True, cv: Optional[CVConfig] = None,
                     alpha: float = 0.05, window: Optional[Window] = None) -> Network:
    if multivariate:
        return multivariate_network(panel, method, tau, cv, window)
    return bivariate_network(panel, method, tau, alpha, window, (cv or CVConfig()).intercept)


# ------------------------------------------------------------------ rolling

def window_starts(T: int, window_length: int, step: int) -> list[int]:
    if step < 1:
        raise ValueError(f"step must be positive, got {step}")
    if T < window_length:
        raise TooShort(f"panel has {T} rows, shorter than the window length {window_length}")
    return list(range(0, T - window_length + 1, step))


@dataclass(frozen=True)
class _WindowTask:
    panel: ReturnPanel
    window: Window
    method: str
    tau: Optional[float]
    multivariate: bool
    cv: Optional[CVConfig]
    alpha: float
    garch: bool


def _run_window(task: _WindowTask):
    import warnings

    from .garch import GarchFallbackWarning, filter_panel

    sub = slice_panel(task.panel, task.window)
    fallbacks = []
    if task.garch:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", GarchFallbackWarning)
            sub = filter_panel(sub)
        fallbacks = [str(w.message) for w in caught if issubclass(w.category, GarchFallbackWarning)]
    net = estimate_network(sub, task.method, task.tau, task.multivariate, task.cv,
                           task.alpha, task.window)
    return net, fallbacks


def parallel_map(fn: Callable, items: Sequence, n_jobs: int = 1) -> list:
    """Order-preserving map; results never depend on scheduling."""
    if n_jobs is None or n_jobs <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(fn, items))


def rolling_networks(panel: ReturnPanel, window_length: int, step: int, method: str,
                     tau: Optional[float] = None, cv: Optional[CVConfig] = None,
                     multivariate: bool = True, alpha: float = 0.05, garch: bool = False,
                     n_jobs: int = 1, return_fallbacks: bool = False):
    """One network per window starting at 0, step, 2*step, ... ."""
    method, tau = _check_method(method, tau)
    starts = window_starts(panel.T, window_length, step)
    tasks = [_WindowTask(panel, Window(s, window_length), method, tau, multivariate, cv,
                         alpha, garch) for s in starts]
    results = parallel_map(_run_window, tasks, n_jobs)
    nets = [r[0] for r in results]
    if return_fallbacks:
        return nets, [r[1] for r in results]
    return nets
