"""Independent reference computations used by the test-suite.

None of these call into the package; each one reaches the answer by a
different route than the production code.
"""
from __future__ import annotations

import itertools

import numpy as np
from scipy import stats


def check_loss(u, tau):
    u = np.asarray(u, dtype=float)
    return np.where(u > 0, tau * u, (tau - 1.0) * u)


def qr_obj(X, y, tau, lam, beta):
    return float(np.mean(check_loss(y - X @ beta, tau)) + lam * np.abs(beta).sum())


def qr_subset_oracle(X, y, tau):
    """Unpenalized QR by enumerating every k-subset of rows and interpolating them."""
    n, k = X.shape
    best, arg = np.inf, None
    for rows in itertools.combinations(range(n), k):
        A = X[list(rows)]
        if abs(np.linalg.det(A)) < 1e-12:
            continue
        beta = np.linalg.solve(A, y[list(rows)])
        val = qr_obj(X, y, tau, 0.0, beta)
        if val < best:
            best, arg = val, beta
    return best, arg


def qr_lasso_grid_oracle(X, y, tau, lam, box=3.0, step=1e-2, rounds=120, starts=5):
    """Penalized QR for k <= 2: dense grid, then repeated zoom around the best few points.

    The objective is piecewise linear, so a single zoom can get trapped in a thin
    valley along a kink; several starts and a slow shrink guard against that.
    """
    k = X.shape[1]

    def obj(g):
        return np.mean(check_loss(y[None, :] - g @ X.T, tau), axis=1) + lam * np.abs(g).sum(axis=1)

    axes = [np.arange(-box, box + step / 2, step)] * k
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, k)
    vals = obj(grid)
    best, arg = np.inf, None
    for idx in np.argsort(vals, kind="stable")[:starts]:
        centre, val = grid[idx], float(vals[idx])
        width = 3 * step
        for _ in range(rounds):
            axes = [np.linspace(c - width, c + width, 41) for c in centre]
            g = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, k)
            v = obj(g)
            j = int(np.argmin(v))
            if v[j] <= val:
                val, centre = float(v[j]), g[j]
            width *= 0.8
        if val < best:
            best, arg = val, centre
    return best, arg


def lasso_subgradient_oracle(X, y, lam, iters=200_000):
    """Proximal gradient (ISTA) with a fixed step, run far past convergence."""
    n, k = X.shape
    L = 2.0 * np.linalg.eigvalsh(X.T @ X / n).max()
    step = 1.0 / L
    a = np.zeros(k)
    for _ in range(iters):
        grad = -2.0 * X.T @ (y - X @ a) / n
        z = a - step * grad
        a = np.sign(z) * np.maximum(np.abs(z) - step * lam, 0.0)
    r = y - X @ a
    return float(r @ r / n + lam * np.abs(a).sum()), a


def normal_equations(X, y):
    return np.linalg.solve(X.T @ X, X.T @ y)


def t_critical(alpha, df):
    return float(stats.t.ppf(1.0 - alpha / 2.0, df))


def pearson_formula(x, y):
    """Textbook correlation and its two-sided p-value via the t transform."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    m = len(x)
    r = (m * np.sum(x * y) - x.sum() * y.sum()) / np.sqrt(
        (m * np.sum(x * x) - x.sum() ** 2) * (m * np.sum(y * y) - y.sum() ** 2))
    t = r * np.sqrt((m - 2) / (1 - r * r))
    return float(r), float(2 * stats.t.sf(abs(t), m - 2))


def welch_formula(a, b):
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    na, nb = len(a), len(b)
    sa = np.sum((a - a.mean()) ** 2) / (na - 1)
    sb = np.sum((b - b.mean()) ** 2) / (nb - 1)
    t = (a.mean() - b.mean()) / np.sqrt(sa / na + sb / nb)
    df = (sa / na + sb / nb) ** 2 / ((sa / na) ** 2 / (na - 1) + (sb / nb) ** 2 / (nb - 1))
    return float(t), float(1 - stats.t.cdf(t, df))


def ljung_box_pvalue(x, lags=10):
    x = np.asarray(x, float) - np.mean(x)
    n = len(x)
    denom = x @ x
    q = 0.0
    for h in range(1, lags + 1):
        rho = (x[h:] @ x[:-h]) / denom
        q += rho * rho / (n - h)
    q *= n * (n + 2)
    return float(stats.chi2.sf(q, lags))


def simulate_garch(T, mu, omega, gamma, eta, seed, burn=500):
    rng = np.random.default_rng(seed)
    z = rng.standard_normal(T + burn)
    x = np.empty(T + burn)
    s2 = omega / (1 - gamma - eta)
    prev = 0.0
    for t in range(T + burn):
        if t > 0:
            s2 = omega + gamma * prev**2 + eta * s2
        e = np.sqrt(s2) * z[t]
        x[t] = mu + e
        prev = e
    return x[burn:]
