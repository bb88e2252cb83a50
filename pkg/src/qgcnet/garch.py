"""GARCH(1,1) filtering of raw returns into standardized residuals.

Model::

    x_t = mu + sigma_t * eps_t,             eps_t ~ N(0, 1)
    sigma_t^2 = omega + gamma * (x_{t-1} - mu)^2 + eta * sigma_{t-1}^2

Parameters are estimated by Gaussian quasi-maximum likelihood with a
Nelder-Mead search over an unconstrained reparameterization (log omega, and a
logistic "persistence" / "split" pair that keeps gamma, eta >= 0 and
gamma + eta < 1).  The recursion starts at the sample variance.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import optimize, signal
from scipy.special import expit, logit

from .core import QGCError, ReturnPanel, TooShort

MIN_LENGTH = 10
_LOG2PI = np.log(2.0 * np.pi)


class ConstantSeries(QGCError, ValueError):
    pass


class OptimizationFailed(QGCError, RuntimeError):
    pass


class GarchFallbackWarning(UserWarning):
    """A column was standardized by mean/sd because its GARCH fit failed."""


@dataclass(frozen=True)
class GarchParams:
    mu: float
    omega: float
    gamma_arch: float
    eta_garch: float

    def __post_init__(self):
        if not self.omega > 0:
            raise ValueError(f"omega must be positive, got {self.omega}")
        if self.gamma_arch < 0 or self.eta_garch < 0:
            raise ValueError("ARCH and GARCH coefficients must be nonnegative")
        if not self.gamma_arch + self.eta_garch < 1:
            raise ValueError("gamma + eta must be < 1 for covariance stationarity")

    def as_array(self) -> np.ndarray:
        return np.array([self.mu, self.omega, self.gamma_arch, self.eta_garch])


@dataclass(frozen=True, eq=False)
class FilterResult:
    params: GarchParams
    sigma_path: np.ndarray
    residuals: np.ndarray
    log_likelihood: float
    # order (mu, omega, gamma, eta); NaN where the Hessian is not invertible
    standard_errors: Optional[np.ndarray] = None


def garch_variance_path(x, mu, omega, gamma, eta, sigma2_init=None) -> np.ndarray:
    """Conditional variance recursion, started at the sample variance by default."""
    x = np.asarray(x, dtype=float)
    e2 = (x - mu) ** 2
    s0 = float(np.var(x)) if sigma2_init is None else float(sigma2_init)
    # sigma2_t - eta*sigma2_{t-1} = omega + gamma*e2_{t-1}, for t >= 1
    drive = omega + gamma * e2[:-1]
    tail, _ = signal.lfilter([1.0], [1.0, -eta], drive, zi=[eta * s0])
    return np.concatenate([[s0], tail])


def garch_loglik(x, mu, omega, gamma, eta) -> float:
    s2 = garch_variance_path(x, mu, omega, gamma, eta)
    if not np.all(s2 > 0) or not np.all(np.isfinite(s2)):
        return -np.inf
    e2 = (np.asarray(x) - mu) ** 2
    return float(-0.5 * np.sum(_LOG2PI + np.log(s2) + e2 / s2))


def _unpack(theta, scale):
    mu = theta[0] * scale
    omega = np.exp(theta[1]) * scale**2
    # expit rounds to exactly 1 for large arguments
    persistence = min(float(expit(theta[2])), 1.0 - 1e-9)
    split = expit(theta[3])
    return mu, omega, persistence * split, persistence * (1.0 - split)


def _pack(mu, omega, gamma, eta, scale):
    pers = gamma + eta
    split = gamma / pers
    return np.array([mu / scale, np.log(omega / scale**2), logit(pers), logit(split)])


def _numeric_hessian(f, x, rel=1e-4):
    x = np.asarray(x, dtype=float)
    k = x.size
    h = rel * np.maximum(np.abs(x), 1e-2)
    H = np.empty((k, k))
    for i in range(k):
        for j in range(i, k):
            ei = np.zeros(k)
            ej = np.zeros(k)
            ei[i] = h[i]
            ej[j] = h[j]
            val = (f(x + ei + ej) - f(x + ei - ej) - f(x - ei + ej) + f(x - ei - ej)) / (
                4.0 * h[i] * h[j]
            )
            H[i, j] = H[j, i] = val
    return H


def _standard_errors(x, params: GarchParams) -> np.ndarray:
    def ll(p):
        mu, om, ga, et = p
        if om <= 0 or ga < 0 or et < 0 or ga + et >= 1:
            return np.nan
        return garch_loglik(x, mu, om, ga, et)

    H = _numeric_hessian(ll, params.as_array())
    if not np.all(np.isfinite(H)):
        return np.full(4, np.nan)
    try:
        cov = np.linalg.inv(-H)
    except np.linalg.LinAlgError:
        return np.full(4, np.nan)
    d = np.diag(cov)
    return np.where(d > 0, np.sqrt(np.abs(d)), np.nan)


def fit_garch11(series, compute_se: bool = True) -> FilterResult:
    x = np.asarray(series, dtype=float).ravel()
    if x.size < MIN_LENGTH:
        raise TooShort(f"GARCH(1,1) needs at least {MIN_LENGTH} observations, got {x.size}")
    var = float(np.var(x))
    if np.all(x == x[0]) or not var > 0:
        raise ConstantSeries("series has zero variance")
    scale = float(np.sqrt(var))
    mean = float(np.mean(x))
    const_ll = garch_loglik(x, mean, var, 0.0, 0.0)

    def nll(theta):
        mu, om, ga, et = _unpack(theta, scale)
        val = garch_loglik(x, mu, om, ga, et)
        return -val if np.isfinite(val) else 1e300

    starts = [
        (mean, var * 0.05, 0.05, 0.90),
        (mean, var * 0.20, 0.10, 0.70),
        (mean, var * 0.90, 0.02, 0.08),
    ]
    opts = {"xatol": 1e-8, "fatol": 1e-10, "maxiter": 4000, "maxfev": 8000}
    best = None
    for s in starts:
        res = optimize.minimize(nll, _pack(*s, scale), method="Nelder-Mead", options=opts)
        # restart from the end point; Nelder-Mead often stalls on a collapsed simplex
        res = optimize.minimize(nll, res.x, method="Nelder-Mead", options=opts)
        if best is None or res.fun < best.fun:
            best = res
    mu, om, ga, et = _unpack(best.x, scale)
    ll = -float(best.fun)
    if not np.isfinite(ll) or ll < const_ll - 1e-6:
        raise OptimizationFailed("no parameter point improves on the constant-variance model")
    params = GarchParams(float(mu), float(om), float(ga), float(et))
    sigma = np.sqrt(garch_variance_path(x, mu, om, ga, et))
    resid = (x - mu) / sigma
    se = _standard_errors(x, params) if compute_se else None
    return FilterResult(params, sigma, resid, ll, se)


def standardize(column) -> np.ndarray:
    x = np.asarray(column, dtype=float)
    sd = float(np.std(x))
    if np.all(x == x[0]) or not sd > 0:
        raise ConstantSeries("column has zero variance; cannot standardize")
    return (x - x.mean()) / sd


def filter_panel(panel: ReturnPanel) -> ReturnPanel:
    """Replace every column by its GARCH(1,1) standardized residuals.

    Columns whose fit fails are standardized by mean and (population) sd
    instead, and a :class:`GarchFallbackWarning` is emitted naming them.
    """
    out = np.empty_like(panel.values)
    for j, name in enumerate(panel.entity_ids):
        col = panel.values[:, j]
        try:
            out[:, j] = fit_garch11(col, compute_se=False).residuals
        except (OptimizationFailed, TooShort, ConstantSeries) as exc:
            out[:, j] = standardize(col)
            warnings.warn(f"{name}: GARCH fit failed ({exc}); used plain standardization",
                          GarchFallbackWarning, stacklevel=2)
    return panel.with_values(out)
