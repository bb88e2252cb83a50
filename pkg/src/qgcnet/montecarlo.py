"""Monte Carlo check of the limiting law of (penalized) quantile regression with
an autoregressive design:

    sqrt(n) f(0) Omega0^{1/2} (beta_hat - beta*)  =>  N(0, tau (1 - tau) I)

for lam_n = 0 or any lam_n = o(n^{-1/2}).  Covariates follow a stable VAR(1);
the response is ``x_t' beta* + xi_t`` with ``xi_t`` a standard normal shifted
so that its tau-quantile is zero.  ``f(0)`` and ``Omega0`` are known in closed
form, so nothing is estimated except ``beta_hat`` itself.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace
from typing import Optional

import numpy as np
from scipy import linalg, stats

from .core import QGCError, check_tau, replicate_seed
from .qreg import QRProblem, solve_qr_lasso

COV_TOLERANCE = 0.15
KS_LEVEL = 0.01


class UnstableVAR(QGCError, ValueError):
    pass


def _default_var():
    return ((0.5, 0.1, 0.0), (0.0, 0.3, 0.1), (0.1, 0.0, -0.2))


def _default_cov():
    return ((1.0, 0.3, 0.0), (0.3, 1.0, 0.2), (0.0, 0.2, 1.0))


@dataclass(frozen=True)
class QVARScenario:
    beta_star: tuple = (0.5, -0.3, 0.2)
    tau: float = 0.2
    var_coef: tuple = field(default_factory=_default_var)
    innovation_cov: tuple = field(default_factory=_default_cov)
    n: int = 2000
    # "zero" or "power": lam_n = lambda_c * n ** (-lambda_exponent)
    lambda_rule: str = "zero"
    lambda_c: float = 0.5
    lambda_exponent: float = 0.6
    burn_in: int = 1000

    def __post_init__(self):
        check_tau(self.tau)
        A = np.asarray(self.var_coef, dtype=float)
        S = np.asarray(self.innovation_cov, dtype=float)
        p = len(self.beta_star)
        if A.shape != (p, p) or S.shape != (p, p):
            raise ValueError("VAR coefficient and covariance must be p x p")
        if np.max(np.abs(np.linalg.eigvals(A))) >= 1.0:
            raise UnstableVAR("VAR(1) spectral radius must be < 1")
        if self.lambda_rule not in ("zero", "power"):
            raise ValueError(f"unknown lambda rule {self.lambda_rule!r}")
        if self.lambda_rule == "power" and not self.lambda_exponent > 0.5:
            raise ValueError("lam_n must be o(n^{-1/2}); exponent has to exceed 1/2")

    @property
    def p(self) -> int:
        return len(self.beta_star)

    @property
    def lam(self) -> float:
        if self.lambda_rule == "zero":
            return 0.0
        return self.lambda_c * self.n ** (-self.lambda_exponent)

    @property
    def innovation_shift(self) -> float:
        """xi = z - Phi^{-1}(tau) puts the tau-quantile of xi at zero."""
        return -float(stats.norm.ppf(self.tau))

    @property
    def density_at_zero(self) -> float:
        return float(stats.norm.pdf(stats.norm.ppf(self.tau)))

    @property
    def omega0(self) -> np.ndarray:
        """Stationary covariance of the VAR(1) covariates."""
        A = np.asarray(self.var_coef, dtype=float)
        S = np.asarray(self.innovation_cov, dtype=float)
        return linalg.solve_discrete_lyapunov(A, S)

    @property
    def penalty_bias(self) -> np.ndarray:
        """First-order shift of the standardized statistic caused by the penalty.

        Near beta* the penalty adds sqrt(n) lam sign(beta*)'v to the local quadratic,
        which moves the limit mean to -sqrt(n) lam Omega0^{-1/2} sign(beta*).  It
        vanishes only at the rate sqrt(n) lam, i.e. n^{-0.1} for lam = c n^{-0.6}.
        """
        s = np.sign(np.asarray(self.beta_star, dtype=float))
        return -np.sqrt(self.n) * self.lam * np.linalg.solve(_sqrtm_sym(self.omega0), s)


def simulate_qvar(scenario: QVARScenario, seed: int) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(seed)
    A = np.asarray(scenario.var_coef, dtype=float)
    L = np.linalg.cholesky(np.asarray(scenario.innovation_cov, dtype=float))
    total = scenario.burn_in + scenario.n
    shocks = rng.standard_normal((total, scenario.p)) @ L.T
    x = np.empty((total, scenario.p))
    prev = np.zeros(scenario.p)
    for t in range(total):
        prev = A @ prev + shocks[t]
        x[t] = prev
    X = x[scenario.burn_in:]
    xi = rng.standard_normal(scenario.n) + scenario.innovation_shift
    y = X @ np.asarray(scenario.beta_star, dtype=float) + xi
    return X, y


def _sqrtm_sym(M):
    w, V = np.linalg.eigh(M)
    return (V * np.sqrt(w)) @ V.T


@dataclass(frozen=True)
class LimitReport:
    n: int
    n_reps: int
    tau: float
    lam: float
    mean_z: list
    cov_z: list
    cov_frobenius_rel_error: float
    ks_pvalues: list
    median_error_norm: float
    mean_within_band: bool
    penalty_bias: list
    cov_pass: bool
    ks_pass: bool

    @property
    def passed(self) -> bool:
        return self.cov_pass and self.ks_pass

    def to_dict(self) -> dict:
        d = asdict(self)
        d["passed"] = self.passed
        return d


def limit_statistics(scenario: QVARScenario, n_reps: int, seed: int = 0):
    """(Z matrix n_reps x p, error norms) for fits on independent replicates."""
    beta_star = np.asarray(scenario.beta_star, dtype=float)
    root = _sqrtm_sym(scenario.omega0)
    scale = np.sqrt(scenario.n) * scenario.density_at_zero
    Z = np.empty((n_reps, scenario.p))
    errs = np.empty(n_reps)
    for r in range(n_reps):
        X, y = simulate_qvar(scenario, replicate_seed(seed, r))
        fit = solve_qr_lasso(QRProblem(X, y, scenario.tau, scenario.lam))
        diff = fit.coefficients - beta_star
        Z[r] = scale * (root @ diff)
        errs[r] = np.linalg.norm(diff)
    return Z, errs


def empirical_limit_check(scenario: QVARScenario, n_reps: int = 1000, seed: int = 0) -> LimitReport:
    if n_reps < 200:
        raise ValueError(f"n_reps must be >= 200, got {n_reps}")
    Z, errs = limit_statistics(scenario, n_reps, seed)
    v = scenario.tau * (1.0 - scenario.tau)
    target = v * np.eye(scenario.p)
    cov = np.cov(Z, rowvar=False)
    rel = float(np.linalg.norm(cov - target) / np.linalg.norm(target))
    pvals = [float(stats.kstest(Z[:, j], stats.norm(0.0, np.sqrt(v)).cdf).pvalue)
             for j in range(scenario.p)]
    mean = Z.mean(axis=0)
    band = 4.0 * np.sqrt(v / n_reps)
    return LimitReport(
        n=scenario.n,
        n_reps=n_reps,
        tau=scenario.tau,
        lam=scenario.lam,
        mean_z=mean.tolist(),
        cov_z=cov.tolist(),
        cov_frobenius_rel_error=rel,
        ks_pvalues=pvals,
        median_error_norm=float(np.median(errs)),
        mean_within_band=bool(np.all(np.abs(mean) <= band)),
        penalty_bias=scenario.penalty_bias.tolist(),
        cov_pass=rel < COV_TOLERANCE,
        ks_pass=all(p > KS_LEVEL for p in pvals),
    )


def consistency_ratio(scenario: QVARScenario, n_small: int = 500, n_large: int = 2000,
                      n_reps: int = 200, seed: int = 0) -> float:
    """Median ||beta_hat - beta*|| at n_small divided by the median at n_large."""
    _, small = limit_statistics(replace(scenario, n=n_small), n_reps, seed)
    _, large = limit_statistics(replace(scenario, n=n_large), n_reps, seed)
    return float(np.median(small) / np.median(large))
