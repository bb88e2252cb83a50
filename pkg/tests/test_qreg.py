import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from qgcnet.core import InvalidTau, NegativeLambda
from qgcnet.qreg import (
    DegenerateDesign,
    QRProblem,
    check_loss,
    lambda_max,
    qr_objective,
    solve_qr,
    solve_qr_lasso,
    solve_qr_path,
)

from oracles import qr_lasso_grid_oracle, qr_obj, qr_subset_oracle


def _instance(seed, n, k):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, k))
    y = X @ rng.normal(size=k) + rng.standard_t(3, size=n)
    return X, y


# ------------------------------------------------------------- check loss

def test_check_loss_values():
    assert check_loss(0.0, 0.3) == 0.0
    assert check_loss(1.0, 0.05) == pytest.approx(0.05)
    assert check_loss(-1.0, 0.05) == pytest.approx(0.95)
    assert check_loss(2.5, 0.5) == pytest.approx(1.25)
    assert check_loss(-2.5, 0.5) == pytest.approx(1.25)


def test_check_loss_bad_tau():
    with pytest.raises(InvalidTau):
        check_loss(1.0, 1.0)


@given(st.floats(-1e6, 1e6), st.floats(0.001, 0.999))
def test_check_loss_nonnegative(u, tau):
    assert check_loss(u, tau) >= 0.0


# ------------------------------------------------------------- objective

def test_objective_at_zero_is_mean_loss():
    X, y = _instance(1, 15, 3)
    prob = QRProblem(X, y, 0.2, lam=0.7)
    assert qr_objective(prob, np.zeros(3)) == pytest.approx(np.mean(check_loss(y, 0.2)))


def test_objective_perfect_fit():
    X, _ = _instance(2, 10, 2)
    beta = np.array([1.5, -0.5])
    assert qr_objective(QRProblem(X, X @ beta, 0.3), beta) == pytest.approx(0.0, abs=1e-14)


# ------------------------------------------------------------- solve_qr

def test_median_of_one_to_nine():
    fit = solve_qr(QRProblem(np.ones((9, 1)), np.arange(1.0, 10.0), 0.5))
    assert fit.coefficients[0] == pytest.approx(5.0)


@pytest.mark.parametrize("tau", [0.05, 0.3, 0.5, 0.9])
def test_exact_linear_fit(tau):
    x = np.linspace(-2, 3, 11)[:, None]
    fit = solve_qr(QRProblem(x, 2.0 * x[:, 0], tau))
    assert fit.coefficients[0] == pytest.approx(2.0)
    assert fit.objective_value == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("seed", range(10))
def test_solve_qr_matches_subset_oracle(seed):
    X, y = _instance(seed, 10, 2)
    fit = solve_qr(QRProblem(X, y, 0.35))
    best, _ = qr_subset_oracle(X, y, 0.35)
    assert abs(fit.objective_value - best) < 1e-9
    assert fit.objective_value == pytest.approx(qr_obj(X, y, 0.35, 0.0, fit.coefficients), abs=1e-9)


def test_zero_column_rejected():
    X = np.column_stack([np.ones(5), np.zeros(5)])
    with pytest.raises(DegenerateDesign):
        solve_qr(QRProblem(X, np.arange(5.0), 0.5))


def test_rank_deficient_flagged():
    x = np.arange(1.0, 8.0)
    X = np.column_stack([x, 2 * x])
    fit = solve_qr(QRProblem(X, x + np.sin(x), 0.5))
    assert fit.rank_deficient


def test_solve_qr_rejects_penalty():
    X, y = _instance(0, 10, 2)
    with pytest.raises(ValueError):
        solve_qr(QRProblem(X, y, 0.5, lam=0.1))


def test_negative_lambda():
    X, y = _instance(0, 10, 2)
    with pytest.raises(NegativeLambda):
        QRProblem(X, y, 0.5, lam=-0.1)


# ------------------------------------------------------------- lasso QR

def test_lasso_zero_penalty_matches_unpenalized():
    X, y = _instance(4, 30, 4)
    a = solve_qr(QRProblem(X, y, 0.25))
    b = solve_qr_lasso(QRProblem(X, y, 0.25, 0.0))
    assert abs(a.objective_value - b.objective_value) < 1e-8


def test_lasso_large_penalty_gives_zero():
    X, y = _instance(5, 40, 5)
    tau = 0.1
    bound = np.max(np.mean(np.abs(X), axis=0)) * max(tau, 1 - tau) + 1e-3
    fit = solve_qr_lasso(QRProblem(X, y, tau, bound))
    assert np.all(fit.coefficients == 0.0)


def test_lasso_threshold_is_tight():
    X, y = _instance(6, 40, 5)
    lmax = lambda_max(X, y, 0.3)
    assert np.all(solve_qr_lasso(QRProblem(X, y, 0.3, lmax)).coefficients == 0.0)
    assert np.any(solve_qr_lasso(QRProblem(X, y, 0.3, 0.9 * lmax)).coefficients != 0.0)


def test_lasso_matches_grid_oracle_small():
    X, y = _instance(7, 8, 2)
    fit = solve_qr_lasso(QRProblem(X, y, 0.4, 0.05))
    best, _ = qr_lasso_grid_oracle(X, y, 0.4, 0.05)
    assert abs(fit.objective_value - best) < 1e-6


def test_lasso_high_dimensional():
    X, y = _instance(8, 15, 40)
    fit = solve_qr_lasso(QRProblem(X, y, 0.2, 0.05))
    assert np.count_nonzero(fit.coefficients) <= 15
    # a random sparse perturbation never improves on the solver's optimum
    rng = np.random.default_rng(0)
    prob = QRProblem(X, y, 0.2, 0.05)
    for _ in range(50):
        b = fit.coefficients + 1e-3 * rng.normal(size=40) * (rng.random(40) < 0.2)
        assert qr_objective(prob, b) >= fit.objective_value - 1e-12


def test_intercept_is_unpenalized_optimum():
    X, y = _instance(9, 25, 3)
    a = solve_qr_lasso(QRProblem(X, y + 1.0, 0.3, 0.02), intercept=True)
    resid = y + 1.0 - X @ a.coefficients - a.intercept
    val = np.mean(check_loss(resid, 0.3)) + 0.02 * np.abs(a.coefficients).sum()
    assert a.objective_value == pytest.approx(val, abs=1e-12)
    rng = np.random.default_rng(1)
    for _ in range(50):
        d0 = 1e-3 * rng.normal()
        d = 1e-3 * rng.normal(size=3)
        r2 = y + 1.0 - X @ (a.coefficients + d) - (a.intercept + d0)
        v2 = np.mean(check_loss(r2, 0.3)) + 0.02 * np.abs(a.coefficients + d).sum()
        assert v2 >= val - 1e-12


def test_path_matches_cold_solves():
    X, y = _instance(10, 40, 6)
    grid = lambda_max(X, y, 0.1) * np.logspace(0, -3, 12)
    path = solve_qr_path(X, y, 0.1, grid)
    for lam, fit in zip(grid, path):
        cold = solve_qr_lasso(QRProblem(X, y, 0.1, lam))
        assert fit.objective_value == pytest.approx(cold.objective_value, abs=1e-10)


# ------------------------------------------------------------- properties

@settings(max_examples=60, suppress_health_check=[HealthCheck.too_slow])
@given(st.integers(0, 10**6), st.integers(8, 40), st.integers(1, 4), st.floats(0.05, 0.95))
def test_quantile_count_property(seed, n, k, tau):
    rng = np.random.default_rng(seed)
    X = np.column_stack([np.ones(n), rng.normal(size=(n, k - 1))])
    y = rng.normal(size=n)
    fit = solve_qr(QRProblem(X, y, tau))
    r = y - X @ fit.coefficients
    tol = 1e-9
    assert np.sum(r < -tol) <= n * tau + 1e-9
    assert np.sum(r <= tol) >= n * tau - k - 1e-9


@settings(max_examples=30, suppress_health_check=[HealthCheck.too_slow])
@given(st.integers(0, 10**6), st.floats(0.1, 0.9))
def test_monotone_penalty(seed, tau):
    X, y = _instance(seed, 30, 5)
    grid = lambda_max(X, y, tau) * np.logspace(0.2, -3, 15)
    fits = solve_qr_path(X, y, tau, grid)
    obj = [f.objective_value for f in fits]
    l1 = [np.abs(f.coefficients).sum() for f in fits]
    # grid is descending: objective nonincreasing, l1 norm nondecreasing along it
    assert all(a >= b - 1e-12 for a, b in zip(obj, obj[1:]))
    assert all(a <= b + 1e-9 for a, b in zip(l1, l1[1:]))


@settings(max_examples=30)
@given(st.integers(0, 10**6), st.floats(0.1, 10.0))
def test_scale_equivariance(seed, c):
    X, y = _instance(seed, 15, 2)
    a = solve_qr(QRProblem(X, y, 0.3)).coefficients
    b = solve_qr(QRProblem(X, c * y, 0.3)).coefficients
    np.testing.assert_allclose(b, c * a, rtol=1e-8, atol=1e-10)


@settings(max_examples=40, suppress_health_check=[HealthCheck.too_slow])
@given(st.integers(0, 10**6), st.floats(0.0, 0.3))
def test_optimality_certificate(seed, lam):
    X, y = _instance(seed, 20, 3)
    prob = QRProblem(X, y, 0.25, lam)
    fit = solve_qr_lasso(prob)
    for j in range(3):
        for s in (-1e-3, 1e-3):
            b = fit.coefficients.copy()
            b[j] += s
            assert qr_objective(prob, b) >= fit.objective_value - 1e-12


def test_deterministic():
    X, y = _instance(11, 50, 8)
    a = solve_qr_lasso(QRProblem(X, y, 0.05, 0.01))
    b = solve_qr_lasso(QRProblem(X, y, 0.05, 0.01))
    assert np.array_equal(a.coefficients, b.coefficients)
