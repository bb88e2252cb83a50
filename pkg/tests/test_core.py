import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qgcnet.core import (
    DimensionMismatch,
    DuplicateEntityId,
    InvalidTau,
    Method,
    NegativeLambda,
    Network,
    NonFiniteValue,
    NonMonotonicTimestamps,
    Window,
    WindowOutOfBounds,
    check_lambda,
    check_tau,
    replicate_seed,
    slice_panel,
    validate_panel,
)


def _panel(T, p, seed=0):
    rng = np.random.default_rng(seed)
    return validate_panel(rng.normal(size=(T, p)), range(T), [f"e{j}" for j in range(p)])


def test_validate_panel_shape_from_empirical_window():
    panel = _panel(36, 75)
    assert (panel.T, panel.p) == (36, 75)


def test_validate_panel_rejects_nan():
    x = np.zeros((4, 2))
    x[2, 1] = np.nan
    with pytest.raises(NonFiniteValue, match="row 2"):
        validate_panel(x, range(4), ["a", "b"])


def test_validate_panel_rejects_empty():
    with pytest.raises(DimensionMismatch):
        validate_panel(np.zeros((0, 3)), [], ["a", "b", "c"])


def test_validate_panel_other_errors():
    with pytest.raises(NonMonotonicTimestamps):
        validate_panel(np.zeros((3, 1)), [0, 2, 1], ["a"])
    with pytest.raises(DuplicateEntityId):
        validate_panel(np.zeros((3, 2)), [0, 1, 2], ["a", "a"])
    with pytest.raises(DimensionMismatch):
        validate_panel(np.zeros((3, 2)), [0, 1], ["a", "b"])


def test_panel_is_immutable():
    panel = _panel(5, 2)
    with pytest.raises(ValueError):
        panel.values[0, 0] = 1.0


@pytest.mark.parametrize("start,expected_first", [(0, 0), (64, 64)])
def test_slice_panel(start, expected_first):
    panel = _panel(100, 3)
    sub = slice_panel(panel, Window(start, 36))
    assert sub.T == 36
    assert sub.timestamps[0] == expected_first
    np.testing.assert_array_equal(sub.values, panel.values[start:start + 36])


def test_slice_panel_out_of_bounds():
    with pytest.raises(WindowOutOfBounds):
        slice_panel(_panel(100, 3), Window(70, 36))


def test_tau_and_lambda_checks():
    assert check_tau(0.05) == 0.05
    for bad in (0.0, 1.0, -0.1, 1.5, float("nan")):
        with pytest.raises(InvalidTau):
            check_tau(bad)
    with pytest.raises(NegativeLambda):
        check_lambda(-1e-3)
    assert check_lambda(0) == 0.0


def test_network_invariants():
    ids = ("a", "b", "c")
    support = np.array([[1, 1, 0], [0, 0, 0], [0, 1, 0]], dtype=bool)
    net = Network.from_directed(support, ids, Method.QGC_MULTIVARIATE, tau=0.1)
    np.testing.assert_array_equal(net.adjacency, [[0, 1, 0], [1, 0, 1], [0, 1, 0]])
    assert net.n_edges == 2
    with pytest.raises(ValueError):
        Network.from_directed(support, ids, Method.GC_MULTIVARIATE, tau=0.1)
    with pytest.raises(ValueError):
        Network.from_directed(support, ids, Method.QGC_BIVARIATE)
    with pytest.raises(ValueError):
        Network(np.array([[0, 1], [0, 0]]), ("a", "b"), Method.GC_BIVARIATE)


@given(st.integers(0, 2**31), st.integers(0, 1000))
def test_replicate_seed_deterministic(base, rep):
    assert replicate_seed(base, rep) == replicate_seed(base, rep)


def test_replicate_seeds_distinct():
    seeds = {replicate_seed(3, r) for r in range(500)}
    assert len(seeds) == 500


@settings(max_examples=50)
@given(st.integers(2, 6), st.integers(2, 6), st.integers(0, 10_000))
def test_from_directed_is_symmetric(p, _, seed):
    rng = np.random.default_rng(seed)
    s = rng.random((p, p)) < 0.4
    net = Network.from_directed(s, [str(i) for i in range(p)], Method.GC_MULTIVARIATE)
    a = net.adjacency
    assert np.array_equal(a, a.T) and not np.any(np.diag(a))
    off = ~np.eye(p, dtype=bool)
    assert np.array_equal(a[off] != 0, (s | s.T)[off])
