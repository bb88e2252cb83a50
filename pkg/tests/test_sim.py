import numpy as np
import pytest

from qgcnet.core import DimensionMismatch, Method, Network
from qgcnet.networks import CVConfig
from qgcnet.sim import (
    HubSimConfig,
    InvalidP,
    edge_detection_heatmap,
    entity_labels,
    generate_hub_truth,
    hub_mean_fixed_point,
    reorder_hubs_first,
    run_experiment,
    run_replicates,
    score_recovery,
    simulate_panel,
    simulate_series,
)


def _stub(adjacency_fn):
    def estimator(panel):
        adj = np.asarray(adjacency_fn(panel.p), dtype=np.int8)
        return Network(adj, panel.entity_ids, Method.GC_MULTIVARIATE)
    return estimator


def _acf1(x):
    x = x - x.mean()
    return float(x[1:] @ x[:-1] / (x @ x))


@pytest.mark.parametrize("p,edges", [(30, 27), (70, 63), (10, 9)])
def test_hub_truth(p, edges):
    t = generate_hub_truth(p)
    assert t.n_edges == edges
    assert t.hub_ids == tuple(range(0, p, 10))
    deg = t.adjacency.sum(axis=1)
    assert np.all(deg[list(t.hub_ids)] == 9)


def test_invalid_p():
    with pytest.raises(InvalidP):
        generate_hub_truth(25)
    with pytest.raises(InvalidP):
        HubSimConfig(p=15)


def test_no_crash_collapses_to_ar1():
    x, f = simulate_series(HubSimConfig(p=10, n=5000, crash_prob=0.0, seed=1))
    assert not f.any()
    for j in (0, 4):
        assert abs(_acf1(x[:, j]) - 0.4) < 0.05
        assert abs(np.std(x[:, j]) - 0.1 / np.sqrt(1 - 0.16)) < 0.01


def test_always_crash_hub_is_iid():
    x, _ = simulate_series(HubSimConfig(p=10, n=5000, crash_prob=1.0, seed=2))
    assert abs(x[:, 0].mean() + 0.8) < 0.01
    assert abs(np.std(x[:, 0]) - 0.1) < 0.01


def test_crash_frequency():
    _, f = simulate_series(HubSimConfig(p=10, n=20000, seed=3))
    assert abs(f.mean() - 0.05) < 0.01


def test_hub_stationary_mean_matches_fixed_point():
    cfg = HubSimConfig(p=10, n=20000, crash_prob=0.2, seed=4)
    x, _ = simulate_series(cfg)
    assert abs(x[:, 0].mean() - hub_mean_fixed_point(cfg)) < 0.02


def test_peripheral_responds_after_crash():
    x, f = simulate_series(HubSimConfig(p=10, n=4000, seed=5))
    crash = np.flatnonzero(f[:-1, 0]) + 1
    calm = np.flatnonzero(~f[:-1, 0]) + 1
    assert x[crash, 3].mean() < x[calm, 3].mean() - 0.2


def test_factor_switch():
    _, per = simulate_series(HubSimConfig(p=30, n=3000, seed=6))
    _, glob = simulate_series(HubSimConfig(p=30, n=3000, seed=6, global_factor=True))
    assert not np.array_equal(per[:, 0], per[:, 1])
    assert np.array_equal(glob[:, 0], glob[:, 1]) and np.array_equal(glob[:, 0], glob[:, 2])


def test_panel_shape_and_determinism():
    cfg = HubSimConfig(p=20, n=50, seed=9)
    a, truth = simulate_panel(cfg)
    b, _ = simulate_panel(cfg)
    assert (a.T, a.p) == (50, 20)
    assert a == b
    assert a.entity_ids == entity_labels(20)
    assert truth.n_edges == 18


def test_score_recovery_extremes():
    truth = generate_hub_truth(30)
    assert score_recovery(truth.adjacency, truth) == (100.0, 100.0)
    assert score_recovery(np.zeros((30, 30)), truth) == (0.0, 100.0)
    assert score_recovery(np.ones((30, 30)) - np.eye(30), truth) == (100.0, 0.0)
    with pytest.raises(DimensionMismatch):
        score_recovery(np.zeros((20, 20)), truth)


def test_perfect_and_empty_stubs():
    cfg = HubSimConfig(p=20, n=30)
    perfect = _stub(lambda p: generate_hub_truth(p).adjacency)
    s = run_experiment(cfg, estimator=perfect, n_replicates=4)
    assert (s.sensitivity_mean, s.sensitivity_sd, s.specificity_mean, s.specificity_sd) == \
        (100.0, 0.0, 100.0, 0.0)
    heat = edge_detection_heatmap(cfg, estimator=perfect, n_replicates=3)
    np.testing.assert_array_equal(heat, generate_hub_truth(20).adjacency)
    empty = edge_detection_heatmap(cfg, estimator=_stub(lambda p: np.zeros((p, p))), n_replicates=3)
    assert np.all(empty == 0)


def test_single_replicate_sd_is_zero():
    s = run_experiment(HubSimConfig(p=10, n=40), "gc", None, n_replicates=1)
    assert s.sensitivity_sd == 0.0 and s.specificity_sd == 0.0


def test_replicates_deterministic_and_heatmap_consistent():
    cfg = HubSimConfig(p=10, n=50, seed=12)
    a = run_replicates(cfg, "qgc", 0.05, CVConfig(n_folds=5), n_replicates=3)
    b = run_replicates(cfg, "qgc", 0.05, CVConfig(n_folds=5), n_replicates=3, n_jobs=2)
    assert a.score == b.score
    np.testing.assert_array_equal(a.heatmap, b.heatmap)
    truth = generate_hub_truth(10).adjacency.astype(bool)
    iu = np.triu_indices(10, 1)
    assert abs(a.heatmap[iu][truth[iu]].mean() - a.score.sensitivity_mean / 100) < 1e-10
    h = a.heatmap
    assert np.array_equal(h, h.T) and np.all(np.diag(h) == 0)
    assert np.all((h >= 0) & (h <= 1))


def test_hubs_first_reordering():
    m = reorder_hubs_first(generate_hub_truth(30).adjacency)
    # after reordering the first three rows are the hubs, each with nine edges
    assert np.all(m[:3].sum(axis=1) == 9)
    assert np.all(m[3:].sum(axis=1) == 1)
    assert np.all(m[:3, :3] == 0)
