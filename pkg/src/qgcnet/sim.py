"""Hub-network simulation study: data generation, recovery scoring, heatmaps.

Each component has 10 nodes, the first being the hub.  With a crash
indicator ``f_t ~ Bernoulli(crash_prob)``::

    hub:        h_t = ar * h_{t-1} + e        if f_t = 0
                h_t = crash_mean + e          if f_t = 1
    peripheral: x_t = ar * x_{t-1} + e                              if f_{t-1} = 0
                x_t = ar * x_{t-1} + hub_to_peripheral * h_{t-1} + e  if f_{t-1} = 1

with ``e ~ N(0, noise_sd^2)`` drawn fresh for every node and time point.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from .core import (
    DimensionMismatch,
    Network,
    QGCError,
    ReturnPanel,
    replicate_seed,
    validate_panel,
)
from .networks import CVConfig, multivariate_network, parallel_map

COMPONENT_SIZE = 10


class InvalidP(QGCError, ValueError):
    pass


@dataclass(frozen=True)
class HubSimConfig:
    p: int = 30
    n: int = 100
    burn_in: int = 500
    ar_coef: float = 0.4
    hub_to_peripheral: float = 0.6
    crash_prob: float = 0.05
    noise_sd: float = 0.1
    crash_mean: float = -0.8
    seed: int = 0
    # one crash indicator per component (default) or one shared by all components
    global_factor: bool = False

    def __post_init__(self):
        if self.p <= 0 or self.p % COMPONENT_SIZE:
            raise InvalidP(f"p must be a positive multiple of {COMPONENT_SIZE}, got {self.p}")
        if not 0.0 <= self.crash_prob <= 1.0:
            raise ValueError(f"crash_prob must be a probability, got {self.crash_prob}")
        if not self.noise_sd > 0:
            raise ValueError("noise_sd must be positive")
        if self.n < 1 or self.burn_in < 0:
            raise ValueError("n must be positive and burn_in nonnegative")


@dataclass(frozen=True, eq=False)
class GroundTruth:
    adjacency: np.ndarray
    hub_ids: tuple

    @property
    def n_edges(self) -> int:
        return int(np.triu(self.adjacency, 1).sum())


@dataclass(frozen=True)
class RecoveryScore:
    sensitivity_mean: float
    sensitivity_sd: float
    specificity_mean: float
    specificity_sd: float
    n_replicates: int


def generate_hub_truth(p: int) -> GroundTruth:
    if p <= 0 or p % COMPONENT_SIZE:
        raise InvalidP(f"p must be a positive multiple of {COMPONENT_SIZE}, got {p}")
    adj = np.zeros((p, p), dtype=np.int8)
    hubs = tuple(range(0, p, COMPONENT_SIZE))
    for h in hubs:
        adj[h, h + 1:h + COMPONENT_SIZE] = 1
        adj[h + 1:h + COMPONENT_SIZE, h] = 1
    adj.setflags(write=False)
    return GroundTruth(adj, hubs)


def entity_labels(p: int) -> tuple:
    return tuple(f"n{i:03d}" for i in range(p))


def simulate_series(config: HubSimConfig, rng: Optional[np.random.Generator] = None):
    """Raw simulated values (n x p, burn-in removed) and the crash indicators (n x components)."""
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    p = config.p
    n_comp = p // COMPONENT_SIZE
    total = config.burn_in + config.n
    if config.global_factor:
        f = np.repeat(rng.random((total, 1)) < config.crash_prob, n_comp, axis=1)
    else:
        f = rng.random((total, n_comp)) < config.crash_prob
    noise = rng.normal(0.0, config.noise_sd, size=(total, p))
    hubs = np.arange(0, p, COMPONENT_SIZE)
    is_hub = np.zeros(p, dtype=bool)
    is_hub[hubs] = True
    comp = np.arange(p) // COMPONENT_SIZE
    hub_of = comp * COMPONENT_SIZE
    a, c = config.ar_coef, config.hub_to_peripheral
    x = np.zeros((total, p))
    prev = np.zeros(p)
    prev_f = np.zeros(n_comp, dtype=bool)
    for t in range(total):
        ft = f[t]
        cur = a * prev + noise[t]
        # hubs: the crash replaces the AR dynamics entirely
        crash_hub = ft[comp] & is_hub
        cur[crash_hub] = config.crash_mean + noise[t, crash_hub]
        # peripherals respond one step after their hub's crash
        hit = prev_f[comp] & ~is_hub
        cur[hit] += c * prev[hub_of[hit]]
        x[t] = cur
        prev = cur
        prev_f = ft
    return x[config.burn_in:], f[config.burn_in:]


def simulate_panel(config: HubSimConfig) -> tuple[ReturnPanel, GroundTruth]:
    values, _ = simulate_series(config)
    panel = validate_panel(values, range(config.n), entity_labels(config.p))
    return panel, generate_hub_truth(config.p)


def hub_mean_fixed_point(config: HubSimConfig) -> float:
    """Stationary mean of a hub series: m = q * crash_mean + (1 - q) * ar * m."""
    q = config.crash_prob
    return q * config.crash_mean / (1.0 - config.ar_coef * (1.0 - q))


def score_recovery(estimated, truth: GroundTruth) -> tuple[float, float]:
    """(sensitivity, specificity) in percent over unordered node pairs."""
    est = estimated.adjacency if isinstance(estimated, Network) else np.asarray(estimated)
    true = truth.adjacency
    if est.shape != true.shape:
        raise DimensionMismatch(f"estimated {est.shape} vs truth {true.shape}")
    iu = np.triu_indices(true.shape[0], 1)
    e = est[iu] != 0
    t = true[iu] != 0
    sens = 100.0 * np.sum(e & t) / np.sum(t)
    spec = 100.0 * np.sum(~e & ~t) / np.sum(~t)
    return float(sens), float(spec)


Estimator = Callable[[ReturnPanel], Network]


@dataclass(frozen=True)
class _Replicate:
    config: HubSimConfig
    method: str
    tau: Optional[float]
    cv: Optional[CVConfig]
    estimator: Optional[Estimator]


def _run_replicate(task: _Replicate):
    panel, truth = simulate_panel(task.config)
    if task.estimator is not None:
        net = task.estimator(panel)
    else:
        net = multivariate_network(panel, task.method, task.tau, task.cv)
    sens, spec = score_recovery(net, truth)
    return sens, spec, np.asarray(net.adjacency, dtype=np.int8)


@dataclass(frozen=True, eq=False)
class ExperimentResult:
    score: RecoveryScore
    heatmap: np.ndarray
    sensitivities: np.ndarray
    specificities: np.ndarray
    adjacencies: np.ndarray


def _sd(x) -> float:
    return float(np.std(x, ddof=1)) if len(x) > 1 else 0.0


def run_replicates(config: HubSimConfig, method: str = "qgc", tau: Optional[float] = 0.05,
                   cv: Optional[CVConfig] = None, n_replicates: int = 50,
                   estimator: Optional[Estimator] = None, n_jobs: int = 1) -> ExperimentResult:
    if n_replicates < 1:
        raise ValueError("n_replicates must be >= 1")
    tasks = [
        _Replicate(replace(config, seed=replicate_seed(config.seed, r)), method, tau, cv, estimator)
        for r in range(n_replicates)
    ]
    out = parallel_map(_run_replicate, tasks, n_jobs)
    sens = np.array([o[0] for o in out])
    spec = np.array([o[1] for o in out])
    adj = np.stack([o[2] for o in out])
    score = RecoveryScore(float(sens.mean()), _sd(sens), float(spec.mean()), _sd(spec),
                          n_replicates)
    return ExperimentResult(score, adj.mean(axis=0), sens, spec, adj)


def run_experiment(config: HubSimConfig, method: str = "qgc", tau: Optional[float] = 0.05,
                   cv: Optional[CVConfig] = None, n_replicates: int = 50,
                   estimator: Optional[Estimator] = None, n_jobs: int = 1) -> RecoveryScore:
    return run_replicates(config, method, tau, cv, n_replicates, estimator, n_jobs).score


def edge_detection_heatmap(config: HubSimConfig, method: str = "qgc",
                           tau: Optional[float] = 0.05, cv: Optional[CVConfig] = None,
                           n_replicates: int = 50, estimator: Optional[Estimator] = None,
                           n_jobs: int = 1) -> np.ndarray:
    """Fraction of replicates in which each edge (i, j) is detected."""
    return run_replicates(config, method, tau, cv, n_replicates, estimator, n_jobs).heatmap


def hubs_first_order(p: int) -> np.ndarray:
    """Node order with the hubs first, matching the reference heatmap layout."""
    hubs = list(range(0, p, COMPONENT_SIZE))
    rest = [i for i in range(p) if i % COMPONENT_SIZE]
    return np.array(hubs + rest)


def reorder_hubs_first(matrix) -> np.ndarray:
    m = np.asarray(matrix)
    order = hubs_first_order(m.shape[0])
    return m[np.ix_(order, order)]
