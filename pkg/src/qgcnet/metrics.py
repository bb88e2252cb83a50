"""Degree summaries of estimated networks and the benchmarking statistics
(Pearson correlation with an external covariate, one-sided Welch test of
unstable versus stable periods).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import stats

from .core import Network, QGCError, TooFewSamples


class ZeroVariance(QGCError, ValueError):
    pass


class InvalidK(QGCError, ValueError):
    pass


class ConstantInput(QGCError, ValueError):
    pass


class LengthMismatch(QGCError, ValueError):
    pass


class UnknownEvent(QGCError, KeyError):
    pass


@dataclass(frozen=True, eq=False)
class DegreeSeries:
    window_labels: tuple
    average_degree: np.ndarray
    scaled_average_degree: np.ndarray


def node_degrees(network: Network) -> np.ndarray:
    return np.asarray(network.adjacency, dtype=np.int64).sum(axis=1)


def average_degree(network: Network) -> float:
    return float(node_degrees(network).mean())


def standardized_degrees(network: Network) -> np.ndarray:
    """Degree z-scores using the population standard deviation."""
    d = node_degrees(network).astype(float)
    sd = d.std()
    if sd == 0:
        raise ZeroVariance("all nodes have the same degree")
    return (d - d.mean()) / sd


def top_k_nodes(network: Network, k: int) -> list[tuple[str, int]]:
    """Highest-degree nodes; ties broken by entity id."""
    p = network.p
    if not 1 <= k <= p:
        raise InvalidK(f"k must lie in [1, {p}], got {k}")
    d = node_degrees(network)
    ranked = sorted(zip(network.entity_ids, d.tolist()), key=lambda t: (-t[1], t[0]))
    return ranked[:k]


def degree_series(networks: Sequence[Network], window_labels: Sequence) -> DegreeSeries:
    avg = np.array([average_degree(n) for n in networks], dtype=float)
    if len(avg) != len(window_labels):
        raise LengthMismatch("one label per network is required")
    mean = avg.mean() if avg.size else 0.0
    # an all-empty history has no scale; report zeros rather than NaN
    scaled = avg / mean if mean > 0 else np.zeros_like(avg)
    return DegreeSeries(tuple(window_labels), avg, scaled)


def pearson_correlation_test(x, y) -> tuple[float, float]:
    """Sample correlation and two-sided p-value from t = r sqrt((m-2)/(1-r^2))."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise LengthMismatch(f"lengths differ: {x.size} vs {y.size}")
    m = x.size
    if m < 3:
        raise TooFewSamples("need at least 3 paired observations")
    xc = x - x.mean()
    yc = y - y.mean()
    sxx, syy = xc @ xc, yc @ yc
    if sxx == 0 or syy == 0:
        raise ConstantInput("correlation undefined for a constant input")
    r = float(np.clip(xc @ yc / np.sqrt(sxx * syy), -1.0, 1.0))
    if abs(r) == 1.0:
        return r, 0.0
    t = r * np.sqrt((m - 2) / (1.0 - r * r))
    return r, float(2.0 * stats.t.sf(abs(t), m - 2))


def welch_t_test_greater(sample_a, sample_b) -> tuple[float, float]:
    """One-sided Welch test of H1: mean(a) > mean(b)."""
    a = np.asarray(sample_a, dtype=float)
    b = np.asarray(sample_b, dtype=float)
    if a.size < 2 or b.size < 2:
        raise TooFewSamples("each sample needs at least two observations")
    va, vb = a.var(ddof=1) / a.size, b.var(ddof=1) / b.size
    diff = a.mean() - b.mean()
    se2 = va + vb
    if se2 == 0:
        if diff == 0:
            return 0.0, 0.5
        return float(np.copysign(np.inf, diff)), 0.0 if diff > 0 else 1.0
    t = diff / np.sqrt(se2)
    df = se2**2 / (va**2 / (a.size - 1) + vb**2 / (b.size - 1))
    return float(t), float(stats.t.sf(t, df))


def label_stability(window_labels: Sequence, event_labels: Sequence, radius: int = 2) -> np.ndarray:
    """True for windows within ``radius`` positions of any event window."""
    labels = list(window_labels)
    index = {lab: i for i, lab in enumerate(labels)}
    unstable = np.zeros(len(labels), dtype=bool)
    for ev in event_labels:
        if ev not in index:
            raise UnknownEvent(ev)
        i = index[ev]
        unstable[max(0, i - radius):i + radius + 1] = True
    return unstable
