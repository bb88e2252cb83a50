"""Domain types shared across the package.

All containers are frozen dataclasses holding read-only numpy arrays, so they
can be handed to worker processes or threads without copying concerns.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np


class QGCError(Exception):
    """Base class for all errors raised by this package."""


class NonFiniteValue(QGCError, ValueError):
    pass


class DimensionMismatch(QGCError, ValueError):
    pass


class NonMonotonicTimestamps(QGCError, ValueError):
    pass


class DuplicateEntityId(QGCError, ValueError):
    pass


class WindowOutOfBounds(QGCError, IndexError):
    pass


class InvalidTau(QGCError, ValueError):
    pass


class NegativeLambda(QGCError, ValueError):
    pass


class TooFewSamples(QGCError, ValueError):
    pass


class TooShort(QGCError, ValueError):
    pass


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


def check_tau(tau: float) -> float:
    tau = float(tau)
    if not (0.0 < tau < 1.0):
        raise InvalidTau(f"tau must lie in (0, 1), got {tau!r}")
    return tau


def check_lambda(lam: float) -> float:
    lam = float(lam)
    if not lam >= 0.0:
        raise NegativeLambda(f"lambda must be nonnegative, got {lam!r}")
    return lam


class Method(str, enum.Enum):
    GC_BIVARIATE = "GC_bivariate"
    GC_MULTIVARIATE = "GC_multivariate"
    QGC_BIVARIATE = "QGC_bivariate"
    QGC_MULTIVARIATE = "QGC_multivariate"

    @property
    def is_quantile(self) -> bool:
        return self.value.startswith("QGC")


@dataclass(frozen=True)
class Window:
    start_index: int
    length: int

    def __post_init__(self):
        if self.start_index < 0:
            raise WindowOutOfBounds(f"negative window start {self.start_index}")
        if self.length < 1:
            raise WindowOutOfBounds(f"window length must be positive, got {self.length}")

    @property
    def stop(self) -> int:
        return self.start_index + self.length


@dataclass(frozen=True)
class QuantileSpec:
    tau: float

    def __post_init__(self):
        check_tau(self.tau)


@dataclass(frozen=True, eq=False)
class ReturnPanel:
    """Time-indexed matrix of returns, rows are time points, columns entities."""

    timestamps: tuple
    values: np.ndarray
    entity_ids: tuple

    @property
    def T(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]

    def __eq__(self, other):
        if not isinstance(other, ReturnPanel):
            return NotImplemented
        return (
            self.timestamps == other.timestamps
            and self.entity_ids == other.entity_ids
            and self.values.shape == other.values.shape
            and bool(np.array_equal(self.values, other.values))
        )

    __hash__ = None

    def with_values(self, values) -> "ReturnPanel":
        """Same timestamps and entities, new (validated) values."""
        return validate_panel(values, self.timestamps, self.entity_ids)


def validate_panel(raw_matrix, timestamps: Sequence, entity_ids: Sequence[str]) -> ReturnPanel:
    values = np.asarray(raw_matrix, dtype=float)
    if values.ndim != 2:
        raise DimensionMismatch(f"expected a 2-d matrix, got shape {values.shape}")
    T, p = values.shape
    timestamps = tuple(timestamps)
    entity_ids = tuple(str(e) for e in entity_ids)
    if T == 0 or p == 0:
        raise DimensionMismatch(f"empty panel of shape {values.shape}")
    if len(timestamps) != T:
        raise DimensionMismatch(f"{T} rows but {len(timestamps)} timestamps")
    if len(entity_ids) != p:
        raise DimensionMismatch(f"{p} columns but {len(entity_ids)} entity ids")
    if not np.all(np.isfinite(values)):
        bad = np.argwhere(~np.isfinite(values))[0]
        raise NonFiniteValue(f"non-finite value at row {bad[0]}, column {entity_ids[bad[1]]!r}")
    for a, b in zip(timestamps, timestamps[1:]):
        if not a < b:
            raise NonMonotonicTimestamps(f"timestamps not strictly increasing at {a!r} -> {b!r}")
    if len(set(entity_ids)) != p:
        seen = set()
        dup = next(e for e in entity_ids if e in seen or seen.add(e))
        raise DuplicateEntityId(f"duplicate entity id {dup!r}")
    return ReturnPanel(timestamps, _frozen(values), entity_ids)


def slice_panel(panel: ReturnPanel, window: Window) -> ReturnPanel:
    if window.stop > panel.T:
        raise WindowOutOfBounds(
            f"window [{window.start_index}, {window.stop}) exceeds panel length {panel.T}"
        )
    rows = slice(window.start_index, window.stop)
    return ReturnPanel(panel.timestamps[rows], _frozen(panel.values[rows]), panel.entity_ids)


@dataclass(frozen=True, eq=False)
class MeanFit:
    coefficients: np.ndarray
    lam: float = 0.0
    standard_errors: Optional[np.ndarray] = None
    df_resid: Optional[int] = None
    intercept: float = 0.0

    def __post_init__(self):
        if self.standard_errors is not None and len(self.standard_errors) != len(self.coefficients):
            raise DimensionMismatch("coefficient and standard-error lengths differ")


@dataclass(frozen=True, eq=False)
class QuantileFit:
    coefficients: np.ndarray
    tau: float
    lam: float
    objective_value: float
    rank_deficient: bool = False
    iterations: int = 0
    intercept: float = 0.0
    # rows pinned at zero residual in the final vertex (warm-start handle)
    active_set: Optional[np.ndarray] = field(default=None, repr=False)


@dataclass(frozen=True, eq=False)
class Network:
    adjacency: np.ndarray
    entity_ids: tuple
    method: Method
    tau: Optional[float] = None
    window: Optional[Window] = None
    # directed coefficient matrix (row i = response i), diagnostics only
    coefficients: Optional[np.ndarray] = field(default=None, repr=False)
    lambdas: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        a = self.adjacency
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] != len(self.entity_ids):
            raise DimensionMismatch(f"adjacency shape {a.shape} vs {len(self.entity_ids)} ids")
        if not np.array_equal(a, a.T) or np.any(np.diag(a) != 0):
            raise ValueError("adjacency must be symmetric with zero diagonal")
        if self.method.is_quantile != (self.tau is not None):
            raise ValueError("tau must be present iff the method is quantile based")

    @property
    def p(self) -> int:
        return self.adjacency.shape[0]

    @property
    def n_edges(self) -> int:
        return int(np.triu(self.adjacency, 1).sum())

    @classmethod
    def from_directed(cls, support: np.ndarray, entity_ids, method, tau=None, window=None,
                      coefficients=None, lambdas=None) -> "Network":
        """Undirected network with edge i-j iff support[i, j] or support[j, i]."""
        s = np.asarray(support, dtype=bool).copy()
        np.fill_diagonal(s, False)
        adj = (s | s.T).astype(np.int8)
        adj.setflags(write=False)
        coef = None if coefficients is None else _frozen(coefficients)
        lams = None if lambdas is None else _frozen(lambdas)
        return cls(adj, tuple(entity_ids), Method(method), tau, window, coef, lams)


def replicate_seed(base_seed: int, replicate: int) -> int:
    """Independent, reproducible seed for replicate ``replicate`` of a run."""
    ss = np.random.SeedSequence(entropy=int(base_seed), spawn_key=(int(replicate),))
    return int(ss.generate_state(1, dtype=np.uint32)[0])
