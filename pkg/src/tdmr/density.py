"""Conditional and mixture log-densities of the readback vector.

Everything here is in natural log; conversion to bits happens in
:mod:`tdmr.infotheory`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from tdmr.channel import ChannelParams, all_patterns, covariance_matrix
from tdmr.lattice import MAX_CELLS, GridTopology, interference_matrix

LOG_2PI = np.log(2.0 * np.pi)

# Upper bound on elements in one (patterns, points, n) residual block.
_BLOCK_ELEMENTS = 1 << 22


class NotPositiveDefiniteError(ValueError):
    pass


@dataclass(frozen=True)
class FactoredCovariance:
    pattern: np.ndarray | None
    lower: np.ndarray
    log_det: float


@dataclass(frozen=True)
class PatternEntry:
    index: int
    pattern: np.ndarray
    mean: np.ndarray
    factor: FactoredCovariance


@dataclass(frozen=True)
class PatternTable:
    """All 2**n patterns with their means A x and Cholesky factors of S(x).

    Row order is that of :func:`tdmr.channel.all_patterns`, so ``x`` and
    ``-x`` sit at ranks ``k`` and ``2**n - 1 - k``.
    """

    topology: GridTopology
    params: ChannelParams
    patterns: np.ndarray  # (P, n)
    means: np.ndarray  # (P, n)
    lowers: np.ndarray  # (P, n, n)
    log_dets: np.ndarray  # (P,)

    @property
    def n(self) -> int:
        return self.topology.n

    def __len__(self) -> int:
        return len(self.patterns)

    def __getitem__(self, k: int) -> PatternEntry:
        return PatternEntry(
            index=k,
            pattern=self.patterns[k],
            mean=self.means[k],
            factor=FactoredCovariance(self.patterns[k], self.lowers[k], float(self.log_dets[k])),
        )

    def index_of(self, x) -> int:
        bits = (np.asarray(x) < 0).astype(int)
        return int(bits @ (1 << np.arange(self.n - 1, -1, -1)))


def _cholesky(s: np.ndarray) -> np.ndarray:
    try:
        lower = np.linalg.cholesky(s)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(
            "covariance is not positive definite (sigma_s must be > 0)"
        ) from exc
    if not np.all(np.isfinite(lower)):
        raise NotPositiveDefiniteError("covariance factorization produced non-finite values")
    return lower


def _log_det(lower: np.ndarray) -> np.ndarray:
    return 2.0 * np.log(np.diagonal(lower, axis1=-2, axis2=-1)).sum(axis=-1)


def factor_covariance(s, pattern=None) -> FactoredCovariance:
    s = np.asarray(s, dtype=float)
    if not np.array_equal(s, s.T):
        raise ValueError("covariance must be symmetric")
    lower = _cholesky(s)
    return FactoredCovariance(pattern, lower, float(_log_det(lower)))


def build_pattern_table(topology: GridTopology, params: ChannelParams) -> PatternTable:
    if topology.n > MAX_CELLS:
        raise ValueError(f"n={topology.n} exceeds exhaustive limit {MAX_CELLS}")
    if params.sigma_s <= 0:
        raise NotPositiveDefiniteError("density evaluation requires sigma_s > 0")
    patterns = all_patterns(topology.n)
    a = interference_matrix(topology, params.alpha, params.beta)
    lowers = _cholesky(covariance_matrix(topology, params, patterns))
    table = PatternTable(
        topology=topology,
        params=params,
        patterns=patterns,
        means=patterns @ a.T,
        lowers=lowers,
        log_dets=_log_det(lowers),
    )
    for arr in (table.patterns, table.means, table.lowers, table.log_dets):
        arr.flags.writeable = False
    return table


def whiten(lower: np.ndarray, r: np.ndarray) -> np.ndarray:
    """Solve ``lower @ z = r`` by forward substitution.

    ``lower`` has shape (..., n, n) broadcastable against ``r`` of shape
    (..., n). Negating ``r`` negates the result bit for bit.
    """
    n = r.shape[-1]
    z = np.empty(np.broadcast_shapes(lower.shape[:-1], r.shape))
    for k in range(n):
        acc = r[..., k]
        if k:
            acc = acc - (lower[..., k, :k] * z[..., :k]).sum(axis=-1)
        z[..., k] = acc / lower[..., k, k]
    return z


def mahalanobis(y, entry: PatternEntry) -> np.ndarray:
    """(y - A x)^T S(x)^{-1} (y - A x) via the triangular factor."""
    y = np.asarray(y, dtype=float)
    z = whiten(entry.factor.lower, y - entry.mean)
    return (z * z).sum(axis=-1)


def log_conditional_density(y, entry: PatternEntry):
    """ln P(y | x) for one table row; ``y`` may be (n,) or (batch, n)."""
    y = np.asarray(y, dtype=float)
    n = y.shape[-1]
    return -0.5 * (n * LOG_2PI + entry.factor.log_det + mahalanobis(y, entry))


def _block_size(table: PatternTable, n_points: int) -> int:
    return max(1, _BLOCK_ELEMENTS // max(1, n_points * table.n))


def all_mahalanobis(y, table: PatternTable) -> np.ndarray:
    """Mahalanobis distances of ``y`` (batch, n) to every pattern, shape (batch, P)."""
    y = np.atleast_2d(np.asarray(y, dtype=float))
    out = np.empty((y.shape[0], len(table)))
    step = _block_size(table, y.shape[0])
    for lo in range(0, len(table), step):
        hi = min(lo + step, len(table))
        r = y[None, :, :] - table.means[lo:hi, None, :]
        z = whiten(table.lowers[lo:hi, None], r)
        out[:, lo:hi] = (z * z).sum(axis=-1).T
    return out


def all_log_conditional(y, table: PatternTable) -> np.ndarray:
    """ln P(y | x) for every pattern, shape (batch, P)."""
    m = all_mahalanobis(y, table)
    return -0.5 * (table.n * LOG_2PI + table.log_dets[None, :] + m)


def mixture_log_density(y, table: PatternTable):
    """ln P_Y(y) for the equiprobable mixture; scalar for a single ``y``.

    Patterns are reduced block by block with log-sum-exp so memory stays
    bounded for large tables.
    """
    y = np.asarray(y, dtype=float)
    single = y.ndim == 1
    y2 = np.atleast_2d(y)
    step = _block_size(table, y2.shape[0])
    partial = []
    for lo in range(0, len(table), step):
        hi = min(lo + step, len(table))
        r = y2[None, :, :] - table.means[lo:hi, None, :]
        z = whiten(table.lowers[lo:hi, None], r)
        logp = -0.5 * (table.n * LOG_2PI + table.log_dets[lo:hi, None] + (z * z).sum(axis=-1))
        partial.append(logsumexp(logp, axis=0))
    out = logsumexp(np.stack(partial, axis=1), axis=1) - table.n * np.log(2.0)
    return float(out[0]) if single else out
