"""Forward model y = A x + q(x) with per-cell and per-edge Gaussian noise."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from tdmr.lattice import GridTopology, interference_matrix


@dataclass(frozen=True)
class ChannelParams:
    alpha: float
    beta: float
    sigma_s: float
    sigma_j: float

    def __post_init__(self):
        if self.sigma_s < 0 or self.sigma_j < 0:
            raise ValueError(
                f"noise deviations must be non-negative (sigma_s={self.sigma_s}, "
                f"sigma_j={self.sigma_j})"
            )

    @classmethod
    def two_cell(cls, sigma_s: float, sigma_j: float) -> "ChannelParams":
        """Gains of the two-bit-cell model, A = [[3, 1], [1, 3]] / 2."""
        return cls(alpha=1.5, beta=0.5, sigma_s=sigma_s, sigma_j=sigma_j)


def check_pattern(x, n: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != n:
        raise ValueError(f"pattern length {x.shape[-1]} does not match n={n}")
    if not np.all(np.abs(x) == 1.0):
        raise ValueError("pattern entries must be exactly +1 or -1")
    return x


def all_patterns(n: int) -> np.ndarray:
    """All 2**n bipolar patterns, shape (2**n, n).

    Row k is the binary expansion of k (MSB first) with 0 -> +1 and 1 -> -1,
    so row 0 is all +1 and the negation of row k is row ``2**n - 1 - k``.
    """
    k = np.arange(2**n)[:, None]
    bits = (k >> np.arange(n - 1, -1, -1)) & 1
    return 1.0 - 2.0 * bits


def pattern_bits(x) -> str:
    """Render a pattern as a string of ``+``/``-``."""
    return "".join("+" if v > 0 else "-" for v in np.asarray(x))


def parse_bits(s: str) -> np.ndarray:
    if not s or set(s) - {"+", "-"}:
        raise ValueError(f"pattern string must consist of '+' and '-', got {s!r}")
    return np.array([1.0 if ch == "+" else -1.0 for ch in s])


def checkerboard(topology: GridTopology) -> np.ndarray:
    r, c = np.divmod(np.arange(topology.n), topology.cols)
    return np.where((r + c) % 2 == 0, 1.0, -1.0)


def covariance_matrix(topology: GridTopology, params: ChannelParams, x) -> np.ndarray:
    """Noise covariance S(x); ``x`` may be a single pattern or a (batch, n) stack.

    Every edge whose endpoints disagree adds ``4 sigma_j**2`` to both diagonal
    entries and to the off-diagonal pair, on top of ``sigma_s**2`` on the
    diagonal.
    """
    x = check_pattern(x, topology.n)
    n = topology.n
    s = np.zeros(x.shape[:-1] + (n, n))
    vj = params.sigma_j**2
    for i, j in topology.edges:
        w = (x[..., i] - x[..., j]) ** 2 * vj
        s[..., i, i] += w
        s[..., j, j] += w
        s[..., i, j] = w
        s[..., j, i] = w
    idx = np.arange(n)
    s[..., idx, idx] += params.sigma_s**2
    return s


def readback_from_noise(topology: GridTopology, params: ChannelParams, x, z_cell, z_edge):
    """Deterministic part of the sampler: combine given noise draws.

    ``z_cell`` has shape (..., n) and already carries the sigma_s scale;
    ``z_edge`` has shape (..., n_edges) and carries sigma_j. The jitter draw of
    edge (i, j) enters both y_i and y_j.
    """
    x = check_pattern(x, topology.n)
    a = interference_matrix(topology, params.alpha, params.beta)
    y = x @ a.T + z_cell
    if topology.n_edges:
        e = np.array(topology.edges)
        active = np.abs(x[..., e[:, 0]] - x[..., e[:, 1]])
        y = y + (active * z_edge) @ topology.incidence()
    return y


def sample_readback(rng: np.random.Generator, topology: GridTopology, params: ChannelParams, x):
    """Draw y for pattern(s) ``x`` of shape (n,) or (batch, n)."""
    x = check_pattern(x, topology.n)
    batch = x.shape[:-1]
    z_cell = params.sigma_s * rng.standard_normal(batch + (topology.n,))
    z_edge = params.sigma_j * rng.standard_normal(batch + (topology.n_edges,))
    return readback_from_noise(topology, params, x, z_cell, z_edge)
