"""Symmetric mutual information: exact H(Y|X), Monte Carlo H(Y), quadrature.

All outputs are in bits.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from tdmr.channel import ChannelParams, sample_readback
from tdmr.density import PatternTable, build_pattern_table, mixture_log_density
from tdmr.lattice import GridTopology

LN2 = math.log(2.0)

# Trials per independent random stream. Fixed so results do not depend on
# the number of workers.
TRIAL_CHUNK = 1024

SWEEP_HEADER = [
    "sigma_s",
    "sigma_j",
    "mi_bits",
    "mi_rate",
    "h_y_bits",
    "h_ygx_bits",
    "stderr_bits",
    "t_max",
    "seed",
]


class QuadratureNotConverged(RuntimeError):
    pass


@dataclass(frozen=True)
class MIEstimate:
    h_y_bits: float
    h_y_given_x_bits: float
    std_error_bits: float
    t_max: int
    seed: int
    value_bits: float = field(init=False)

    def __post_init__(self):
        if self.t_max < 1:
            raise ValueError("t_max must be >= 1")
        object.__setattr__(self, "value_bits", self.h_y_bits - self.h_y_given_x_bits)


@dataclass(frozen=True)
class QuadratureSpec:
    lower: tuple[float, ...]
    upper: tuple[float, ...]
    step: float
    rule: str = "simpson"

    def __post_init__(self):
        if self.rule not in ("simpson", "trapezoid"):
            raise ValueError(f"unknown quadrature rule {self.rule!r}")
        if not self.step > 0:
            raise ValueError("step must be positive")
        if len(self.lower) != len(self.upper):
            raise ValueError("lower and upper bounds differ in dimension")
        for lo, hi in zip(self.lower, self.upper):
            k = (hi - lo) / self.step
            if not hi > lo or abs(k - round(k)) > 1e-9 * max(1.0, k):
                raise ValueError(f"({hi} - {lo}) / {self.step} is not a whole number of steps")

    def intervals(self, axis: int) -> int:
        return int(round((self.upper[axis] - self.lower[axis]) / self.step))

    def halved(self) -> "QuadratureSpec":
        return QuadratureSpec(self.lower, self.upper, self.step / 2, self.rule)


def check_seed(seed: int) -> int:
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return seed


def derive_seed(seed: int, index: int) -> int:
    """Child seed for item ``index`` of a run keyed by ``seed``."""
    ss = np.random.SeedSequence(check_seed(seed), spawn_key=(index,))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def chunk_rng(seed: int, chunk: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(chunk,)))


def conditional_entropy(table: PatternTable) -> float:
    """H(Y|X) in bits: average Gaussian entropy over all 2**n patterns."""
    n = table.n
    nats = 0.5 * (n * math.log(2 * math.pi * math.e) + table.log_dets)
    return float(nats.mean() / LN2)


def _trial_block(table: PatternTable, seed: int, chunk: int, count: int) -> np.ndarray:
    """-log2 P_Y(y) for ``count`` trials drawn from stream ``chunk``."""
    rng = chunk_rng(seed, chunk)
    n = table.n
    x = 1.0 - 2.0 * rng.integers(0, 2, size=(count, n))
    y = sample_readback(rng, table.topology, table.params, x)
    return -mixture_log_density(y, table) / LN2


def mc_samples(table: PatternTable, t_max: int, seed: int, threads: int = 1) -> np.ndarray:
    """Per-trial -log2 P_Y(y) values, in trial order."""
    t_max = int(t_max)
    if t_max < 1:
        raise ValueError("t_max must be >= 1")
    seed = check_seed(seed)
    n_chunks = -(-t_max // TRIAL_CHUNK)
    sizes = [min(TRIAL_CHUNK, t_max - c * TRIAL_CHUNK) for c in range(n_chunks)]

    def work(c):
        return _trial_block(table, seed, c, sizes[c])

    if threads > 1 and n_chunks > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            blocks = list(pool.map(work, range(n_chunks)))
    else:
        blocks = [work(c) for c in range(n_chunks)]
    return np.concatenate(blocks)


def mc_symmetric_mi(
    topology: GridTopology,
    params: ChannelParams,
    t_max: int,
    seed: int,
    threads: int = 1,
    table: PatternTable | None = None,
) -> MIEstimate:
    """Monte Carlo estimate of I_S = H(Y) - H(Y|X).

    H(Y|X) is exact; H(Y) is the sample mean of -log2 P_Y(y) with x uniform
    and y drawn through the channel, P_Y being summed over every pattern.
    """
    if params.sigma_s <= 0:
        raise ValueError("Monte Carlo estimation requires sigma_s > 0")
    if table is None:
        table = build_pattern_table(topology, params)
    h_ygx = conditional_entropy(table)
    vals = mc_samples(table, t_max, seed, threads)
    theta = float(vals.sum() / t_max)
    se = float(vals.std(ddof=1) / math.sqrt(t_max)) if t_max > 1 else float("nan")
    return MIEstimate(
        h_y_bits=theta, h_y_given_x_bits=h_ygx, std_error_bits=se, t_max=int(t_max), seed=int(seed)
    )


def default_quadrature_spec(table: PatternTable, rule: str = "simpson") -> QuadratureSpec:
    """Window of +-8 s around the extreme means, s = sqrt(sigma_s^2 + 8 sigma_j^2).

    The starting step is a quarter of the smallest principal standard
    deviation over all patterns, rounded down to an even number of intervals.
    """
    if table.n > 2:
        raise ValueError(f"quadrature supports n <= 2, got n={table.n}")
    p = table.params
    s = math.sqrt(p.sigma_s**2 + 8 * p.sigma_j**2)
    lo = float(table.means.min()) - 8 * s
    hi = float(table.means.max()) + 8 * s
    cov = table.lowers @ np.swapaxes(table.lowers, -1, -2)
    min_sd = math.sqrt(float(np.linalg.eigvalsh(cov).min()))
    n_int = math.ceil((hi - lo) / (min_sd / 4))
    n_int += n_int % 2
    step = (hi - lo) / n_int
    # recompute hi so (hi - lo) / step is whole to rounding
    hi = lo + n_int * step
    return QuadratureSpec((lo,) * table.n, (hi,) * table.n, step, rule)


def _axes(spec: QuadratureSpec) -> list[np.ndarray]:
    return [
        np.linspace(spec.lower[d], spec.upper[d], spec.intervals(d) + 1)
        for d in range(len(spec.lower))
    ]


def _integrate(values: np.ndarray, axes: list[np.ndarray], rule: str) -> float:
    fn = integrate.simpson if rule == "simpson" else integrate.trapezoid
    out = values
    for ax in reversed(axes):
        out = fn(out, x=ax, axis=-1)
    return float(out)


def quad_mixture(table: PatternTable, spec: QuadratureSpec) -> tuple[float, float]:
    """(H(Y) in bits, total mass of P_Y) over the truncated window."""
    if table.n > 2:
        raise ValueError(f"quadrature supports n <= 2, got n={table.n}")
    if len(spec.lower) != table.n:
        raise ValueError("quadrature spec dimension does not match the table")
    axes = _axes(spec)
    grids = np.meshgrid(*axes, indexing="ij")
    pts = np.column_stack([g.ravel() for g in grids])
    logp = mixture_log_density(pts, table).reshape(grids[0].shape)
    p = np.exp(logp)
    h_y = _integrate(-p * logp / LN2, axes, spec.rule)
    mass = _integrate(p, axes, spec.rule)
    return h_y, mass


def quad_symmetric_mi(
    table: PatternTable,
    spec: QuadratureSpec | None = None,
    tol: float = 1e-3,
    max_halvings: int = 6,
) -> float:
    """I_S by deterministic quadrature of H(Y), for n <= 2.

    The step is halved until two successive results agree within ``tol``
    bits; with an explicit ``spec`` the check is between ``spec.step`` and
    ``spec.step / 2`` unless more halvings are allowed.
    """
    if table.n > 2:
        raise ValueError(f"quadrature supports n <= 2, got n={table.n}")
    if spec is None:
        spec = default_quadrature_spec(table)
    h_ygx = conditional_entropy(table)
    prev = quad_mixture(table, spec)[0]
    for _ in range(max_halvings):
        spec = spec.halved()
        cur = quad_mixture(table, spec)[0]
        if abs(cur - prev) < tol:
            return cur - h_ygx
        prev = cur
    raise QuadratureNotConverged(
        f"quadrature did not settle within {tol} bits after {max_halvings} halvings"
    )


def sweep(
    topology: GridTopology,
    alpha: float,
    beta: float,
    sigma_s,
    sigma_j,
    t_max: int,
    seed: int,
    threads: int = 1,
) -> list[tuple[float, float, MIEstimate]]:
    """One estimate per (sigma_j, sigma_s) pair; sigma_j is the outer loop.

    Pair ``k`` runs with seed ``derive_seed(seed, k)``.
    """
    rows = []
    k = 0
    for sj in sigma_j:
        for ss in sigma_s:
            params = ChannelParams(alpha, beta, float(ss), float(sj))
            est = mc_symmetric_mi(topology, params, t_max, derive_seed(seed, k), threads)
            rows.append((float(ss), float(sj), est))
            k += 1
    return rows


def fmt(v: float) -> str:
    return f"{v:.17g}"


def write_sweep_csv(rows, n: int, f) -> None:
    w = csv.writer(f, lineterminator="\n")
    w.writerow(SWEEP_HEADER)
    for ss, sj, est in rows:
        w.writerow(
            [
                fmt(ss),
                fmt(sj),
                fmt(est.value_bits),
                fmt(est.value_bits / n),
                fmt(est.h_y_bits),
                fmt(est.h_y_given_x_bits),
                fmt(est.std_error_bits),
                est.t_max,
                est.seed,
            ]
        )
