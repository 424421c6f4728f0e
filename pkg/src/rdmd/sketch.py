"""Randomized range finding.

The central routine is `randomized_qb`: sample the range of X with a seeded
Gaussian test matrix, optionally sharpen the spectrum with stabilized power
iterations, orthonormalize, and project. The factorization X ~ Q B (Q with
l = k + p orthonormal columns, B = Q^T X) is what every downstream consumer
works with. Also here: the expected-error bound for the Gaussian sketch and
the sparse row-sampling operator used by the compressed decomposition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import memguard
from .errors import (
    InvalidDistribution,
    InvalidOversampling,
    RankOutOfRange,
    ShapeMismatch,
)
from .linalg import _as_matrix, thin_qr_q
from .rng import normal_matrix, uniforms


@dataclass(frozen=True)
class SketchConfig:
    """Parameters of the randomized range finder.

    target_rank is the rank the downstream decomposition keeps; the sketch
    itself carries sketch_size = target_rank + oversampling columns, and the
    surplus is only discarded at the downstream truncated SVD.
    Defaults: oversampling 10, power_iters 2.
    """

    target_rank: int
    oversampling: int = 10
    power_iters: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.target_rank < 1:
            raise RankOutOfRange(f"target_rank must be >= 1, got {self.target_rank}")
        if self.oversampling < 0:
            raise InvalidOversampling(
                f"oversampling must be >= 0, got {self.oversampling}"
            )
        if self.power_iters < 0:
            raise ValueError(f"power_iters must be >= 0, got {self.power_iters}")

    @property
    def sketch_size(self) -> int:
        return self.target_rank + self.oversampling


@dataclass(frozen=True)
class QBFactorization:
    """x ~ q @ b with q (n x l) orthonormal and b = q.T @ x (l x m)."""

    q: np.ndarray
    b: np.ndarray


@dataclass(frozen=True)
class SamplingOperator:
    """Row sampler with unbiasedness rescaling.

    Applying it picks rows `indices` and multiplies row j by
    scale_factors[j] = 1 / sqrt(sample_count * p_{indices[j]}), so that
    (S X)^T (S X) is an unbiased estimator of X^T X.
    """

    source_dim: int
    sample_count: int
    indices: np.ndarray
    scale_factors: np.ndarray


def gaussian_test_matrix(rows: int, cols: int, seed: int) -> np.ndarray:
    """Seeded i.i.d. standard-normal matrix; same seed, same matrix."""
    if rows < 1 or cols < 1:
        raise ShapeMismatch(f"test matrix needs positive dims, got {rows}x{cols}")
    memguard.note(rows * cols * 8)
    return normal_matrix(rows, cols, seed)


def randomized_qb(x, cfg: SketchConfig) -> QBFactorization:
    """Randomized QB factorization with oversampling and power iterations.

    Draws an m x l Gaussian test matrix (l = k + p), forms Y = X Omega, runs
    cfg.power_iters stabilized power iterations (each re-orthonormalizes Y,
    orthonormalizes X^T Q, and resamples Y = X Z; the naive (X X^T)^q X
    product is numerically unstable), then orthonormalizes once more and
    projects B = Q^T X. The final orthonormalization always runs, so the
    returned Q satisfies the orthonormality contract unconditionally.
    """
    a = _as_matrix(x)
    n, m = a.shape
    l = cfg.sketch_size
    if l > min(n, m):
        raise RankOutOfRange(
            f"sketch size {l} (k={cfg.target_rank} + p={cfg.oversampling}) "
            f"exceeds min{a.shape} = {min(n, m)}"
        )
    omega = gaussian_test_matrix(m, l, cfg.seed)
    memguard.note(n * l * 8)
    y = a @ omega
    for _ in range(cfg.power_iters):
        q = thin_qr_q(y)
        z = thin_qr_q(a.T @ q)
        y = a @ z
    q = thin_qr_q(y)
    memguard.note(l * m * 8)
    b = q.T @ a
    return QBFactorization(q=q, b=b)


def expected_error_bound(
    k: int, p: int, q: int, m: int, n: int, sigma_next: float
) -> float:
    """Expected Frobenius error of the rank-(k+p) Gaussian sketch.

    E || X - Q Q^T X ||_F <=
        [1 + sqrt(k/(p-1)) + e*sqrt(k+p)/p * sqrt(min(m,n)-k)]^(1/(2q+1))
        * sigma_{k+1},
    valid for oversampling p >= 2.
    """
    if p < 2:
        raise InvalidOversampling(f"the bound requires oversampling >= 2, got {p}")
    if sigma_next < 0:
        raise ValueError("sigma_next must be nonnegative")
    l = k + p
    bracket = 1.0 + math.sqrt(k / (p - 1.0)) + (
        math.e * math.sqrt(l) / p
    ) * math.sqrt(min(m, n) - k)
    return bracket ** (1.0 / (2.0 * q + 1.0)) * sigma_next


def row_sampling_operator(
    n: int, sample_count: int, probabilities, seed: int
) -> SamplingOperator:
    """Draw `sample_count` row indices i.i.d. with replacement from the given
    distribution and attach the 1/sqrt(l * p_i) rescaling per draw."""
    if sample_count < 1:
        raise InvalidDistribution(f"sample_count must be >= 1, got {sample_count}")
    p = np.asarray(probabilities, dtype=np.float64)
    if p.ndim != 1 or p.size != n:
        raise InvalidDistribution(f"need {n} probabilities, got shape {p.shape}")
    if np.any(p < 0):
        raise InvalidDistribution("probabilities must be nonnegative")
    total = p.sum()
    if abs(total - 1.0) > 1e-12:
        raise InvalidDistribution(f"probabilities sum to {total!r}, not 1")
    cdf = np.cumsum(p)
    cdf[-1] = 1.0
    u = uniforms(seed, 0, sample_count)
    indices = np.searchsorted(cdf, u, side="left").astype(np.int64)
    scales = 1.0 / np.sqrt(sample_count * p[indices])
    return SamplingOperator(
        source_dim=n,
        sample_count=sample_count,
        indices=indices,
        scale_factors=scales,
    )


def uniform_sampling_operator(n: int, sample_count: int, seed: int) -> SamplingOperator:
    """Row sampler with uniform probabilities 1/n (every scale sqrt(n/l))."""
    return row_sampling_operator(n, sample_count, np.full(n, 1.0 / n), seed)


def identity_sampling_operator(n: int) -> SamplingOperator:
    """Every row once, in order, unit scales: applying it is the identity."""
    return SamplingOperator(
        source_dim=n,
        sample_count=n,
        indices=np.arange(n, dtype=np.int64),
        scale_factors=np.ones(n),
    )


def apply_sampling(op: SamplingOperator, x) -> np.ndarray:
    """Gather and rescale the sampled rows; the sparse operator is never
    materialized as a dense matrix."""
    a = _as_matrix(x)
    if a.shape[0] != op.source_dim:
        raise ShapeMismatch(
            f"operator expects {op.source_dim} rows, matrix has {a.shape[0]}"
        )
    return a[op.indices] * op.scale_factors[:, None]
