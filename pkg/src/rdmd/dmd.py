"""Dynamic mode decomposition: deterministic, compressed, and randomized.

All three variants share one low-dimensional pipeline. Given left/right
snapshot matrices (D_L, D_R) in some d-dimensional space, the best-fit
linear propagator restricted to the dominant k left singular vectors of
D_L is

    A_tilde = U_k^T D_R V_k S_k^{-1},

whose eigenpairs give the decomposition's eigenvalues and low-dimensional
eigenvectors. The variants differ only in what plays the role of D and how
eigenvectors are lifted back to the full state space:

* deterministic: D = (X_L, X_R); modes are U_k W (projected) or
  X_R V_k S_k^{-1} W (exact).
* randomized: D = (B_L, B_R) from the QB sketch B = Q^T X; modes are
  Q B_R V S^{-1} W, near-optimal when col(Q) captures col(X).
* compressed: D = (S X_L, S X_R) for a random row-mixing/sampling S;
  modes are lifted exact-style from the uncompressed X_R.

Every result carries eigenvalues sorted by descending magnitude, modes with
unit norm and phase pinned (largest entry real positive), and amplitudes
fitted to the first snapshot, so reconstruction and cross-method
comparisons are well-defined.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import memguard
from .blocked import apply_q, blocked_randomized_qb
from .errors import (
    DegenerateData,
    EmptyInput,
    MissingAmplitudes,
    RankOutOfRange,
    ShapeMismatch,
    TooFewSnapshots,
)
from .linalg import (
    FilterSpec,
    _as_matrix,
    default_rank_tol,
    eig_dense,
    filter_factors,
    sort_eigenpairs,
    truncated_svd,
)
from .sketch import (
    SamplingOperator,
    SketchConfig,
    apply_sampling,
    gaussian_test_matrix,
    randomized_qb,
    uniform_sampling_operator,
)

METHODS = (
    "deterministic_projected",
    "deterministic_exact",
    "compressed",
    "randomized",
)


@dataclass(frozen=True)
class SnapshotSplit:
    """Time-shifted halves of a snapshot sequence: right ~ A @ left."""

    left: np.ndarray
    right: np.ndarray


@dataclass(frozen=True)
class LowDimOperator:
    """Rank-k projected propagator and the SVD factors behind it.

    right_projected = right @ V_k @ S_k^{-1} is kept because both the
    operator and the mode recovery reuse it.
    """

    operator: np.ndarray
    left_vectors: np.ndarray
    singular_values: np.ndarray
    right_vectors: np.ndarray
    inv_singular: np.ndarray
    right_projected: np.ndarray


@dataclass
class DmdConfig:
    """What to run and how.

    sketch configures the randomized variant (and supplies the seed for the
    compressed one); compress_dim/sampling configure the compressed variant;
    regularization replaces the default hard rank-k truncation with a
    smooth Tikhonov filter when set.
    """

    target_rank: int
    method: str = "deterministic_projected"
    sketch: SketchConfig | None = None
    compress_dim: int | None = None
    sampling: str = "gaussian"
    regularization: FilterSpec | None = None

    def __post_init__(self):
        if self.target_rank < 1:
            raise RankOutOfRange(f"target_rank must be >= 1, got {self.target_rank}")
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.sampling not in ("gaussian", "uniform_rows"):
            raise ValueError(f"unknown sampling kind {self.sampling!r}")

    def sketch_or_default(self) -> SketchConfig:
        if self.sketch is not None:
            return self.sketch
        return SketchConfig(target_rank=self.target_rank)


@dataclass
class DmdResult:
    """Decomposition output plus reproducibility metadata."""

    eigenvalues: np.ndarray
    modes: np.ndarray
    low_dim_eigvecs: np.ndarray
    amplitudes: np.ndarray | None
    method: str
    diagnostics: dict = field(default_factory=dict)


def split_snapshots(x) -> SnapshotSplit:
    """Split a d x (m+1) sequence into overlapping left/right d x m halves."""
    a = _as_matrix(x)
    if a.shape[1] < 2:
        raise TooFewSnapshots(
            f"need at least 2 snapshot columns, got {a.shape[1]}"
        )
    return SnapshotSplit(left=a[:, :-1], right=a[:, 1:])


def low_dim_operator(
    split: SnapshotSplit, k: int, regularization: FilterSpec | None = None
) -> LowDimOperator:
    """Projected propagator U_k^T D_R V_k S_k^{-1} from a snapshot split.

    The inverted singular values carry the regularization filter: the
    default is plain truncation at k (filter factors all one); a Tikhonov
    spec replaces 1/s_i by s_i / (s_i^2 + lambda^2). Exact zeros and values
    at numerical-rank level invert to zero.
    """
    left, right = split.left, split.right
    if left.shape != right.shape:
        raise ShapeMismatch(f"left {left.shape} != right {right.shape}")
    if not 1 <= k <= min(left.shape):
        raise RankOutOfRange(f"rank {k} outside [1, {min(left.shape)}]")
    if not np.any(left):
        raise DegenerateData("left snapshot matrix is identically zero")
    factors = truncated_svd(left, k)
    s = factors.singular_values
    tol = default_rank_tol(left.shape, s[0])
    spec = regularization if regularization is not None else FilterSpec.tsvd(k)
    f = filter_factors(s, spec)
    inv_s = np.where(s > tol, np.divide(f, s, where=s > 0), 0.0)
    right_projected = (right @ factors.v) * inv_s
    operator = factors.u.T @ right_projected
    return LowDimOperator(
        operator=operator,
        left_vectors=factors.u,
        singular_values=s,
        right_vectors=factors.v,
        inv_singular=inv_s,
        right_projected=right_projected,
    )


def _normalize_with_factors(w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Unit-norm, phase-pinned columns plus the complex factor applied to
    each (so low-dimensional stand-ins can be scaled consistently)."""
    out = np.array(w, dtype=np.complex128, copy=True)
    factors = np.ones(out.shape[1], dtype=np.complex128)
    for j in range(out.shape[1]):
        col = out[:, j]
        nrm = np.linalg.norm(col)
        if nrm == 0:
            continue
        pivot = col[np.argmax(np.abs(col))]
        scale = abs(pivot) * nrm
        # conjugate first so the pivot comes out exactly real and positive
        out[:, j] = (col * pivot.conjugate()) / scale
        factors[j] = pivot.conjugate() / scale
    return out, factors


def recover_modes(q_basis, right, v, sigma, eigvecs, inv_sigma=None) -> np.ndarray:
    """Lift low-dimensional eigenvectors to state space.

    Computes Q @ D_R @ V @ S^{-1} @ W (Q omitted when None) and returns the
    columns unit-normalized with pinned phase. ``inv_sigma`` overrides the
    default pseudoinverse treatment of S.
    """
    right = np.asarray(right)
    v = np.asarray(v)
    sigma = np.asarray(sigma, dtype=np.float64)
    eigvecs = np.asarray(eigvecs, dtype=np.complex128)
    if right.shape[1] != v.shape[0] or v.shape[1] != sigma.size:
        raise ShapeMismatch(
            f"inconsistent shapes: right {right.shape}, v {v.shape}, "
            f"sigma {sigma.shape}"
        )
    if eigvecs.shape[0] != sigma.size:
        raise ShapeMismatch(
            f"eigvecs {eigvecs.shape} incompatible with {sigma.size} singular values"
        )
    if inv_sigma is None:
        tol = default_rank_tol(right.shape, sigma[0] if sigma.size else 0.0)
        inv_sigma = np.where(sigma > tol, np.divide(1.0, sigma, where=sigma > 0), 0.0)
    lifted = ((right @ v) * inv_sigma) @ eigvecs
    if q_basis is not None:
        q_basis = np.asarray(q_basis)
        if q_basis.shape[1] != lifted.shape[0]:
            raise ShapeMismatch(
                f"basis {q_basis.shape} incompatible with lift {lifted.shape}"
            )
        lifted = q_basis @ lifted
    return _normalize_with_factors(lifted)[0]


def _fit_amplitudes(modes: np.ndarray, x0: np.ndarray) -> np.ndarray:
    return np.linalg.pinv(modes) @ x0


def amplitudes(result: DmdResult, x0) -> np.ndarray:
    """Least-squares mode amplitudes for an initial state: modes @ a ~ x0."""
    x0 = np.asarray(x0, dtype=np.complex128).ravel()
    if x0.size != result.modes.shape[0]:
        raise ShapeMismatch(
            f"x0 has {x0.size} entries, modes have {result.modes.shape[0]} rows"
        )
    return _fit_amplitudes(result.modes, x0)


def reconstruct(result: DmdResult, steps: int) -> np.ndarray:
    """Real snapshot sequence Re(modes @ diag(lambda^j) @ a), j = 0..steps-1."""
    if result.amplitudes is None:
        raise MissingAmplitudes("result carries no amplitudes")
    if steps < 1:
        raise ValueError("steps must be >= 1")
    scaled = result.amplitudes[:, None] * (
        result.eigenvalues[:, None] ** np.arange(steps)[None, :]
    )
    n = result.modes.shape[0]
    memguard.note(n * steps * 8)
    # Re(W @ P) via two real GEMMs keeps the largest buffer real-sized.
    return result.modes.real @ scaled.real - result.modes.imag @ scaled.imag


def eigen_match_error(reference, test) -> float:
    """Worst-case matched distance between two spectra.

    Both lists are sorted by the library eigenvalue order and truncated to
    the shorter length; reference values are then matched greedily in order
    of descending magnitude, each taking the nearest still-unused test
    value. Deterministic by construction.
    """
    ref = np.asarray(reference, dtype=np.complex128).ravel()
    tst = np.asarray(test, dtype=np.complex128).ravel()
    if ref.size == 0 or tst.size == 0:
        raise EmptyInput("cannot match empty spectra")
    n = min(ref.size, tst.size)
    ref = sort_eigenpairs(ref)[0][:n]
    tst = sort_eigenpairs(tst)[0][:n]
    unused = np.ones(n, dtype=bool)
    worst = 0.0
    for r in ref:
        dist = np.abs(tst - r)
        dist[~unused] = np.inf
        j = int(np.argmin(dist))
        unused[j] = False
        worst = max(worst, float(dist[j]))
    return worst


def _config_echo(cfg: DmdConfig, sketch: SketchConfig | None, blocks: int) -> dict:
    reg = cfg.regularization
    return {
        "method": cfg.method,
        "target_rank": cfg.target_rank,
        "oversampling": sketch.oversampling if sketch else None,
        "power_iters": sketch.power_iters if sketch else None,
        "sketch_size": sketch.sketch_size if sketch else None,
        "compress_dim": cfg.compress_dim,
        "sampling": cfg.sampling if cfg.method == "compressed" else None,
        "seed": sketch.seed if sketch else None,
        "blocks": blocks,
        "regularization": (
            {"kind": reg.kind, "parameter": reg.parameter} if reg else None
        ),
    }


def dmd_deterministic(x, cfg: DmdConfig) -> DmdResult:
    """Deterministic decomposition from the full snapshot sequence.

    cfg.method picks the mode formula: "deterministic_projected" lifts with
    the left singular vectors, "deterministic_exact" with the right
    snapshots.
    """
    a = _as_matrix(x)
    split = split_snapshots(a)
    k = cfg.target_rank
    if k > min(split.left.shape):
        raise RankOutOfRange(
            f"rank {k} exceeds min{split.left.shape} of the snapshot split"
        )
    timings = {}
    t0 = time.perf_counter()
    op = low_dim_operator(split, k, cfg.regularization)
    timings["svd"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    pairs = eig_dense(op.operator)
    timings["eig"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    if cfg.method == "deterministic_exact":
        raw = op.right_projected @ pairs.eigenvectors
    else:
        raw = op.left_vectors @ pairs.eigenvectors
    modes, _ = _normalize_with_factors(raw)
    timings["modes"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    amp = _fit_amplitudes(modes, a[:, 0])
    timings["amplitudes"] = time.perf_counter() - t0

    return DmdResult(
        eigenvalues=pairs.eigenvalues,
        modes=modes,
        low_dim_eigvecs=pairs.eigenvectors,
        amplitudes=amp,
        method=cfg.method,
        diagnostics={"timings": timings, "config": _config_echo(cfg, None, 1)},
    )


def _sketched_pipeline(
    b_matrix: np.ndarray,
    lift,
    cfg: DmdConfig,
    sketch: SketchConfig,
    blocks: int,
    timings: dict,
) -> DmdResult:
    """Shared tail of the randomized variants: low-dimensional DMD of the
    sketch B plus mode recovery through the sketch basis.

    `lift` maps an l x k matrix to the n x k state-space lift Q @ M; the
    blocked and in-memory paths supply different implementations but share
    everything else, so a single-block run is bit-identical to the
    unblocked one.
    """
    split = split_snapshots(b_matrix)
    k = cfg.target_rank
    t0 = time.perf_counter()
    op = low_dim_operator(split, k, cfg.regularization)
    timings["svd"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    pairs = eig_dense(op.operator)
    timings["eig"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    lift_small = op.right_projected @ pairs.eigenvectors
    modes, factors = _normalize_with_factors(lift(lift_small))
    timings["modes"] = time.perf_counter() - t0

    # Amplitudes in the sketched basis: with Q orthonormal, the least-squares
    # fit against x0 equals the fit of (Q^T W) against Q^T x0 = B[:, 0];
    # this avoids another pass over the state dimension.
    t0 = time.perf_counter()
    amp = _fit_amplitudes(lift_small * factors, b_matrix[:, 0])
    timings["amplitudes"] = time.perf_counter() - t0

    return DmdResult(
        eigenvalues=pairs.eigenvalues,
        modes=modes,
        low_dim_eigvecs=pairs.eigenvectors,
        amplitudes=amp,
        method="randomized",
        diagnostics={"timings": timings, "config": _config_echo(cfg, sketch, blocks)},
    )


def dmd_randomized(x, cfg: DmdConfig) -> DmdResult:
    """Randomized decomposition: QB sketch, low-dimensional DMD, recovery."""
    a = _as_matrix(x)
    if a.shape[1] < 2:
        raise TooFewSnapshots(f"need at least 2 snapshot columns, got {a.shape[1]}")
    sketch = cfg.sketch_or_default()
    if sketch.target_rank != cfg.target_rank:
        raise RankOutOfRange(
            f"sketch target_rank {sketch.target_rank} != config rank {cfg.target_rank}"
        )
    if sketch.sketch_size > min(a.shape[0], a.shape[1] - 1):
        raise RankOutOfRange(
            f"sketch size {sketch.sketch_size} exceeds "
            f"min(n, snapshots-1) = {min(a.shape[0], a.shape[1] - 1)}"
        )
    timings = {}
    t0 = time.perf_counter()
    qb = randomized_qb(a, sketch)
    timings["sketch"] = time.perf_counter() - t0
    return _sketched_pipeline(qb.b, lambda m: qb.q @ m, cfg, sketch, 1, timings)


def dmd_randomized_blocked(source, cfg: DmdConfig) -> DmdResult:
    """Randomized decomposition over a row-block source (out-of-core path).

    Consumes the source through the blocked QB; mode recovery streams
    through the per-block bases, so no n x m buffer is ever materialized.
    """
    sketch = cfg.sketch_or_default()
    if sketch.target_rank != cfg.target_rank:
        raise RankOutOfRange(
            f"sketch target_rank {sketch.target_rank} != config rank {cfg.target_rank}"
        )
    timings = {}
    t0 = time.perf_counter()
    blocked = blocked_randomized_qb(source, sketch)
    timings["sketch"] = time.perf_counter() - t0
    result = _sketched_pipeline(
        blocked.b,
        lambda m: apply_q(blocked, m),
        cfg,
        sketch,
        blocked.block_count,
        timings,
    )
    result.diagnostics["blocked"] = True
    return result


def dmd_compressed(x, cfg: DmdConfig, operator=None) -> DmdResult:
    """Compressed decomposition: DMD of S @ X for a random l x n mixer S.

    S is a Gaussian test matrix or a rescaled uniform row sampler per
    cfg.sampling; pass `operator` (a SamplingOperator or explicit matrix) to
    pin it, e.g. the identity sampler for an exactness check. Modes are
    lifted from the uncompressed right snapshots.
    """
    a = _as_matrix(x)
    split = split_snapshots(a)
    n = a.shape[0]
    k = cfg.target_rank
    sketch = cfg.sketch_or_default()
    timings = {}

    t0 = time.perf_counter()
    if operator is None:
        l = cfg.compress_dim if cfg.compress_dim is not None else min(n, 10 * k)
        if l < k:
            raise RankOutOfRange(f"compress_dim {l} below target rank {k}")
        if cfg.sampling == "uniform_rows":
            if l > n:
                raise RankOutOfRange(
                    f"uniform row sampling needs compress_dim <= {n}, got {l}"
                )
            operator = uniform_sampling_operator(n, l, sketch.seed)
        else:
            operator = gaussian_test_matrix(l, n, sketch.seed)
    if isinstance(operator, SamplingOperator):
        compressed = apply_sampling(operator, a)
    else:
        operator = np.asarray(operator, dtype=np.float64)
        if operator.shape[1] != n:
            raise ShapeMismatch(
                f"compression operator has {operator.shape[1]} columns, data has {n} rows"
            )
        compressed = operator @ a
    timings["compress"] = time.perf_counter() - t0

    csplit = split_snapshots(compressed)
    if k > min(csplit.left.shape):
        raise RankOutOfRange(f"rank {k} exceeds min{csplit.left.shape} of the sketch")
    t0 = time.perf_counter()
    op = low_dim_operator(csplit, k, cfg.regularization)
    timings["svd"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    pairs = eig_dense(op.operator)
    timings["eig"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    raw = (split.right @ op.right_vectors * op.inv_singular) @ pairs.eigenvectors
    modes, _ = _normalize_with_factors(raw)
    timings["modes"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    amp = _fit_amplitudes(modes, a[:, 0])
    timings["amplitudes"] = time.perf_counter() - t0

    cfg_echo = _config_echo(cfg, sketch, 1)
    cfg_echo["compress_dim"] = int(compressed.shape[0])
    return DmdResult(
        eigenvalues=pairs.eigenvalues,
        modes=modes,
        low_dim_eigvecs=pairs.eigenvectors,
        amplitudes=amp,
        method="compressed",
        diagnostics={"timings": timings, "config": cfg_echo},
    )


def run_dmd(x, cfg: DmdConfig) -> DmdResult:
    """Dispatch an in-memory snapshot sequence to the configured method."""
    if cfg.method in ("deterministic_projected", "deterministic_exact"):
        return dmd_deterministic(x, cfg)
    if cfg.method == "randomized":
        return dmd_randomized(x, cfg)
    return dmd_compressed(x, cfg)
