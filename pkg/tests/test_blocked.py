import numpy as np
import pytest

from rdmd import (
    ArrayRowBlockSource,
    SketchConfig,
    apply_q,
    assemble_q,
    blocked_randomized_qb,
    partition_rows,
    randomized_qb,
)
from rdmd import memguard
from rdmd.errors import InvalidBlockCount, RankOutOfRange
from rdmd.rng import normal_matrix

from conftest import matrix_with_spectrum


class CountingSource:
    """Wraps a row-block source and counts reads per block."""

    def __init__(self, inner):
        self.inner = inner
        self.reads = [0] * inner.block_count

    def __getattr__(self, name):
        return getattr(self.inner, name)

    def read_block(self, i):
        self.reads[i] += 1
        return self.inner.read_block(i)


class TestPartitionRows:
    def test_single_block(self):
        assert partition_rows(10, 1) == [(0, 10)]

    def test_balanced_remainder(self):
        assert partition_rows(10, 4) == [(0, 3), (3, 3), (6, 2), (8, 2)]

    def test_single_row_blocks(self):
        assert partition_rows(7, 7) == [(i, 1) for i in range(7)]

    def test_cover_and_order(self):
        for n, b in [(17, 3), (100, 8), (5, 5)]:
            ranges = partition_rows(n, b)
            assert ranges[0][0] == 0
            assert sum(c for _, c in ranges) == n
            for (s0, c0), (s1, _) in zip(ranges, ranges[1:]):
                assert s1 == s0 + c0
            counts = [c for _, c in ranges]
            assert max(counts) - min(counts) <= 1

    @pytest.mark.parametrize("b", [0, 11])
    def test_invalid_count(self, b):
        with pytest.raises(InvalidBlockCount):
            partition_rows(10, b)


class TestBlockedQb:
    def test_single_block_bit_identical_to_unblocked(self):
        x = normal_matrix(40, 20, seed=1)
        cfg = SketchConfig(4, 4, 2, seed=77)
        blocked = blocked_randomized_qb(ArrayRowBlockSource(x, 1), cfg)
        plain = randomized_qb(x, cfg)
        assert np.array_equal(blocked.b, plain.b)
        assert np.array_equal(assemble_q(blocked), plain.q)

    def test_low_rank_capture(self):
        x = normal_matrix(200, 3, seed=2) @ normal_matrix(3, 40, seed=3)
        cfg = SketchConfig(3, 5, 1, seed=4)
        blocked = blocked_randomized_qb(ArrayRowBlockSource(x, 4), cfg)
        q = assemble_q(blocked)
        rel = np.linalg.norm(x - q @ blocked.b) / np.linalg.norm(x)
        assert rel <= 1e-8

    @pytest.mark.parametrize("b", [2, 4, 8])
    def test_assembled_orthonormality(self, b):
        x = normal_matrix(64, 20, seed=5)
        cfg = SketchConfig(4, 4, 1, seed=6)
        q = assemble_q(blocked_randomized_qb(ArrayRowBlockSource(x, b), cfg))
        l = cfg.sketch_size
        assert np.linalg.norm(q.T @ q - np.eye(l)) <= 1e-10 * np.sqrt(l)

    def test_block_rows_depend_only_on_own_block(self):
        x = normal_matrix(30, 12, seed=7)
        cfg = SketchConfig(3, 2, 0, seed=8)
        result = blocked_randomized_qb(ArrayRowBlockSource(x, 3), cfg)
        q = assemble_q(result)
        zeroed = type(result)(
            block_bases=[
                b if i == 1 else np.zeros_like(b)
                for i, b in enumerate(result.block_bases)
            ],
            merge_basis=result.merge_basis,
            b=result.b,
            block_ranges=result.block_ranges,
        )
        q_zeroed = assemble_q(zeroed)
        start, count = result.block_ranges[1]
        assert np.array_equal(q[start : start + count], q_zeroed[start : start + count])

    def test_streaming_apply_matches_assembled(self):
        x = normal_matrix(50, 14, seed=9)
        cfg = SketchConfig(3, 3, 1, seed=10)
        result = blocked_randomized_qb(ArrayRowBlockSource(x, 5), cfg)
        q = assemble_q(result)
        resid_dense = np.linalg.norm(x - q @ result.b)
        resid_stream = np.linalg.norm(x - apply_q(result, result.b))
        assert abs(resid_dense - resid_stream) <= 1e-12

    def test_thin_block_is_hard_error(self):
        x = normal_matrix(12, 10, seed=11)
        cfg = SketchConfig(4, 4, 0, seed=12)  # l = 8 > 12/4 rows per block
        with pytest.raises(RankOutOfRange):
            blocked_randomized_qb(ArrayRowBlockSource(x, 4), cfg)

    def test_one_read_per_block(self):
        x = normal_matrix(48, 16, seed=13)
        for q_iters in (0, 2):
            src = CountingSource(ArrayRowBlockSource(x, 4))
            blocked_randomized_qb(src, SketchConfig(3, 3, q_iters, seed=14))
            # blocks are held in memory during their own QB, so the per-block
            # stage reads each exactly once regardless of power iterations
            assert src.reads == [1, 1, 1, 1]

    def test_accuracy_parity_with_unblocked(self):
        x = matrix_with_spectrum(256, 128, 2.0 ** -np.arange(1, 129), seed=15)
        norm = np.linalg.norm
        for b in (2, 4, 8):
            blocked_errs, plain_errs = [], []
            for seed in range(20):
                cfg = SketchConfig(5, 5, 1, seed=3000 + seed)
                res = blocked_randomized_qb(ArrayRowBlockSource(x, b), cfg)
                blocked_errs.append(norm(x - apply_q(res, res.b)))
                qb = randomized_qb(x, cfg)
                plain_errs.append(norm(x - qb.q @ qb.b))
            assert np.mean(blocked_errs) <= 1.5 * np.mean(plain_errs)

    def test_exact_rank_capture(self):
        x = normal_matrix(120, 4, seed=16) @ normal_matrix(4, 30, seed=17)
        cfg = SketchConfig(4, 6, 1, seed=18)
        res = blocked_randomized_qb(ArrayRowBlockSource(x, 6), cfg)
        rel = np.linalg.norm(x - apply_q(res, res.b)) / np.linalg.norm(x)
        assert rel <= 1e-8

    def test_determinism(self):
        x = normal_matrix(40, 18, seed=19)
        cfg = SketchConfig(4, 2, 1, seed=20)
        a = blocked_randomized_qb(ArrayRowBlockSource(x, 4), cfg)
        b = blocked_randomized_qb(ArrayRowBlockSource(x, 4), cfg)
        assert np.array_equal(a.b, b.b)
        assert all(np.array_equal(p, q) for p, q in zip(a.block_bases, b.block_bases))


def test_memory_contract_tracked_allocations(tmp_path):
    from rdmd import open_row_blocks, write_sms

    n, m, b = 512, 1024, 8
    x = normal_matrix(n, m, seed=21)
    path = tmp_path / "big.sms"
    write_sms(x, path)
    cfg = SketchConfig(5, 3, 1, seed=22)  # l = 8
    l = cfg.sketch_size
    block_bytes = (n // b) * m * 8
    k_bytes = b * l * m * 8
    src = open_row_blocks(path, b)
    with memguard.session() as guard:
        res = blocked_randomized_qb(src, cfg)
    src.close()
    assert guard.largest_bytes <= max(block_bytes, k_bytes)
    assert res.b.shape == (l, m)
