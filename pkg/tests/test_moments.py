import numpy as np
import pytest

from ddccanet import (
    ConfigError,
    ExecSettings,
    Executor,
    MomentAccumulator,
    ShapeError,
    accumulate_batch,
    finalize,
    merge,
    pairwise_merge,
    parallel_accumulate,
)


def rel_fro(a, b):
    denom = max(np.linalg.norm(b), 1e-300)
    return np.linalg.norm(a - b) / denom


def fill(acc, x, y, labels, batches=1):
    """Accumulate columns in `batches` contiguous column slices."""
    cols = x.shape[1]
    edges = np.linspace(0, cols, batches + 1, dtype=int)
    for lo, hi in zip(edges[:-1], edges[1:]):
        if hi > lo:
            accumulate_batch(acc, x[:, lo:hi], y[:, lo:hi], labels[lo:hi])
    return acc


def random_problem(rng, dim=6, cols=40, classes=3):
    x = rng.standard_normal((dim, cols))
    y = rng.standard_normal((dim, cols))
    labels = rng.integers(0, classes, size=cols)
    return x, y, labels


def test_single_batch_equals_monolithic_gram():
    rng = np.random.default_rng(0)
    x, y, labels = random_problem(rng)
    acc = fill(MomentAccumulator.zeros(6, 3), x, y, labels)
    assert np.allclose(acc.c11, x @ x.T)
    assert np.allclose(acc.c22, y @ y.T)


def test_two_batch_gram_matches_direct_product():
    # oracle: X @ X.T computed directly
    x = np.array([[1.0, 0.0, 2.0, 1.0], [0.0, 1.0, 1.0, 3.0]])
    expected = x @ x.T
    assert expected.tolist() == [[6.0, 5.0], [5.0, 11.0]]
    acc = MomentAccumulator.zeros(2, 1)
    labels = np.zeros(4, dtype=int)
    fill(acc, x, x, labels, batches=2)
    assert np.allclose(acc.c11, expected)


def test_zero_batch_only_updates_counts():
    acc = MomentAccumulator.zeros(3, 2)
    accumulate_batch(acc, np.zeros((3, 5)), np.zeros((3, 5)), np.zeros(5, dtype=int))
    assert acc.patch_count == 5
    assert acc.per_class_patch_count.tolist() == [5, 0]
    assert not acc.c11.any() and not acc.global_sum1.any()


def test_accumulate_shape_errors():
    acc = MomentAccumulator.zeros(3, 2)
    with pytest.raises(ShapeError):
        accumulate_batch(acc, np.zeros((4, 5)), np.zeros((4, 5)), np.zeros(5, dtype=int))
    with pytest.raises(ShapeError):
        accumulate_batch(acc, np.zeros((3, 5)), np.zeros((3, 4)), np.zeros(5, dtype=int))
    with pytest.raises(ShapeError):
        accumulate_batch(acc, np.zeros((3, 5)), np.zeros((3, 5)), np.zeros(4, dtype=int))


def test_merge_identity_element():
    rng = np.random.default_rng(1)
    x, y, labels = random_problem(rng)
    acc = fill(MomentAccumulator.zeros(6, 3), x, y, labels)
    merged = merge(acc, MomentAccumulator.zeros(6, 3))
    assert np.array_equal(merged.c11, acc.c11)
    assert np.array_equal(merged.class_sum2, acc.class_sum2)
    assert merged.patch_count == acc.patch_count


def test_merge_commutes_bitwise():
    rng = np.random.default_rng(2)
    xa, ya, la = random_problem(rng)
    xb, yb, lb = random_problem(rng)
    a = fill(MomentAccumulator.zeros(6, 3), xa, ya, la)
    b = fill(MomentAccumulator.zeros(6, 3), xb, yb, lb)
    ab, ba = merge(a, b), merge(b, a)
    assert np.array_equal(ab.c11, ba.c11)
    assert np.array_equal(ab.global_sum1, ba.global_sum1)


def test_merge_shape_mismatch():
    with pytest.raises(ShapeError):
        merge(MomentAccumulator.zeros(3, 2), MomentAccumulator.zeros(4, 2))
    with pytest.raises(ShapeError):
        merge(MomentAccumulator.zeros(3, 2), MomentAccumulator.zeros(3, 3))


def test_tree_merge_close_to_sequential():
    rng = np.random.default_rng(3)
    x, y, labels = random_problem(rng, dim=8, cols=64, classes=4)
    sequential = fill(MomentAccumulator.zeros(8, 4), x, y, labels, batches=1)
    singles = []
    for k in range(16):
        sl = slice(4 * k, 4 * k + 4)
        singles.append(fill(MomentAccumulator.zeros(8, 4), x[:, sl], y[:, sl], labels[sl]))
    treed = pairwise_merge(singles)
    assert rel_fro(treed.c11, sequential.c11) <= 1e-12
    assert rel_fro(treed.class_sum1, sequential.class_sum1) <= 1e-12
    assert treed.patch_count == sequential.patch_count


def test_partition_invariance():
    rng = np.random.default_rng(4)
    x, y, labels = random_problem(rng, dim=10, cols=600, classes=4)
    mono = finalize(fill(MomentAccumulator.zeros(10, 4), x, y, labels), epsilon=0.0)
    for k in (2, 7, 64):
        parts = finalize(fill(MomentAccumulator.zeros(10, 4), x, y, labels, batches=k), epsilon=0.0)
        assert rel_fro(parts.c11, mono.c11) <= 1e-10
        assert rel_fro(parts.c22, mono.c22) <= 1e-10
        assert rel_fro(parts.cw, mono.cw) <= 1e-10


def test_finalize_single_class_between_is_zero():
    rng = np.random.default_rng(5)
    x, y = rng.standard_normal((4, 30)), rng.standard_normal((4, 30))
    acc = fill(MomentAccumulator.zeros(4, 1), x, y, np.zeros(30, dtype=int))
    dm = finalize(acc, epsilon=0.0)
    assert np.allclose(dm.cb, 0.0, atol=1e-9 * np.linalg.norm(dm.cw))
    assert np.allclose(dm.ctilde, dm.cw)


def test_finalize_two_class_expansion():
    # oracle: expand (sum all x)(sum all y)^T by class membership
    rng = np.random.default_rng(6)
    x, y = rng.standard_normal((5, 40)), rng.standard_normal((5, 40))
    labels = np.array([0] * 25 + [1] * 15)
    acc = fill(MomentAccumulator.zeros(5, 2), x, y, labels)
    dm = finalize(acc, epsilon=0.0)
    s1a, s1b = x[:, :25].sum(axis=1), x[:, 25:].sum(axis=1)
    s2a, s2b = y[:, :25].sum(axis=1), y[:, 25:].sum(axis=1)
    assert np.allclose(dm.cw, np.outer(s1a, s2a) + np.outer(s1b, s2b))
    assert np.allclose(dm.cb, np.outer(s1a, s2b) + np.outer(s1b, s2a))


def test_finalize_within_plus_between_is_global_outer():
    rng = np.random.default_rng(7)
    x, y, labels = random_problem(rng, dim=6, cols=80, classes=5)
    acc = fill(MomentAccumulator.zeros(6, 5), x, y, labels)
    dm = finalize(acc, epsilon=0.0)
    outer = np.outer(acc.global_sum1, acc.global_sum2)
    assert rel_fro(dm.cw + dm.cb, outer) <= 1e-10


def test_within_class_matches_brute_force_double_loop():
    rng = np.random.default_rng(8)
    for _ in range(5):
        dim, cols, classes = 4, int(rng.integers(10, 50)), int(rng.integers(1, 5))
        x, y = rng.standard_normal((dim, cols)), rng.standard_normal((dim, cols))
        labels = rng.integers(0, classes, size=cols)
        labels[:classes] = np.arange(classes)  # every class occupied
        acc = fill(MomentAccumulator.zeros(dim, classes), x, y, labels)
        dm = finalize(acc, epsilon=0.0)
        brute = np.zeros((dim, dim))
        for c in range(classes):
            for i in np.flatnonzero(labels == c):
                for j in np.flatnonzero(labels == c):
                    brute += np.outer(x[:, i], y[:, j])
        assert rel_fro(dm.cw, brute) <= 1e-12


def test_finalize_ridge():
    rng = np.random.default_rng(9)
    x, y, labels = random_problem(rng)
    acc = fill(MomentAccumulator.zeros(6, 3), x, y, labels)
    plain = finalize(acc, epsilon=0.0)
    ridged = finalize(acc, epsilon=1e-2)
    sym = 0.5 * (acc.c11 + acc.c11.T)
    assert np.array_equal(plain.c11, sym)  # epsilon=0 leaves it unchanged
    expected = sym + 1e-2 * np.trace(sym) / 6 * np.eye(6)
    assert np.allclose(ridged.c11, expected)
    with pytest.raises(ConfigError):
        finalize(acc, epsilon=-1.0)


def test_gram_is_psd_and_ridge_makes_it_pd():
    rng = np.random.default_rng(10)
    x, y, labels = random_problem(rng, dim=8, cols=100, classes=2)
    acc = fill(MomentAccumulator.zeros(8, 2), x, y, labels)
    before = np.linalg.eigvalsh(0.5 * (acc.c11 + acc.c11.T))
    assert before.min() >= -1e-10 * np.abs(before).max()
    after = np.linalg.eigvalsh(finalize(acc, epsilon=1e-4).c11)
    assert after.min() > 0


def test_symmetry_invariant_of_accumulated_grams():
    rng = np.random.default_rng(11)
    x, y, labels = random_problem(rng, dim=12, cols=500, classes=3)
    acc = fill(MomentAccumulator.zeros(12, 3), x, y, labels, batches=7)
    for c in (acc.c11, acc.c22):
        assert np.linalg.norm(c - c.T) <= 1e-12 * np.linalg.norm(c)


def test_parallel_accumulate_deterministic_any_worker_count():
    rng = np.random.default_rng(12)
    x, y, labels = random_problem(rng, dim=6, cols=96, classes=3)

    def jobs():
        out = []
        for k in range(12):
            sl = slice(8 * k, 8 * k + 8)
            out.append(
                lambda sl=sl: fill(
                    MomentAccumulator.zeros(6, 3), x[:, sl], y[:, sl], labels[sl]
                )
            )
        return out

    results = []
    for threads in (1, 2, 5):
        with Executor(ExecSettings(threads=threads, deterministic=True)) as ex:
            results.append(parallel_accumulate(jobs(), ex))
    for acc in results[1:]:
        assert np.array_equal(acc.c11, results[0].c11)
        assert np.array_equal(acc.c22, results[0].c22)
        assert np.array_equal(acc.class_sum1, results[0].class_sum1)


def test_parallel_accumulate_fast_mode_within_tolerance():
    rng = np.random.default_rng(13)
    x, y, labels = random_problem(rng, dim=6, cols=96, classes=3)
    jobs = []
    for k in range(12):
        sl = slice(8 * k, 8 * k + 8)
        jobs.append(
            lambda sl=sl: fill(MomentAccumulator.zeros(6, 3), x[:, sl], y[:, sl], labels[sl])
        )
    with Executor(ExecSettings(threads=4, deterministic=False)) as ex:
        fast = parallel_accumulate(jobs, ex)
    mono = fill(MomentAccumulator.zeros(6, 3), x, y, labels)
    assert rel_fro(fast.c11, mono.c11) <= 1e-10
