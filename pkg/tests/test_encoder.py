import math

import numpy as np
import pytest

from ddccanet import (
    ConfigError,
    EncoderConfig,
    ShapeError,
    binarize,
    encode_sample,
    encode_view,
    feature_length,
    hash_combine,
    iq_block_features,
)


def naive_encode_view(maps, n_bits, cfg):
    """Scalar-level reimplementation of hashing pooling + IQ block features."""
    n_maps, p, q = maps.shape
    step_h = max(1, int(round((1.0 - cfg.overlap) * cfg.block_h)))
    step_w = max(1, int(round((1.0 - cfg.overlap) * cfg.block_w)))
    feats = []
    for g in range(n_maps // n_bits):
        code = np.zeros((p, q), dtype=int)
        for l in range(n_bits):
            plane = maps[g * n_bits + l]
            for i in range(p):
                for j in range(q):
                    if plane[i, j] > 0:
                        code[i, j] += 2**l
        for bi in range(0, p - cfg.block_h + 1, step_h):
            for bj in range(0, q - cfg.block_w + 1, step_w):
                counts = [0] * (2**n_bits)
                for i in range(bi, bi + cfg.block_h):
                    for j in range(bj, bj + cfg.block_w):
                        counts[code[i, j]] += 1
                total = cfg.block_h * cfg.block_w
                for t in range(2**n_bits):
                    if counts[t] > 0:
                        feats.append(-math.log(counts[t] / total))
                    elif cfg.zero_bin_policy == "zero":
                        feats.append(0.0)
                    else:
                        feats.append(math.log(2 * total))
    return np.array(feats)


def test_binarize_cases():
    out = binarize(np.array([[2.5, 0.0, -1.3]]))
    assert out.tolist() == [[1, 0, 0]]


def test_binarize_all_negative():
    assert not binarize(-np.random.default_rng(0).uniform(size=(4, 4))).any()


def test_binarize_idempotent_on_bits():
    bits = np.array([[1, 0], [0, 1]])
    assert np.array_equal(binarize(bits), bits)


def test_hash_combine_all_ones_eight_bits():
    assert np.all(hash_combine(np.ones((8, 3, 3), dtype=int)) == 255)


def test_hash_combine_all_zero():
    assert not hash_combine(np.zeros((4, 2, 2), dtype=int)).any()


def test_hash_combine_positional_weights():
    bits = np.zeros((8, 1, 1), dtype=int)
    bits[0] = 1  # l=1 contributes 2^0
    bits[2] = 1  # l=3 contributes 2^2
    assert hash_combine(bits)[0, 0] == 5


def test_hash_combine_validations():
    with pytest.raises(ConfigError):
        hash_combine(np.zeros((31, 2, 2), dtype=int))
    with pytest.raises(ShapeError):
        hash_combine(np.zeros((4, 2), dtype=int))


def test_iq_constant_block_is_all_zero():
    cfg = EncoderConfig(block_h=4, block_w=4)
    q_map = np.full((4, 4), 7, dtype=int)
    seg = iq_block_features(q_map, cfg, n_bits=3)
    assert seg.shape == (8,)
    assert not seg.any()  # p=1 in bin 7 gives -log 1 = 0; others policy zero


def test_iq_even_split_gives_log_two():
    cfg = EncoderConfig(block_h=2, block_w=2)
    q_map = np.array([[0, 0], [3, 3]])
    seg = iq_block_features(q_map, cfg, n_bits=2)
    assert seg[0] == pytest.approx(math.log(2.0))
    assert seg[3] == pytest.approx(math.log(2.0))
    assert seg[1] == seg[2] == 0.0


def test_iq_floor_policy_value():
    cfg = EncoderConfig(block_h=2, block_w=2, zero_bin_policy="floor")
    q_map = np.zeros((2, 2), dtype=int)
    seg = iq_block_features(q_map, cfg, n_bits=1)
    assert seg[0] == 0.0
    assert seg[1] == pytest.approx(math.log(8.0))  # -log(1/(2*4))


def test_iq_block_too_large():
    cfg = EncoderConfig(block_h=5, block_w=5)
    with pytest.raises(ShapeError):
        iq_block_features(np.zeros((4, 4), dtype=int), cfg, n_bits=1)


def test_iq_histograms_sum_to_block_pixels():
    rng = np.random.default_rng(1)
    q_map = rng.integers(0, 16, size=(8, 8))
    cfg = EncoderConfig(block_h=4, block_w=4)
    for i, j in cfg.block_starts(8, 8):
        block = q_map[i : i + 4, j : j + 4]
        assert np.bincount(block.ravel(), minlength=16).sum() == 16


def test_encode_view_matches_naive_reimplementation():
    rng = np.random.default_rng(2)
    for policy in ("zero", "floor"):
        cfg = EncoderConfig(block_h=4, block_w=4, zero_bin_policy=policy)
        maps = rng.standard_normal((8, 8, 8))
        got = encode_view(maps, n_bits=4, cfg=cfg)
        assert np.array_equal(got, naive_encode_view(maps, 4, cfg))


def test_encode_view_with_overlap_matches_naive():
    rng = np.random.default_rng(3)
    cfg = EncoderConfig(block_h=4, block_w=4, overlap=0.5)
    maps = rng.standard_normal((4, 10, 10))
    assert np.array_equal(encode_view(maps, 2, cfg), naive_encode_view(maps, 2, cfg))


def test_encode_sample_length_law_l8_a4():
    rng = np.random.default_rng(4)
    cfg = EncoderConfig(block_h=8, block_w=8)
    maps1 = rng.standard_normal((64, 16, 16))  # 8 groups of 8
    maps2 = rng.standard_normal((64, 16, 16))
    assert cfg.block_count(16, 16) == 4
    fv = encode_sample(maps1, maps2, n_bits=8, cfg=cfg)
    assert fv.values.shape == (16384,)  # 2 * 2^8 * 8 * 4
    assert fv.view_boundary == 8192
    assert feature_length((16, 16), 64, 8, cfg) == 16384


def test_encode_sample_minimal_configuration():
    cfg = EncoderConfig(block_h=3, block_w=3)
    maps = np.random.default_rng(5).standard_normal((1, 3, 3))
    fv = encode_sample(maps, maps, n_bits=1, cfg=cfg)
    assert fv.values.shape == (4,)  # 2 views * 2^1 * 1 group * 1 block


def test_encode_sample_identical_views():
    rng = np.random.default_rng(6)
    cfg = EncoderConfig(block_h=4, block_w=4)
    maps = rng.standard_normal((4, 8, 8))
    fv = encode_sample(maps, maps.copy(), n_bits=4, cfg=cfg)
    assert np.array_equal(fv.view1, fv.view2)


def test_encode_view_grouping_mismatch():
    cfg = EncoderConfig(block_h=2, block_w=2)
    with pytest.raises(ShapeError):
        encode_view(np.zeros((5, 4, 4)), n_bits=2, cfg=cfg)


def test_iq_features_nonnegative_and_bounded():
    rng = np.random.default_rng(7)
    cfg = EncoderConfig(block_h=4, block_w=4)
    q_map = rng.integers(0, 8, size=(12, 12))
    seg = iq_block_features(q_map, cfg, n_bits=3)
    assert seg.min() >= 0.0
    assert seg.max() <= math.log(16.0) + 1e-12  # -log(1/block_pixels)
