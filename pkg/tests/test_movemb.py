import numpy as np
import pytest

from glimssm.movemb import MoveEmbeddingConfig, encode_deltas, encode_move


CFG = MoveEmbeddingConfig(d_move_emb=512)


def test_initial_step_is_zero_vector():
    m0 = encode_move(None, CFG)
    assert m0.shape == (512,)
    assert not m0.any()


def test_zero_delta_non_initial_pattern():
    m = encode_move((0, 0), CFG, dtype=np.float64)
    np.testing.assert_array_equal(m[0::2], np.zeros(256))
    np.testing.assert_array_equal(m[1::2], np.ones(256))


def test_sign_parity():
    for d in [(5, -17), (1, 1), (-40, 3)]:
        m_pos = encode_move(d, CFG, dtype=np.float64)
        m_neg = encode_move((-d[0], -d[1]), CFG, dtype=np.float64)
        np.testing.assert_array_equal(m_pos[0::2], -m_neg[0::2])  # sin odd
        np.testing.assert_array_equal(m_pos[1::2], m_neg[1::2])   # cos even


def test_formula_matches_definition():
    cfg = MoveEmbeddingConfig(d_move_emb=8)  # d_axis=4, pairs i in {0, 1}
    m = encode_move((3, -2), cfg, dtype=np.float64)
    base = 10000.0
    want = []
    for d in (3.0, -2.0):
        for i in range(2):
            want.append(np.sin(d / base ** (2 * i / 4)))
            want.append(np.cos(d / base ** (2 * i / 4)))
    # interleave per axis: [sin0, cos0, sin1, cos1] per axis
    np.testing.assert_allclose(m, want, rtol=1e-15)


def test_bounded_by_one():
    rng = np.random.default_rng(0)
    for _ in range(50):
        d = tuple(rng.integers(-500, 500, 2))
        assert np.max(np.abs(encode_move(d, CFG))) <= 1.0


def test_translation_invariance_of_delta_sequence():
    # shifting absolute coordinates leaves deltas, hence embeddings, identical
    rng = np.random.default_rng(1)
    coords = rng.integers(0, 100, size=(20, 2))
    for shift in [(7, -3), (100, 250)]:
        shifted = coords + np.array(shift)
        deltas = [None] + [tuple(coords[i] - coords[i - 1])
                           for i in range(1, len(coords))]
        deltas_s = [None] + [tuple(shifted[i] - shifted[i - 1])
                             for i in range(1, len(shifted))]
        a = encode_deltas(deltas, CFG)
        b = encode_deltas(deltas_s, CFG)
        assert (a == b).all()


def test_injective_on_small_delta_range():
    cfg = MoveEmbeddingConfig(d_move_emb=32)
    rows = [encode_move((dx, dy), cfg, dtype=np.float64)
            for dx in range(-64, 65) for dy in range(-64, 65)]
    mat = np.stack(rows)
    assert len(np.unique(mat, axis=0)) == len(rows)


def test_invalid_width_rejected():
    with pytest.raises(ValueError):
        MoveEmbeddingConfig(d_move_emb=10)
