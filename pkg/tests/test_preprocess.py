import numpy as np
import pytest

from csi_supcon.preprocess import autocorrelate, pack, preprocess, preprocess_batch, unpack

from oracles import matmul_hermitian_loops, pack_literal


def rand_h(rng, B=4, N=6):
    return rng.standard_normal((B, N)) + 1j * rng.standard_normal((B, N))


def test_single_column_rank_one():
    h = np.array([[1 + 1j], [2 - 1j], [0.5j]])
    C = autocorrelate(h)
    np.testing.assert_allclose(C, h @ h.conj().T)
    assert np.linalg.matrix_rank(C) == 1


def test_autocorrelation_hermitian():
    rng = np.random.default_rng(0)
    for _ in range(20):
        C = autocorrelate(rand_h(rng))
        np.testing.assert_allclose(C, C.conj().T, rtol=0, atol=1e-13)


def test_autocorrelation_small_integer_oracle():
    H = np.array([[1 + 2j, -1, 3j], [2, 1 - 1j, -2 + 1j]])
    np.testing.assert_array_equal(autocorrelate(H), matmul_hermitian_loops(H.tolist()))


def test_autocorrelate_rejects_non_finite():
    with pytest.raises(ValueError):
        autocorrelate(np.array([[np.nan, 1.0]]))


def test_pack_identity():
    out = pack(np.eye(2))
    np.testing.assert_allclose(out.R_matrix, np.eye(2) / np.sqrt(2))
    assert out.norm_factor == pytest.approx(np.sqrt(2))


def test_pack_matches_literal_oracle():
    rng = np.random.default_rng(1)
    A = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    C = A + A.conj().T
    out = pack(C)
    np.testing.assert_allclose(out.R_matrix, pack_literal(C), rtol=1e-14, atol=1e-15)
    np.testing.assert_allclose(np.diag(out.R_matrix), np.diag(C).real / np.linalg.norm(C))


def test_pack_rejects_zero_and_non_hermitian():
    with pytest.raises(ValueError):
        pack(np.zeros((2, 2)))
    with pytest.raises(ValueError):
        pack(np.array([[1, 2], [0, 1]]))


def test_preprocess_bounded_and_deterministic():
    rng = np.random.default_rng(2)
    H = rand_h(rng, 8, 16)
    a, b = preprocess(H), preprocess(H)
    assert np.array_equal(a.R_matrix, b.R_matrix)
    assert np.all(np.abs(a.R_matrix) <= 1.0)


def test_phase_and_scale_invariance():
    rng = np.random.default_rng(3)
    H = rand_h(rng, 6, 10)
    phases = np.exp(1j * rng.uniform(0, 2 * np.pi, 10))
    ref = preprocess(H).R_matrix
    np.testing.assert_allclose(preprocess(H * phases[None, :]).R_matrix, ref, rtol=0, atol=1e-14)
    np.testing.assert_allclose(preprocess(3.7 * H).R_matrix, ref, rtol=0, atol=1e-14)


def test_round_trip_reconstructs_c():
    rng = np.random.default_rng(4)
    H = rand_h(rng, 5, 7)
    out = preprocess(H)
    np.testing.assert_allclose(unpack(out.R_matrix, out.norm_factor), autocorrelate(H), rtol=1e-12, atol=1e-12)


def test_batch_matches_single():
    rng = np.random.default_rng(5)
    stack = np.stack([rand_h(rng, 4, 6) for _ in range(5)])
    batch = preprocess_batch(stack)
    for i in range(5):
        np.testing.assert_allclose(batch[i], preprocess(stack[i]).R_matrix, rtol=1e-14, atol=1e-16)
    with pytest.raises(ValueError):
        preprocess_batch(np.zeros((2, 3, 3)))
