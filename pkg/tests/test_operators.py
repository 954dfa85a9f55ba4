import numpy as np
import pytest
from hypothesis import given, strategies as st

from qcap import operators as ops

from conftest import random_hermitian, random_state, seeds

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SZ = np.diag([1.0, -1.0]).astype(complex)
KET0, KET1 = np.array([1, 0]), np.array([0, 1])


def phi_plus(d):
    v = np.eye(d).reshape(-1)
    return np.outer(v, v).astype(complex)


def test_kron_examples():
    assert np.array_equal(ops.kron(np.eye(2), np.eye(2)), np.eye(4))
    p = ops.kron(np.outer(KET0, KET0), np.outer(KET1, KET1))
    assert np.array_equal(p, np.diag([0, 1, 0, 0]))
    xx = ops.kron(SX, SX)
    assert np.allclose(xx @ xx, np.eye(4))


def test_partial_trace_examples():
    rng = np.random.default_rng(1)
    rho, sigma = random_state(2, rng), 2.5 * random_state(3, rng)
    assert np.allclose(ops.partial_trace(np.kron(rho, sigma), [2, 3], [0]), rho * 2.5)
    assert np.allclose(ops.partial_trace(phi_plus(2), [2, 2], [1]), np.eye(2))


def test_partial_trace_keeps_order_and_rejects_bad_index():
    rng = np.random.default_rng(2)
    a, b, c = (random_state(d, rng) for d in (2, 3, 2))
    x = ops.kron(a, b, c)
    assert np.allclose(ops.partial_trace(x, [2, 3, 2], [2, 0]), np.kron(a, c))
    with pytest.raises(ValueError):
        ops.partial_trace(x, [2, 3, 2], [3])
    with pytest.raises(ValueError):
        ops.partial_trace(x, [2, 3, 2], [])


def test_partial_transpose_basis_rule():
    # |01><10| -> |00><11| under transpose of the second factor
    ket = lambda i, j: np.kron(np.eye(2)[i], np.eye(2)[j])
    x = np.outer(ket(0, 1), ket(1, 0))
    assert np.array_equal(ops.partial_transpose(x, [2, 2], 1), np.outer(ket(0, 0), ket(1, 1)))
    with pytest.raises(ValueError):
        ops.partial_transpose(x, [2, 2], 2)


def test_partial_transpose_product():
    rng = np.random.default_rng(3)
    rho, sigma = random_state(2, rng), random_state(3, rng)
    out = ops.partial_transpose(np.kron(rho, sigma), [2, 3], 1)
    assert np.allclose(out, np.kron(rho, sigma.T))


@given(seeds, st.integers(2, 3), st.integers(2, 3))
def test_partial_transpose_involution_trace_hermiticity(seed, da, db):
    x = random_hermitian(da * db, np.random.default_rng(seed))
    y = ops.partial_transpose(x, [da, db], 1)
    assert np.allclose(ops.partial_transpose(y, [da, db], 1), x)
    assert np.allclose(y, y.conj().T)
    assert np.trace(y) == pytest.approx(np.trace(x))


@given(seeds, st.integers(2, 3), st.integers(2, 3))
def test_partial_trace_commutes_with_disjoint_transpose(seed, da, db):
    x = random_hermitian(da * db, np.random.default_rng(seed))
    lhs = ops.partial_trace(ops.partial_transpose(x, [da, db], 1), [da, db], [1])
    assert np.allclose(lhs, ops.partial_trace(x, [da, db], [1]).T)


@given(seeds, st.integers(1, 4), st.integers(1, 4))
def test_operator_norm_multiplicative(seed, a, b):
    rng = np.random.default_rng(seed)
    x, y = random_hermitian(a, rng), random_hermitian(b, rng)
    assert ops.operator_norm(np.kron(x, y)) == pytest.approx(ops.operator_norm(x) * ops.operator_norm(y))


@given(seeds, st.integers(1, 9))
def test_spectral_reconstruction(seed, side):
    h = random_hermitian(side, np.random.default_rng(seed))
    w, v = ops.spectral_decompose(h)
    assert np.all(np.diff(w) <= 0)
    bound = 1e-10 * (1 + ops.operator_norm(h))
    assert np.linalg.norm((v * w) @ v.conj().T - h, 2) <= bound
    assert np.allclose(v.conj().T @ v, np.eye(side), atol=1e-10)


def test_spectral_examples():
    w, v = ops.spectral_decompose(np.diag([3.0, 1.0]))
    assert np.allclose(w, [3, 1])
    assert np.allclose(np.abs(v), np.eye(2))
    assert np.allclose(ops.spectral_decompose(SX)[0], [1, -1])
    with pytest.raises(ValueError):
        ops.spectral_decompose(np.array([[0, 1], [0, 0]]))


def test_norm_examples():
    assert ops.operator_norm(np.eye(3)) == pytest.approx(1)
    assert ops.operator_norm(ops.partial_transpose(phi_plus(2), [2, 2], 1)) == pytest.approx(1)
    assert ops.operator_norm(np.diag([-5.0, 2.0])) == pytest.approx(5)
    rng = np.random.default_rng(4)
    assert ops.trace_norm(random_state(3, rng)) == pytest.approx(1)
    assert ops.trace_norm(SZ) == pytest.approx(2)
    q, _ = np.linalg.qr(rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4)))
    assert ops.trace_norm(2 * q) == pytest.approx(8)
    with pytest.raises(ValueError):
        ops.trace_norm(np.ones((2, 3)))


def test_entropy_examples():
    assert ops.von_neumann_entropy(np.outer(KET0, KET0)) == pytest.approx(0, abs=1e-12)
    assert ops.von_neumann_entropy(np.eye(3) / 3) == pytest.approx(np.log2(3))
    assert ops.von_neumann_entropy(np.diag([0.75, 0.25])) == pytest.approx(0.811278124, abs=1e-9)
    with pytest.raises(ValueError):
        ops.von_neumann_entropy(np.diag([1.1, -0.1]))
    assert ops.binary_entropy(0.5) == 1.0
    assert ops.binary_entropy(0.0) == 0.0
    assert ops.binary_entropy(0.11) == pytest.approx(0.499915958, abs=1e-9)
    with pytest.raises(ValueError):
        ops.binary_entropy(1.5)


@given(seeds, st.integers(1, 3), st.integers(1, 3))
def test_entropy_additive(seed, a, b):
    rng = np.random.default_rng(seed)
    rho, sigma = random_state(a, rng), random_state(b, rng)
    joint = ops.von_neumann_entropy(np.kron(rho, sigma))
    assert joint == pytest.approx(ops.von_neumann_entropy(rho) + ops.von_neumann_entropy(sigma), abs=1e-8)


def test_hs_inner_and_psd_examples():
    assert ops.hs_inner(np.eye(2), np.eye(2)) == 2
    assert ops.hs_inner(SX, SZ) == 0
    a = np.random.default_rng(5).normal(size=(3, 3))
    assert ops.hs_inner(a, a).real == pytest.approx(np.linalg.norm(a) ** 2)
    with pytest.raises(ValueError):
        ops.hs_inner(np.eye(2), np.eye(3))
    assert ops.is_psd(np.eye(2) / 2)
    assert not ops.is_psd(SZ)
    assert not ops.is_psd(ops.partial_transpose(phi_plus(2), [2, 2], 1))


def test_hermitian_operator_symmetrises_and_rejects():
    tiny = np.array([[1, 1e-14j], [0, 1]])
    op = ops.HermitianOperator(tiny, (2,))
    assert np.array_equal(op.matrix, op.matrix.conj().T)
    with pytest.raises(ValueError):
        ops.HermitianOperator(np.array([[1, 1e-6], [0, 1]]))
    with pytest.raises(ValueError):
        ops.HermitianOperator(np.eye(4), (2, 3))
    op = ops.HermitianOperator(np.kron(np.eye(2), np.diag([1.0, 2.0])), (2, 2))
    assert np.allclose(op.ptrace([1]).matrix, np.diag([2.0, 4.0]))
    assert op.ptrace([1]).dims == (2,)
    with pytest.raises(ValueError):
        op.matrix[0, 0] = 5
