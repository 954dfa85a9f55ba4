import itertools

import numpy as np
import pytest
from hypothesis import given, settings

from qcap import bounds as B
from qcap import channels as C
from qcap import operators as ops
from qcap import oracles as O

from conftest import SEED, seeds

NS, PPT = B.CodeClass.NS, B.CodeClass.NS_PPT
TOL = 1e-8


def bsc(p):
    return np.array([[1 - p, p], [p, 1 - p]])


def message_diag(m):
    d = np.zeros((m * m, m * m))
    for k in range(m):
        d[k * m + k, k * m + k] = 1.0
    return d


def test_full_code_examples():
    assert O.full_code_success_prob(C.identity(2), 2) == pytest.approx(1, abs=1e-6)
    assert O.full_code_success_prob(C.cq_two_state(1.0), 2) == pytest.approx(0.5, abs=1e-6)


@pytest.mark.parametrize("k", range(3))
@pytest.mark.parametrize("ppt", [True, False])
def test_full_code_matches_reduced_program(k, ppt):
    ch = C.random_channel(2, 2, 2, SEED + 500 + k)
    want = B.success_prob(ch, 2, PPT if ppt else NS).value_linear
    assert O.full_code_success_prob(ch, 2, ppt) == pytest.approx(want, abs=1e-5)


@pytest.fixture(scope="module")
def solved_code():
    ch = C.random_channel(2, 2, 2, SEED + 17)
    value, z = O.full_code_solve(ch, 2, True)
    return ch, value, np.asarray(z.matrix if hasattr(z, "matrix") else z)


def test_code_satisfies_all_constraint_families(solved_code):
    ch, _, z = solved_code
    m, da, db = 2, ch.d_in, ch.d_out
    dims = [m, da, db, m]
    # CP and PPT
    assert np.linalg.eigvalsh(z).min() >= -TOL
    assert np.linalg.eigvalsh(ops.partial_transpose(z, dims, [2, 3])).min() >= -TOL
    # TP: tr_{A_o B_o} Z = 1
    assert np.abs(ops.partial_trace(z, dims, [0, 2]) - np.eye(m * db)).max() <= TOL
    # A does not signal to B
    z_ib = ops.partial_trace(z, dims, [0, 2, 3])
    want = np.kron(np.eye(m) / m, ops.partial_trace(z, dims, [2, 3]))
    assert np.abs(z_ib - want).max() <= TOL
    # B does not signal to A
    z_ia = ops.partial_trace(z, dims, [0, 1, 2])
    want = np.kron(ops.partial_trace(z, dims, [0, 1]), np.eye(db) / db)
    assert np.abs(z_ia - want).max() <= TOL


def test_compose_choi_is_a_channel_reproducing_the_value(solved_code):
    ch, value, z = solved_code
    jm = O.compose_choi(ch, z)
    assert jm.shape == (4, 4)
    assert np.linalg.eigvalsh(jm).min() >= -TOL
    assert np.abs(ops.partial_trace(jm, [2, 2], [0]) - np.eye(2)).max() <= TOL
    assert np.trace(jm @ message_diag(2)).real / 2 == pytest.approx(value, abs=1e-7)


def test_compose_choi_identity_code():
    # with m = d the code that wires message to channel input and channel output
    # to message back is the channel itself
    ch = C.random_channel(2, 2, 2, SEED + 3)
    d = 2
    phi = np.zeros((d * d, d * d))
    for i, j in itertools.product(range(d), repeat=2):
        phi[i * d + i, j * d + j] = 1.0
    # Z = Phi_{A_i A_o} (x) Phi_{B_i B_o}
    z = np.kron(phi, phi)
    assert np.allclose(O.compose_choi(ch, z), ch.choi.matrix, atol=1e-12)


def test_compose_choi_rejects_bad_shape():
    with pytest.raises(ValueError):
        O.compose_choi(C.identity(2), np.eye(10), m=2)


def test_full_code_size_guard():
    with pytest.raises(ValueError):
        O.full_code_success_prob(C.identity(2), 5)
    with pytest.raises(ValueError):
        O.full_code_success_prob(C.identity(2), 0)


def test_brute_force_examples():
    assert O.brute_force_classical_success(np.eye(2), 2) == pytest.approx(1)
    assert O.brute_force_classical_success(bsc(0.1), 2) == pytest.approx(0.9)
    assert O.brute_force_classical_success(np.tile([0.3, 0.7], (2, 1)), 2) == pytest.approx(0.5)


@given(seeds)
@settings(max_examples=15)
def test_brute_force_below_assisted_values(seed):
    rng = np.random.default_rng(seed)
    nx, ny, m = rng.integers(2, 5), rng.integers(2, 5), int(rng.integers(1, 4))
    p = C.random_stochastic(int(nx), int(ny), seed)
    ch = C.classical_channel(p)
    brute = O.brute_force_classical_success(p, m)
    ppt = B.success_prob(ch, m, PPT).value_linear
    ns = B.success_prob(ch, m, NS).value_linear
    assert brute <= ppt + 1e-7
    assert ppt <= ns + 1e-7


def test_brute_force_size_guard():
    with pytest.raises(ValueError):
        O.brute_force_classical_success(np.eye(5), 2)
    with pytest.raises(ValueError):
        O.brute_force_classical_success(np.eye(2), 4)


@pytest.mark.parametrize("k", [1, 2, 5, 12])
def test_independent_set_noiseless(k):
    assert O.zero_error_independent_set(np.eye(k)) == k


def test_independent_set_complete_confusability():
    assert O.zero_error_independent_set(np.full((4, 3), 1 / 3)) == 1


def test_independent_set_pentagon():
    p = C.pentagon_channel()
    assert O.zero_error_independent_set(p) == 2
    assert O.confusability_graph(p).number_of_edges() == 5
    m0 = B.zero_error_m0(C.classical_channel(p), NS).value_linear
    assert m0 == pytest.approx(2.5, abs=1e-6)


@given(seeds)
@settings(max_examples=15)
def test_independent_set_below_m0(seed):
    rng = np.random.default_rng(seed)
    # sparse supports give nontrivial confusability graphs
    p = rng.random((4, 4)) * (rng.random((4, 4)) < 0.4)
    p[np.arange(4), rng.integers(0, 4, 4)] += 0.5
    p /= p.sum(axis=1, keepdims=True)
    m0 = B.zero_error_m0(C.classical_channel(p), NS).value_linear
    assert O.zero_error_independent_set(p) <= m0 + 1e-6


def test_independent_set_size_guard():
    with pytest.raises(ValueError):
        O.zero_error_independent_set(np.eye(13))
