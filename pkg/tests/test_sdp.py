import numpy as np
import pytest
from hypothesis import given, strategies as st

from qcap import bounds as B
from qcap import channels as C
from qcap import operators as ops
from qcap.acceptance import lambda_max_sdp, random_hermitian, trace_norm_sdp
from qcap.sdp import Problem, extract, inner, realify, solve
from qcap.sdp.model import deembed, dump_conic_form, embed, hermitian_basis, smat, svec

from conftest import SEED, seeds


def test_lp_example():
    p = Problem()
    x = p.scalar("x", nonneg=True)
    p.geq(3.0, x)
    p.maximize(x)
    sol = p.solve()
    assert sol.status == "optimal"
    assert sol.primal_objective == pytest.approx(3, abs=1e-7)


@pytest.mark.parametrize("k", range(10))
def test_lambda_max_and_trace_norm(k):
    h = random_hermitian(1 + k % 8, 1000 + SEED + k)
    w = np.linalg.eigvalsh(h)
    assert abs(lambda_max_sdp(h) - w.max()) <= 1e-7
    assert abs(trace_norm_sdp(h) - ops.trace_norm(h)) <= 1e-7


def test_complex_objective_value():
    # max tr(rho X) over 0 <= X <= 1 is lambda_max(rho) = 1 for a pure complex state
    v = np.array([1, 1j]) / np.sqrt(2)
    rho = np.outer(v, v.conj())
    p = Problem()
    X = p.hermitian("X", 2)
    p.psd(X)
    p.psd(np.eye(2) - X)
    p.maximize(inner(rho, X))
    sol = p.solve()
    assert sol.primal_objective == pytest.approx(ops.spectral_decompose(rho)[0][0], abs=1e-7)
    x = extract(sol, "X")
    assert np.allclose(x, x.conj().T)
    with pytest.raises(KeyError):
        extract(sol, "Y")


def test_real_diagonal_embedding_and_objective():
    d = np.diag([1.0, 3.0])
    assert np.array_equal(embed(d), np.kron(np.eye(2), d))
    p = Problem()
    X = p.hermitian("X", 2)
    p.psd(X - np.eye(2))
    p.minimize(inner(d, X))
    assert p.solve().primal_objective == pytest.approx(4, abs=1e-7)


def test_infeasible_psd_constant():
    p = Problem()
    t = p.scalar("t")
    p.psd(np.diag([1.0, -0.1]) + 0 * t * np.eye(2))
    p.minimize(t)
    assert p.solve().status == "infeasible"


def test_infeasible_and_unbounded_lp():
    p = Problem()
    x = p.scalar("x", nonneg=True)
    p.geq(-1.0, x)
    p.minimize(x)
    assert p.solve().status == "infeasible"
    p = Problem()
    x = p.scalar("x", nonneg=True)
    p.minimize(-1.0 * x)
    assert p.solve().status == "unbounded"


def test_extract_rejects_failed_solution():
    p = Problem()
    x = p.scalar("x", nonneg=True)
    p.geq(-1.0, x)
    p.minimize(x)
    with pytest.raises(ValueError):
        extract(p.solve(), "x")


def test_model_rejects_bad_input():
    p = Problem()
    X = p.hermitian("X", 2)
    with pytest.raises(ValueError):
        p.psd(X @ np.array([[0, 1], [0, 0]]))
    with pytest.raises(ValueError):
        p.hermitian("X", 3)
    q = Problem()
    Y = q.hermitian("Y", 2)
    with pytest.raises(ValueError):
        p.psd(Y)
    with pytest.raises(ValueError):
        realify(Problem())


@given(seeds, st.integers(1, 6))
def test_embedding_round_trip(seed, n):
    h = random_hermitian(n, seed)
    assert np.allclose(deembed(embed(h)), h, atol=1e-12)
    # psd iff the real embedding is psd, eigenvalues doubled in multiplicity
    we = np.linalg.eigvalsh(embed(h))
    assert np.allclose(we, np.repeat(np.linalg.eigvalsh(h), 2), atol=1e-10)


@given(seeds, st.integers(1, 6))
def test_svec_preserves_inner_product(seed, n):
    rng = np.random.default_rng(seed)
    a, b = rng.normal(size=(n, n)), rng.normal(size=(n, n))
    a, b = a + a.T, b + b.T
    assert svec(a) @ svec(b) == pytest.approx(np.trace(a @ b))
    assert np.allclose(smat(svec(a), n), a)


def test_hermitian_basis_orthonormal():
    for n in (1, 2, 3):
        basis = hermitian_basis(n)
        gram = np.einsum("aij,bij->ab", basis.conj(), basis)
        assert np.allclose(gram, np.eye(n * n))


def test_success_prob_extract_examples():
    ch = C.amplitude_damping(0.3)
    res = B.success_prob(ch, 2)
    rho, f = res.witness["rho"], res.witness["F"]
    assert np.trace(rho).real == pytest.approx(1, abs=1e-7)
    gap = np.kron(rho, np.eye(2)) - f
    assert ops.eigvalsh(f).min() >= -1e-7
    assert ops.eigvalsh(gap).min() >= -1e-7
    cap = B.one_shot_capacity(ch, 0.1)
    assert cap.witness["eta"] == pytest.approx(2 ** -cap.value_log, rel=1e-12)


def test_presolve_drops_redundant_rows():
    # the second equality repeats the four real rows of the first
    form = realify(_eta_problem())
    assert np.linalg.matrix_rank(form.A) == form.A.shape[0] == 4
    assert form.dropped_rows == 4


def _eta_problem():
    p = Problem()
    X = p.hermitian("X", 2)
    X2 = p.hermitian("X2", 2)
    p.psd(X)
    p.eq(X, np.eye(2) / 2)
    p.eq(X + X2 - X2, np.eye(2) / 2)
    p.minimize(X.trace())
    return p


def test_redundant_equalities_solve():
    sol = _eta_problem().solve()
    assert sol.status == "optimal" and sol.primal_objective == pytest.approx(1, abs=1e-7)


def test_deterministic_reruns():
    h = random_hermitian(5, 7)
    p = Problem()
    t = p.scalar("t")
    p.psd(t * np.eye(5) - h)
    p.minimize(t)
    a, b = p.solve(), p.solve()
    assert a.primal_objective == b.primal_objective and a.iterations == b.iterations
    assert np.array_equal(a.x, b.x) and np.array_equal(a.z, b.z)
    r1, r2 = B.beta(C.random_channel(2, 2, 2, 3)), B.beta(C.random_channel(2, 2, 2, 3))
    assert r1.value_linear == r2.value_linear


def test_optimal_status_meets_tolerances():
    form = realify(_eta_problem())
    sol = solve(form, feas_tol=1e-9, gap_tol=1e-9)
    assert sol.status == "optimal"
    assert sol.gap <= 1e-9 and sol.primal_residual <= 1e-9 and sol.dual_residual <= 1e-9
    assert sol.primal_objective >= sol.dual_objective - 1e-9


def test_dump_conic_form(tmp_path):
    form = realify(_eta_problem())
    path = tmp_path / "form.txt"
    dump_conic_form(form, path)
    text = path.read_text()
    assert text.startswith(f"# n {form.n}\n")
    assert "\nG\n" in text and "\r" not in text


def test_cvxpy_cross_check():
    cp = pytest.importorskip("cvxpy")
    ch = C.random_channel(2, 2, 2, 11)
    J = ch.choi.matrix
    F = cp.Variable((4, 4), hermitian=True)
    rho = cp.Variable((2, 2), hermitian=True)
    cons = [F >> 0, cp.kron(rho, np.eye(2)) - F >> 0, cp.real(cp.trace(rho)) == 1,
            cp.partial_trace(F, [2, 2], axis=0) == np.eye(2) / 2]
    prob = cp.Problem(cp.Maximize(cp.real(cp.trace(J @ F))), cons)
    prob.solve()
    assert prob.status == "optimal"
    assert B.success_prob(ch, 2, "NS").value_linear == pytest.approx(prob.value, abs=1e-5)
