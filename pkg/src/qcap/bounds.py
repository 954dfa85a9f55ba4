"""SDP bounds on classical communication over a quantum channel.

Every builder works on the Choi matrix J of the channel on A (x) B, A the input
copy and B the output.  Results come back as :class:`BoundResult`; solver
statuses other than ``optimal`` raise :class:`~qcap.sdp.SolverError`.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from . import operators as ops
from .channels import QuantumChannel, check_stochastic, sperp_residual
from .sdp import Problem, SolverError, inner, kron

DUALITY_TOL = 1e-6


class CodeClass(str, enum.Enum):
    NS = "NS"
    NS_PPT = "NS_PPT"

    @classmethod
    def parse(cls, value) -> "CodeClass":
        if isinstance(value, cls):
            return value
        key = str(value).replace("∩", "_").replace("-", "_").upper()
        aliases = {"NS": cls.NS, "NSPPT": cls.NS_PPT, "NS_PPT": cls.NS_PPT}
        if key not in aliases:
            raise ValueError(f"unknown code class {value!r}")
        return aliases[key]


@dataclass
class BoundResult:
    name: str
    channel_label: str
    params: dict
    value_linear: float
    value_log: float | None = None
    witness: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.value_log is None and self.value_linear > 0:
            self.value_log = math.log2(self.value_linear)

    @property
    def status(self) -> str:
        return self.diagnostics.get("status", "optimal")

    @property
    def gap(self) -> float:
        return self.diagnostics.get("gap", 0.0)


def _solve(p: Problem, context: str, **opts):
    sol = p.solve(**opts)
    if sol.status != "optimal":
        raise SolverError(sol, context)
    return sol


def _choi(ch: QuantumChannel):
    j = ch.choi
    return j.matrix, ch.d_in, ch.d_out


def _check_m(m):
    if m < 1:
        raise ValueError(f"number of messages must be >= 1, got {m}")


def _check_eps(eps):
    if not 0.0 <= eps < 1.0:
        raise ValueError(f"error threshold {eps} outside [0, 1)")


KERNEL_TOL = 1e-10


def _kernel_isometry(J) -> np.ndarray:
    """Columns spanning the null space of the PSD matrix J."""
    w, v = np.linalg.eigh(J)
    return v[:, w <= KERNEL_TOL * max(1.0, w.max())]


def _code_program(J, da, db, ppt: bool, zero_error: bool = False):
    """Variables F on AB and rho on A with 0 <= F <= rho (x) 1 and tr rho = 1.

    With ``zero_error`` the program also carries tr J F = tr J (rho (x) 1).  That
    face has no interior, so it is parametrised directly: rho (x) 1 - F = P X P^dag
    with P spanning ker J and X >= 0.
    """
    dims = [da, db]
    p = Problem()
    rho = p.hermitian("rho", da)
    rho1 = kron(rho, np.eye(db))
    if zero_error:
        P = _kernel_isometry(J)
        if P.shape[1]:
            X = p.hermitian("X", P.shape[1])
            p.psd(X)
            F = rho1 - P @ X @ P.conj().T
        else:
            F = rho1
    else:
        F = p.hermitian("F", da * db)
        p.psd(rho1 - F)
    p.psd(F)
    if ppt:
        Ft = F.ptranspose(dims, 1)
        p.psd(Ft)
        p.psd(rho1 - Ft)
    p.eq(rho.trace(), 1.0)
    return p, F, rho, dims


# ------------------------------------------------------- success probability

def success_prob(ch: QuantumChannel, m, cls=CodeClass.NS_PPT, **opts) -> BoundResult:
    """Optimal average success probability of sending m messages with one use."""
    _check_m(m)
    cls = CodeClass.parse(cls)
    J, da, db = _choi(ch)
    p, F, rho, dims = _code_program(J, da, db, cls is CodeClass.NS_PPT)
    p.eq(F.ptrace(dims, [1]), np.eye(db) / m)
    p.maximize(inner(J, F))
    sol = _solve(p, f"success_prob({ch.label}, m={m}, {cls.value})", **opts)
    return BoundResult(f"f_{cls.value}", ch.label, {"m": m, "class": cls.value},
                       sol.primal_objective,
                       witness={"F": sol.assignments["F"], "rho": sol.assignments["rho"]},
                       diagnostics=sol.summary())


def success_prob_dual(ch: QuantumChannel, m, cls=CodeClass.NS_PPT, **opts) -> BoundResult:
    """Independent dual formulation: min t + tr S/m."""
    _check_m(m)
    cls = CodeClass.parse(cls)
    J, da, db = _choi(ch)
    dims = [da, db]
    p = Problem()
    X = p.hermitian("X", da * db)
    S = p.hermitian("S", db)
    t = p.scalar("t")
    p.psd(X)
    lhs = X + kron(np.eye(da), S)
    marg = X
    if cls is CodeClass.NS_PPT:
        Y = p.hermitian("Y", da * db)
        Wv = p.hermitian("W", da * db)
        p.psd(Y)
        p.psd(Wv)
        lhs = lhs + (Wv - Y).ptranspose(dims, 1)
        marg = X + Wv
    p.psd(lhs - J)
    p.psd(t * np.eye(da) - marg.ptrace(dims, [0]))
    p.minimize(t + S.trace() / m)
    sol = _solve(p, f"success_prob_dual({ch.label}, m={m}, {cls.value})", **opts)
    return BoundResult(f"f_{cls.value}_dual", ch.label, {"m": m, "class": cls.value},
                       sol.primal_objective, witness={"S": sol.assignments["S"], "t": sol.assignments["t"]},
                       diagnostics=sol.summary())


# --------------------------------------------------- one-shot epsilon-error

def _eta_program(ch, eps, ppt, equality, **opts):
    _check_eps(eps)
    J, da, db = _choi(ch)
    # tr J F <= tr J (rho (x) 1) = 1 always, so eps = 0 pins F to the zero-error face
    p, F, rho, dims = _code_program(J, da, db, ppt, zero_error=eps == 0)
    eta = p.scalar("eta")
    marg = F.ptrace(dims, [1])
    if equality:
        p.eq(marg, eta * np.eye(db))
    else:
        p.psd(eta * np.eye(db) - marg)
    if eps > 0:
        p.geq(inner(J, F), 1 - eps)
    p.minimize(eta)
    sol = p.solve(**opts)
    if sol.status == "optimal":
        sol.assignments["F"] = F.value(sol.assignments)
    return sol


def one_shot_capacity(ch: QuantumChannel, eps: float, cls=CodeClass.NS_PPT, **opts) -> BoundResult:
    """One-shot eps-error capacity: -log2 of the smallest feasible eta."""
    cls = CodeClass.parse(cls)
    sol = _eta_program(ch, eps, cls is CodeClass.NS_PPT, True, **opts)
    if sol.status != "optimal":
        raise SolverError(sol, f"one_shot_capacity({ch.label}, eps={eps}, {cls.value})")
    eta = sol.primal_objective
    return BoundResult(f"C1_{cls.value}", ch.label, {"eps": eps, "class": cls.value},
                       1 / eta, -math.log2(eta),
                       witness={"F": sol.assignments["F"], "rho": sol.assignments["rho"], "eta": eta},
                       diagnostics=sol.summary())


def ht_bound(ch: QuantumChannel, eps: float, ppt: bool = False, **opts) -> BoundResult:
    """Hypothesis-testing converse: the eta program with tr_A F <= eta 1."""
    sol = _eta_program(ch, eps, ppt, False, **opts)
    name = "R_E_PPT" if ppt else "R_E"
    if sol.status != "optimal":
        raise SolverError(sol, f"ht_bound({ch.label}, eps={eps}, ppt={ppt})")
    eta = sol.primal_objective
    return BoundResult(name, ch.label, {"eps": eps, "ppt": ppt}, 1 / eta, -math.log2(eta),
                       witness={"F": sol.assignments["F"], "rho": sol.assignments["rho"], "eta": eta},
                       diagnostics=sol.summary())


def cq_one_shot(outputs, eps: float, **opts) -> BoundResult:
    """Classical-quantum reduction: log2 max sum s_x with 0 <= Q_x <= s_x 1."""
    _check_eps(eps)
    states = []
    for r in outputs:
        r = ops.hermitian_part(np.asarray(r, dtype=complex), 1e-9)
        if not ops.is_psd(r) or abs(np.trace(r).real - 1) > 1e-9:
            raise ValueError("cq outputs must be density operators")
        states.append(r)
    db = states[0].shape[0]
    p = Problem()
    Qs, ss = [], []
    for x, r in enumerate(states):
        Q = p.hermitian(f"Q{x}", db)
        s = p.scalar(f"s{x}")
        p.psd(Q)
        p.psd(s * np.eye(db) - Q)
        Qs.append(Q)
        ss.append(s)
    total = sum(ss[1:], ss[0])
    p.eq(sum(Qs[1:], Qs[0]), np.eye(db))
    p.geq(sum((inner(r, Q) for r, Q in zip(states[1:], Qs[1:])), inner(states[0], Qs[0])),
          (1 - eps) * total)
    p.maximize(total)
    sol = _solve(p, f"cq_one_shot(eps={eps})", **opts)
    val = sol.primal_objective
    return BoundResult("C1_cq", "cq", {"eps": eps}, val, math.log2(val),
                       diagnostics=sol.summary())


def ppv_lp(pmat, eps: float, **opts) -> BoundResult:
    """Finite-blocklength converse LP for a classical channel p[x, y] = N(y|x)."""
    _check_eps(eps)
    pmat = check_stochastic(pmat)
    nx, ny = pmat.shape
    p = Problem()
    s = [p.scalar(f"s{x}", nonneg=True) for x in range(nx)]
    Q = [[p.scalar(f"Q{x}_{y}", nonneg=True) for y in range(ny)] for x in range(nx)]
    total = sum(s[1:], s[0])
    for x in range(nx):
        for y in range(ny):
            p.geq(s[x], Q[x][y])
    for y in range(ny):
        p.geq(1.0, sum((Q[x][y] for x in range(1, nx)), Q[0][y]))
    success = sum((pmat[x, y] * Q[x][y] for x in range(nx) for y in range(ny)), 0.0 * s[0])
    p.geq(success, (1 - eps) * total)
    p.maximize(total)
    sol = _solve(p, f"ppv_lp(eps={eps})", **opts)
    val = sol.primal_objective
    return BoundResult("PPV", "classical", {"eps": eps}, val, math.log2(val), diagnostics=sol.summary())


# ------------------------------------------------------ strong converse SDPs

def _f_plus_primal(J, da, db, m, **opts):
    dims = [da, db]
    Jt = ops.partial_transpose(J, dims, 1)
    p = Problem()
    R = p.hermitian("R", da * db)
    Z = p.hermitian("Z", db)
    p.psd(R - Jt)
    p.psd(R + Jt)
    Rt = R.ptranspose(dims, 1)
    mZ = m * kron(np.eye(da), Z)
    p.psd(mZ - Rt)
    p.psd(mZ + Rt)
    p.minimize(Z.trace())
    return p.solve(**opts)


def _f_plus_dual(J, da, db, m, **opts):
    dims = [da, db]
    p = Problem()
    V, X, Wv, Y = (p.hermitian(k, da * db) for k in "VXWY")
    for e in (V, X, Wv, Y):
        p.psd(e)
    p.psd((Wv - Y).ptranspose(dims, 1) - V - X)
    p.psd(np.eye(db) / m - (Wv + Y).ptrace(dims, [1]))
    p.maximize(inner(J, (V - X).ptranspose(dims, 1)))
    return p.solve(**opts)


def f_plus(ch: QuantumChannel, m: float, **opts) -> BoundResult:
    """Single-letter relaxation with f_NS∩PPT(N^n, m^n) <= f_plus(N, m)^n."""
    _check_m(m)
    J, da, db = _choi(ch)
    primal = _f_plus_primal(J, da, db, m, **opts)
    if primal.status != "optimal":
        raise SolverError(primal, f"f_plus({ch.label}, m={m})")
    dual = _f_plus_dual(J, da, db, m, **opts)
    if dual.status != "optimal":
        raise SolverError(dual, f"f_plus dual({ch.label}, m={m})")
    diag = primal.summary()
    diag["dual_sdp_value"] = dual.primal_objective
    diag["duality_gap"] = abs(primal.primal_objective - dual.primal_objective)
    return BoundResult("f_plus", ch.label, {"m": m}, primal.primal_objective,
                       witness={"R": primal.assignments["R"], "Z": primal.assignments["Z"]},
                       diagnostics=diag)


def _v_program(J, da, db, m, **opts):
    dims = [da, db]
    p = Problem()
    V = p.hermitian("V", da * db)
    S = p.hermitian("S", db)
    p.psd(V - J)
    Vt = V.ptranspose(dims, 1)
    mS = m * kron(np.eye(da), S)
    p.psd(mS - Vt)
    p.psd(mS + Vt)
    p.minimize(S.trace())
    return p.solve(**opts)


def f_tilde_plus(ch: QuantumChannel, m: float, **opts) -> BoundResult:
    _check_m(m)
    J, da, db = _choi(ch)
    sol = _v_program(J, da, db, m, **opts)
    if sol.status != "optimal":
        raise SolverError(sol, f"f_tilde_plus({ch.label}, m={m})")
    return BoundResult("f_tilde_plus", ch.label, {"m": m}, sol.primal_objective,
                       witness={"V": sol.assignments["V"], "S": sol.assignments["S"]},
                       diagnostics=sol.summary())


def beta(ch: QuantumChannel, **opts) -> BoundResult:
    """beta(N); C_beta = log2 beta is a strong converse bound on the classical capacity."""
    J, da, db = _choi(ch)
    sol = _f_plus_primal(J, da, db, 1.0, **opts)
    if sol.status != "optimal":
        raise SolverError(sol, f"beta({ch.label})")
    cap = db * ops.operator_norm(ops.partial_transpose(J, [da, db], 1))
    diag = sol.summary()
    diag["norm_bound"] = cap
    diag["norm_bound_ok"] = bool(sol.primal_objective <= cap + 1e-7)
    return BoundResult("beta", ch.label, {}, sol.primal_objective,
                       witness={"R": sol.assignments["R"], "S": sol.assignments["Z"]},
                       diagnostics=diag)


def zeta(ch: QuantumChannel, **opts) -> BoundResult:
    J, da, db = _choi(ch)
    sol = _v_program(J, da, db, 1.0, **opts)
    if sol.status != "optimal":
        raise SolverError(sol, f"zeta({ch.label})")
    return BoundResult("zeta", ch.label, {}, sol.primal_objective,
                       witness={"V": sol.assignments["V"], "S": sol.assignments["S"]},
                       diagnostics=sol.summary())


def strong_converse_decay(ch: QuantumChannel, r: float, n: int, **opts) -> float:
    """Lower bound 1 - f_plus(N, 2^r)^n on the n-use error probability at rate r."""
    if r <= 0 or n < 1:
        raise ValueError("rate must be positive and n >= 1")
    f = f_plus(ch, 2.0 ** r, **opts).value_linear
    return 1.0 - min(f, 1.0) ** n


# ---------------------------------------------------------------- zero error

def zero_error_m0(ch: QuantumChannel, cls=CodeClass.NS_PPT, **opts) -> BoundResult:
    """One-shot zero-error message count max tr S_A (may be fractional)."""
    cls = CodeClass.parse(cls)
    J, da, db = _choi(ch)
    dims = [da, db]
    p = Problem()
    S = p.hermitian("S", da)
    S1 = kron(S, np.eye(db))
    # tr J (S (x) 1 - U) = 0 with S (x) 1 - U >= 0 confines S (x) 1 - U to ker J
    P = _kernel_isometry(J)
    if P.shape[1]:
        X = p.hermitian("X", P.shape[1])
        p.psd(X)
        U = S1 - P @ X @ P.conj().T
    else:
        U = S1
    p.psd(U)
    if cls is CodeClass.NS_PPT:
        Ut = U.ptranspose(dims, 1)
        p.psd(Ut)
        p.psd(S1 - Ut)
    p.eq(U.ptrace(dims, [1]), np.eye(db))
    p.maximize(S.trace())
    sol = _solve(p, f"zero_error_m0({ch.label}, {cls.value})", **opts)
    return BoundResult(f"M0_{cls.value}", ch.label, {"class": cls.value}, sol.primal_objective,
                       witness={"S": sol.assignments["S"], "U": U.value(sol.assignments)},
                       diagnostics=sol.summary())


def lovasz_witness_value(ch: QuantumChannel, t, tol: float = 1e-8) -> float:
    """||1 + T||_inf for a witness T in S-perp with 1 + T >= 0: a lower bound on theta(N)."""
    t = np.asarray(t, dtype=complex)
    res = sperp_residual(ch.graph, t)
    if res > tol:
        raise ValueError(f"witness is not in S-perp (projection norm {res:.3g})")
    one_t = np.eye(ch.d_in) + t
    lo = ops.eigvalsh(one_t).min()
    if lo < -tol:
        raise ValueError(f"1 + T is not PSD (min eigenvalue {lo:.3g})")
    return ops.operator_norm(one_t)


def nalpha_witness(alpha: float) -> np.ndarray:
    """T0 = -|0><0| + sec^2(a)|1><1| + (1 - sec^2(a))|2><2|."""
    sec2 = 1 / math.cos(alpha) ** 2
    return np.diag([-1.0, sec2, 1 - sec2]).astype(complex)


# ------------------------------------------------------ entanglement-assisted

def _state(rho, d) -> np.ndarray:
    rho = ops.hermitian_part(np.asarray(rho, dtype=complex), 1e-9)
    if rho.shape != (d, d):
        raise ValueError(f"state of shape {rho.shape}, channel expects {d}x{d}")
    w = ops.eigvalsh(rho)
    if w.min() < -1e-9 or abs(w.sum() - 1) > 1e-9:
        raise ValueError("input is not a density operator")
    return rho


def ea_mutual_info(ch: QuantumChannel, rho) -> float:
    """H(rho) + H(N(rho)) - H((id (x) N) phi_rho) in bits."""
    rho = _state(rho, ch.d_in)
    return _ea_info_unchecked(ch, rho)


def _entropy(rho) -> float:
    w = np.clip(np.linalg.eigvalsh(rho), 0, None)
    w = w[w > 1e-15]
    return float(-np.sum(w * np.log2(w)))


def _ea_info_unchecked(ch, rho):
    # (1 (x) sqrt(rho))|Phi> = (sqrt(rho)^T (x) 1)|Phi>, and id (x) N maps Phi to J
    r = ops.sqrtm_psd(rho).T
    lift = np.kron(r, np.eye(ch.d_out))
    joint = lift @ ch.choi.matrix @ lift.conj().T
    return _entropy(rho) + _entropy(ch(rho)) - _entropy(joint)


def _rho_from_params(x, d):
    a = (x[: d * d] + 1j * x[d * d:]).reshape(d, d)
    rho = a @ a.conj().T
    return rho / np.trace(rho).real


def ea_capacity_search(ch: QuantumChannel, grid: int = 20, refine_steps: int = 50) -> BoundResult:
    """Numerical max over input states of the entanglement-assisted mutual information.

    Coarse grid (Bloch ball for qubits, diagonal simplex otherwise), then local
    refinement.  A lower estimate of the true maximum, adequate for plotting.
    """
    d = ch.d_in
    if d > 3:
        raise ValueError("state search is limited to input dimension <= 3")
    best, best_rho = -np.inf, None
    if d == 2:
        ax = np.linspace(-1, 1, grid)
        paulis = [np.array([[0, 1], [1, 0]]), np.array([[0, -1j], [1j, 0]]), np.diag([1.0, -1.0])]
        for x in ax:
            for y in ax:
                for z in ax:
                    if x * x + y * y + z * z > 1:
                        continue
                    rho = (np.eye(2) + x * paulis[0] + y * paulis[1] + z * paulis[2]) / 2
                    v = _ea_info_unchecked(ch, rho)
                    if v > best:
                        best, best_rho = v, rho
    else:
        ticks = np.linspace(0, 1, grid)
        for p in ticks:
            for q in ticks:
                if p + q > 1:
                    continue
                rho = np.diag([p, q, 1 - p - q]).astype(complex)
                v = _ea_info_unchecked(ch, rho)
                if v > best:
                    best, best_rho = v, rho
    # refine from a full-rank neighbour of the best grid point
    start = ops.sqrtm_psd(0.98 * best_rho + 0.02 * np.eye(d) / d)
    x0 = np.concatenate([start.real.ravel(), start.imag.ravel()])
    res = optimize.minimize(lambda x: -_ea_info_unchecked(ch, _rho_from_params(x, d)), x0,
                            method="Nelder-Mead",
                            options={"maxiter": refine_steps * len(x0), "xatol": 1e-10, "fatol": 1e-12})
    if -res.fun > best:
        best, best_rho = -res.fun, _rho_from_params(res.x, d)
    return BoundResult("C_E_search", ch.label, {"grid": grid}, 2.0 ** best, best,
                       witness={"rho": best_rho}, diagnostics={"status": "optimal", "gap": 0.0})


def ad_holevo_lower(gamma: float) -> float:
    """max_p H2((1-g)p) - H2((1 + sqrt(1 - 4(1-g) g p^2))/2) for amplitude damping."""
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"damping parameter {gamma} outside [0, 1]")

    def holevo(p):
        disc = max(0.0, 1 - 4 * (1 - gamma) * gamma * p * p)
        return ops.binary_entropy((1 - gamma) * p) - ops.binary_entropy((1 + math.sqrt(disc)) / 2)

    grid = np.linspace(0, 1, 201)
    vals = [holevo(p) for p in grid]
    k = int(np.argmax(vals))
    lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, len(grid) - 1)]
    res = optimize.minimize_scalar(lambda p: -holevo(p), bounds=(lo, hi), method="bounded",
                                   options={"xatol": 1e-10})
    return max(vals[k], -res.fun)
