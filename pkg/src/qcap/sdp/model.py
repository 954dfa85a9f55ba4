"""Declarative SDP models over complex Hermitian and real scalar variables.

An :class:`Expr` is an affine map from the real parameter vector of the
declared variables to complex matrices.  It stores a constant matrix and, per
variable, the stack of images of that variable's basis elements.  All linear
operations used by the bound builders (products with constants, Kronecker
products, partial traces and transposes) act on the constant and on every
slice of the stack in one vectorised call.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .. import operators as ops


def hermitian_basis(n: int) -> np.ndarray:
    """Hilbert-Schmidt orthonormal basis of n x n Hermitian matrices, shape (n*n, n, n)."""
    basis = []
    for i in range(n):
        e = np.zeros((n, n), dtype=complex)
        e[i, i] = 1
        basis.append(e)
    s = 1 / np.sqrt(2)
    for i in range(n):
        for j in range(i + 1, n):
            e = np.zeros((n, n), dtype=complex)
            e[i, j] = e[j, i] = s
            basis.append(e)
            e = np.zeros((n, n), dtype=complex)
            e[i, j] = -1j * s
            e[j, i] = 1j * s
            basis.append(e)
    return np.array(basis)


@dataclass(eq=False)
class Variable:
    name: str
    kind: str  # "hermitian" | "scalar"
    side: int = 1
    nonneg: bool = False
    basis: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.kind == "hermitian":
            self.basis = hermitian_basis(self.side)
        elif self.kind == "scalar":
            self.basis = np.ones((1, 1, 1), dtype=complex)
        else:
            raise ValueError(f"unknown variable kind {self.kind!r}")

    @property
    def size(self) -> int:
        return self.basis.shape[0]

    def value(self, theta: np.ndarray):
        m = np.tensordot(theta, self.basis, axes=1)
        if self.kind == "scalar":
            return float(m.real[0, 0])
        return (m + m.conj().T) / 2


def _as_const(x) -> np.ndarray:
    a = np.asarray(x, dtype=complex)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    if a.ndim != 2:
        raise ValueError(f"constants must be matrices or scalars, got shape {a.shape}")
    return a


class Expr:
    """Affine complex-matrix-valued expression in the model variables."""

    __array_ufunc__ = None  # let ndarray @ Expr fall through to Expr.__rmatmul__

    def __init__(self, const, terms=None):
        self.const = _as_const(const)
        self.terms: dict[Variable, np.ndarray] = dict(terms or {})

    @classmethod
    def of(cls, x) -> "Expr":
        return x if isinstance(x, Expr) else cls(x)

    @property
    def shape(self):
        return self.const.shape

    def map(self, f: Callable[[np.ndarray], np.ndarray]) -> "Expr":
        """Apply a linear map that accepts a stack of matrices."""
        return Expr(f(self.const), {v: f(c) for v, c in self.terms.items()})

    # arithmetic ----------------------------------------------------------
    def __add__(self, other):
        other = Expr.of(other)
        if other.shape != self.shape:
            if other.shape == (1, 1) and np.all(other.const == 0) and not other.terms:
                return self
            raise ValueError(f"shape mismatch {self.shape} + {other.shape}")
        terms = dict(self.terms)
        for v, c in other.terms.items():
            terms[v] = terms[v] + c if v in terms else c
        return Expr(self.const + other.const, terms)

    __radd__ = __add__

    def __neg__(self):
        return self.map(lambda a: -a)

    def __sub__(self, other):
        return self + (-Expr.of(other))

    def __rsub__(self, other):
        return Expr.of(other) - self

    def __mul__(self, k):
        if isinstance(k, Expr):
            raise TypeError("products of two expressions are not affine")
        k = np.asarray(k)
        if k.ndim == 0:
            return self.map(lambda a: a * k)
        if self.shape != (1, 1):
            raise ValueError("only scalar expressions can scale a matrix")
        m = _as_const(k)
        return Expr(self.const[0, 0] * m, {v: c[:, 0, 0, None, None] * m for v, c in self.terms.items()})

    __rmul__ = __mul__

    def __truediv__(self, k):
        return self * (1.0 / k)

    def __matmul__(self, m):
        if isinstance(m, Expr):
            raise TypeError("products of two expressions are not affine")
        m = _as_const(m)
        return self.map(lambda a: a @ m)

    def __rmatmul__(self, m):
        m = _as_const(m)
        return self.map(lambda a: m @ a)

    @property
    def H(self):
        return self.map(lambda a: np.conj(np.swapaxes(a, -1, -2)))

    @property
    def T(self):
        return self.map(lambda a: np.swapaxes(a, -1, -2))

    def trace(self) -> "Expr":
        return self.map(lambda a: np.trace(a, axis1=-2, axis2=-1)[..., None, None])

    def ptrace(self, dims, keep) -> "Expr":
        return self.map(lambda a: ops.partial_trace(a, dims, keep))

    def ptranspose(self, dims, systems) -> "Expr":
        return self.map(lambda a: ops.partial_transpose(a, dims, systems))

    def permute(self, dims, perm) -> "Expr":
        return self.map(lambda a: ops.permute_systems(a, dims, perm))

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        if self.shape[0] != self.shape[1]:
            return False
        for a in [self.const, *self.terms.values()]:
            if np.max(np.abs(a - np.conj(np.swapaxes(a, -1, -2))), initial=0.0) > tol:
                return False
        return True

    def value(self, assignments: dict) -> np.ndarray:
        out = self.const.copy()
        for v, c in self.terms.items():
            out = out + np.tensordot(assignments[v.name + "#theta"], c, axes=1)
        return out

    def __repr__(self):
        names = ", ".join(v.name for v in self.terms)
        return f"Expr(shape={self.shape}, vars=[{names}])"


def _batched_kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    batch = np.broadcast_shapes(a.shape[:-2], b.shape[:-2])
    out = np.einsum("...ij,...kl->...ikjl", a, b)
    return out.reshape(batch + (a.shape[-2] * b.shape[-2], a.shape[-1] * b.shape[-1]))


def kron(a, b) -> Expr:
    """Kronecker product where at most one factor is an expression."""
    if isinstance(a, Expr) and isinstance(b, Expr):
        raise TypeError("kron of two expressions is not affine")
    if isinstance(a, Expr):
        m = _as_const(b)
        return a.map(lambda x: _batched_kron(x, m))
    m = _as_const(a)
    return Expr.of(b).map(lambda x: _batched_kron(m, x))


def trace(e) -> Expr:
    return Expr.of(e).trace()


def inner(c, e: Expr) -> Expr:
    """tr(c e) as a scalar expression."""
    return (_as_const(c) @ e).trace()


@dataclass
class Problem:
    """An SDP: sense + objective, equality, PSD and scalar inequality constraints."""

    variables: dict = field(default_factory=dict)
    objective: Expr | None = None
    sense: str = "min"
    equalities: list = field(default_factory=list)
    psd_constraints: list = field(default_factory=list)
    inequalities: list = field(default_factory=list)

    def _declare(self, var: Variable) -> Expr:
        if var.name in self.variables:
            raise ValueError(f"variable {var.name!r} declared twice")
        self.variables[var.name] = var
        return Expr(np.zeros((var.side, var.side)), {var: var.basis.copy()})

    def hermitian(self, name: str, side: int) -> Expr:
        return self._declare(Variable(name, "hermitian", int(side)))

    def scalar(self, name: str, nonneg: bool = False) -> Expr:
        e = self._declare(Variable(name, "scalar", 1, nonneg))
        if nonneg:
            self.inequalities.append(e)
        return e

    def _check(self, e: Expr):
        for v in e.terms:
            if self.variables.get(v.name) is not v:
                raise ValueError(f"expression references undeclared variable {v.name!r}")

    def maximize(self, e):
        self.sense, self.objective = "max", Expr.of(e)
        self._check(self.objective)

    def minimize(self, e):
        self.sense, self.objective = "min", Expr.of(e)
        self._check(self.objective)

    def eq(self, lhs, rhs=0.0):
        lhs, rhs = Expr.of(lhs), Expr.of(rhs)
        if rhs.shape == (1, 1) and lhs.shape != (1, 1) and not rhs.terms:
            rhs = Expr(rhs.const[0, 0] * np.ones(lhs.shape))
        e = lhs - rhs
        self._check(e)
        self.equalities.append(e)

    def psd(self, e):
        """Require the Hermitian expression ``e`` to be positive semidefinite."""
        e = Expr.of(e)
        self._check(e)
        if not e.is_hermitian():
            raise ValueError("PSD constraint on a non-Hermitian expression")
        if e.shape == (1, 1):
            self.inequalities.append(e)
        else:
            self.psd_constraints.append(e)

    def geq(self, lhs, rhs=0.0):
        """Scalar inequality lhs >= rhs."""
        e = Expr.of(lhs) - Expr.of(rhs)
        if e.shape != (1, 1):
            raise ValueError("geq is for scalar expressions; use psd for matrices")
        self._check(e)
        self.inequalities.append(e)

    def solve(self, **opts):
        from .solver import solve
        form = realify(self)
        return extract_all(form, solve(form, **opts))


# --------------------------------------------------------------- conic form

@functools.lru_cache(maxsize=None)
def _svec_index(n: int):
    iu = np.triu_indices(n)
    scale = np.where(iu[0] == iu[1], 1.0, np.sqrt(2))
    return iu[0], iu[1], scale


def svec(m: np.ndarray) -> np.ndarray:
    """Upper triangle, row by row, off-diagonals scaled by sqrt(2); works on stacks."""
    i, j, scale = _svec_index(m.shape[-1])
    return m[..., i, j] * scale


def smat(v: np.ndarray, n: int) -> np.ndarray:
    i, j, scale = _svec_index(n)
    m = np.zeros(v.shape[:-1] + (n, n))
    m[..., i, j] = v / scale
    m[..., j, i] = v / scale
    return m


def embed(h: np.ndarray) -> np.ndarray:
    """Real symmetric image [[Re H, -Im H], [Im H, Re H]] of (a stack of) Hermitian H."""
    re, im = h.real, h.imag
    top = np.concatenate([re, -im], axis=-1)
    bot = np.concatenate([im, re], axis=-1)
    return np.concatenate([top, bot], axis=-2)


def deembed(s: np.ndarray) -> np.ndarray:
    """Left inverse of :func:`embed` for structured blocks; averages the two copies."""
    n = s.shape[-1] // 2
    s11, s12 = s[..., :n, :n], s[..., :n, n:]
    s21, s22 = s[..., n:, :n], s[..., n:, n:]
    return (s11 + s22) / 2 + 1j * (s21 - s12) / 2


@dataclass
class ConicForm:
    """min c.x + offset  s.t.  A x = b,  G x + s = h,  s in K.

    K is an orthant of length ``l`` followed by real symmetric PSD blocks of the
    sizes in ``blocks`` (stored with :func:`svec`).  ``sign`` is -1 when the
    model maximised, so model objective = sign * (c.x + offset).  ``embedded``
    marks every block as the :func:`embed` image of a Hermitian block.
    """

    c: np.ndarray
    A: np.ndarray
    b: np.ndarray
    G: np.ndarray
    h: np.ndarray
    l: int
    blocks: list
    offset: float = 0.0
    sign: float = 1.0
    layout: dict = field(default_factory=dict)
    variables: dict = field(default_factory=dict)
    dropped_rows: int = 0
    embedded: bool = False

    @property
    def n(self) -> int:
        return self.c.shape[0]


def _columns(e: Expr, layout: dict, n: int) -> np.ndarray:
    """Matrix (entries of e) x (parameter vector) for the linear part of e."""
    r, c = e.shape
    out = np.zeros((r, c, n), dtype=complex)
    for v, coef in e.terms.items():
        sl = layout[v.name]
        out[:, :, sl] += np.moveaxis(coef, 0, -1)
    return out


def presolve_rows(A: np.ndarray, b: np.ndarray, tol: float = 1e-10):
    """Drop numerically dependent equality rows (pivoted QR on A^T)."""
    from scipy.linalg import qr

    if A.shape[0] == 0:
        return A, b, 0
    nrm = np.linalg.norm(A, axis=1)
    keep0 = nrm > tol
    if not np.all(np.abs(b[~keep0]) <= 1e-9):
        raise InfeasibleModel("constraint 0 = b with b != 0")
    A, b = A[keep0], b[keep0]
    if A.shape[0] == 0:
        return A, b, int((~keep0).sum())
    _, r, piv = qr(A.T, mode="economic", pivoting=True)
    d = np.abs(np.diag(r))
    rank = int(np.sum(d > tol * max(1.0, d[0])))
    rows = np.sort(piv[:rank])
    Ak, bk = A[rows], b[rows]
    if rank < A.shape[0]:
        x0 = np.linalg.lstsq(Ak, bk, rcond=None)[0]
        if np.max(np.abs(A @ x0 - b)) > 1e-8 * max(1.0, np.max(np.abs(b))):
            raise InfeasibleModel("inconsistent linear equalities")
    return Ak, bk, int((~keep0).sum()) + A.shape[0] - rank


class InfeasibleModel(ValueError):
    pass


def realify(p: Problem) -> ConicForm:
    if p.objective is None:
        raise ValueError("problem has no objective")
    layout, n = {}, 0
    for name, v in p.variables.items():
        layout[name] = slice(n, n + v.size)
        n += v.size
    if n == 0:
        raise ValueError("problem has no variables")

    obj = p.objective
    if obj.shape != (1, 1):
        raise ValueError("objective must be a scalar expression")
    sign = -1.0 if p.sense == "max" else 1.0
    c = sign * _columns(obj, layout, n)[0, 0].real
    offset = sign * obj.const[0, 0].real

    a_rows, b_rows = [], []
    for e in p.equalities:
        cols = _columns(e, layout, n)
        const = e.const
        if e.is_hermitian():
            iu = np.triu_indices(e.shape[0])
            off = iu[0] != iu[1]
            a_rows += [cols[iu].real, cols[iu[0][off], iu[1][off]].imag]
            b_rows += [-const[iu].real, -const[iu[0][off], iu[1][off]].imag]
        else:
            a_rows += [cols.reshape(-1, n).real, cols.reshape(-1, n).imag]
            b_rows += [-const.reshape(-1).real, -const.reshape(-1).imag]
    A = np.concatenate(a_rows) if a_rows else np.zeros((0, n))
    b = np.concatenate(b_rows) if b_rows else np.zeros(0)
    A, b, dropped = presolve_rows(A, b)

    g_rows, h_rows = [], []
    for e in p.inequalities:
        g_rows.append(-_columns(e, layout, n)[0, 0].real[None, :])
        h_rows.append(np.array([e.const[0, 0].real]))
    blocks = []
    for e in p.psd_constraints:
        side = e.shape[0]
        cols = _columns(e, layout, n)  # (side, side, n)
        emb = embed(np.moveaxis(cols, -1, 0))  # (n, 2s, 2s)
        g_rows.append(-svec(emb).T)
        h_rows.append(svec(embed(e.const)))
        blocks.append(2 * side)
    G = np.concatenate(g_rows) if g_rows else np.zeros((0, n))
    h = np.concatenate(h_rows) if h_rows else np.zeros(0)
    return ConicForm(c=c, A=A, b=b, G=G, h=h, l=len(p.inequalities), blocks=blocks,
                     offset=offset, sign=sign, layout=layout, variables=dict(p.variables),
                     dropped_rows=dropped, embedded=True)


def extract_all(form: ConicForm, sol):
    """Fill ``sol.assignments`` with de-embedded variable values."""
    if sol.x is not None:
        for name, v in form.variables.items():
            theta = sol.x[form.layout[name]]
            sol.assignments[name] = v.value(theta)
            sol.assignments[name + "#theta"] = theta
    return sol


def extract(sol, name: str):
    """Value of a named model variable from a solved model."""
    if sol.status != "optimal":
        raise ValueError(f"cannot extract from a solution with status {sol.status!r}")
    if name not in sol.assignments:
        raise KeyError(f"unknown variable {name!r}")
    return sol.assignments[name]


def dump_conic_form(form: ConicForm, path) -> None:
    """Sparse text dump for cross-checking with external solvers.

    Header lines give sizes; then sections ``c``, ``A``, ``b``, ``G``, ``h``
    with one ``row col value`` line per nonzero (vectors use col 0).
    """
    lines = [f"# n {form.n}", f"# eq {form.A.shape[0]}", f"# l {form.l}",
             "# s " + " ".join(str(k) for k in form.blocks),
             f"# offset {form.offset!r}", f"# sign {form.sign!r}"]

    def emit(tag, m):
        m = np.atleast_2d(m)
        if tag in ("c", "b", "h"):
            m = m.reshape(-1, 1)
        lines.append(tag)
        for i, j in zip(*np.nonzero(m)):
            lines.append(f"{i} {j} {m[i, j]!r}")

    for tag, m in (("c", form.c), ("A", form.A), ("b", form.b), ("G", form.G), ("h", form.h)):
        emit(tag, m)
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
