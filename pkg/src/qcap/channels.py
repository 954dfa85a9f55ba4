"""Quantum channels in Kraus form, their Choi matrices and non-commutative graphs.

Choi convention: J = sum_ij |i><j| (x) N(|i><j|), unnormalised (trace d_in),
input factor first. Every bound in the package depends on this; a normalised
Choi matrix would silently rescale all of them by d_in.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .operators import HermitianOperator, hs_inner, is_psd, partial_trace, permute_systems

TP_TOL = 1e-9
GRAPH_RANK_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class QuantumChannel:
    kraus: tuple
    d_in: int
    d_out: int
    label: str = ""

    def __post_init__(self):
        ops = tuple(np.array(k, dtype=complex) for k in self.kraus)
        if not ops:
            raise ValueError("a channel needs at least one Kraus operator")
        for k in ops:
            if k.shape != (self.d_out, self.d_in):
                raise ValueError(f"Kraus operator of shape {k.shape}, expected {(self.d_out, self.d_in)}")
            k.setflags(write=False)
        tp = sum(k.conj().T @ k for k in ops)
        err = np.max(np.abs(tp - np.eye(self.d_in)))
        if err > TP_TOL:
            raise ValueError(f"Kraus operators are not trace preserving (error {err:.3g})")
        object.__setattr__(self, "kraus", ops)

    @classmethod
    def from_kraus(cls, kraus, label=""):
        kraus = [np.asarray(k, dtype=complex) for k in kraus]
        d_out, d_in = kraus[0].shape
        return cls(tuple(kraus), d_in, d_out, label)

    @cached_property
    def choi(self) -> HermitianOperator:
        return choi_from_kraus(self)

    @cached_property
    def graph(self) -> "NoncommutativeGraph":
        return ncgraph(self)

    def __call__(self, rho):
        return apply(self, rho)

    def __repr__(self):
        return f"QuantumChannel({self.label or 'unnamed'}, {self.d_in}->{self.d_out}, {len(self.kraus)} Kraus)"


def choi_from_kraus(ch: QuantumChannel) -> HermitianOperator:
    """Unnormalised Choi matrix on (input) (x) (output)."""
    j = np.zeros((ch.d_in * ch.d_out,) * 2, dtype=complex)
    for k in ch.kraus:
        # column vector sum_i |i> (x) K|i>
        v = k.T.reshape(-1)
        j += np.outer(v, v.conj())
    return HermitianOperator(j, (ch.d_in, ch.d_out))


def apply(ch: QuantumChannel, rho) -> np.ndarray:
    rho = np.asarray(rho.matrix if isinstance(rho, HermitianOperator) else rho, dtype=complex)
    if rho.shape != (ch.d_in, ch.d_in):
        raise ValueError(f"input of shape {rho.shape}, channel expects {ch.d_in}x{ch.d_in}")
    return sum(k @ rho @ k.conj().T for k in ch.kraus)


def tensor_channels(a: QuantumChannel, b: QuantumChannel) -> QuantumChannel:
    kraus = [np.kron(ka, kb) for ka in a.kraus for kb in b.kraus]
    return QuantumChannel(tuple(kraus), a.d_in * b.d_in, a.d_out * b.d_out,
                          f"({a.label})x({b.label})")


def tensor_choi(a: QuantumChannel, b: QuantumChannel) -> np.ndarray:
    """kron of two Choi matrices reordered from A1 B1 A2 B2 to A1 A2 B1 B2."""
    big = np.kron(a.choi.matrix, b.choi.matrix)
    return permute_systems(big, [a.d_in, a.d_out, b.d_in, b.d_out], [0, 2, 1, 3])


def complementary_channel(ch: QuantumChannel) -> QuantumChannel:
    """Environment output of the Stinespring isometry V = sum_i E_i (x) |i>_env.

    Kraus operators of the complement: (F_k)_{ij} = (E_i)_{kj}.
    """
    stack = np.stack(ch.kraus)  # (n_kraus, d_out, d_in)
    comp = [stack[:, k, :] for k in range(ch.d_out)]
    return QuantumChannel(tuple(comp), ch.d_in, len(ch.kraus), f"complement of {ch.label}")


def check_cptp(ch: QuantumChannel, tol: float = 1e-9) -> bool:
    j = ch.choi
    marg = partial_trace(j.matrix, j.dims, [0])
    return is_psd(j, tol) and np.max(np.abs(marg - np.eye(ch.d_in))) <= tol


@dataclass(frozen=True, eq=False)
class NoncommutativeGraph:
    """Orthonormal (Hilbert-Schmidt) basis of span{E_j^dag E_k}."""

    ambient_dim: int
    basis: tuple

    @property
    def dim(self) -> int:
        return len(self.basis)

    def project(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=complex)
        if t.shape != (self.ambient_dim, self.ambient_dim):
            raise ValueError(f"operator of shape {t.shape} does not act on C^{self.ambient_dim}")
        return sum((hs_inner(b, t) * b for b in self.basis), np.zeros_like(t))


def ncgraph(ch: QuantumChannel, tol: float = GRAPH_RANK_TOL) -> NoncommutativeGraph:
    basis = []
    for ej in ch.kraus:
        for ek in ch.kraus:
            v = ej.conj().T @ ek
            # two Gram-Schmidt passes for stability
            for _ in range(2):
                for b in basis:
                    v = v - hs_inner(b, v) * b
            nrm = np.linalg.norm(v)
            if nrm > tol:
                basis.append(v / nrm)
    return NoncommutativeGraph(ch.d_in, tuple(basis))


def sperp_residual(g: NoncommutativeGraph, t) -> float:
    """Frobenius norm of the projection of ``t`` onto S; zero iff t lies in S-perp."""
    t = np.asarray(t.matrix if isinstance(t, HermitianOperator) else t)
    return float(np.linalg.norm(g.project(t)))


# ---------------------------------------------------------------- constructors

def _ket(i, d):
    v = np.zeros(d, dtype=complex)
    v[i] = 1
    return v


def _ketbra(i, j, d):
    return np.outer(_ket(i, d), _ket(j, d).conj())


def identity(d: int) -> QuantumChannel:
    if int(d) < 1:
        raise ValueError("dimension must be positive")
    return QuantumChannel((np.eye(d, dtype=complex),), d, d, f"identity:{d}")


def amplitude_damping(gamma: float) -> QuantumChannel:
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"damping parameter {gamma} outside [0, 1]")
    e0 = _ketbra(0, 0, 2) + np.sqrt(1 - gamma) * _ketbra(1, 1, 2)
    e1 = np.sqrt(gamma) * _ketbra(0, 1, 2)
    return QuantumChannel((e0, e1), 2, 2, f"ad:{gamma:g}")


def cq_states(a: float) -> tuple[np.ndarray, np.ndarray]:
    if not 1 / np.sqrt(2) - 1e-12 <= a <= 1.0:
        raise ValueError(f"amplitude {a} outside [1/sqrt(2), 1]")
    b = np.sqrt(max(0.0, 1 - a * a))
    return np.array([a, b], dtype=complex), np.array([a, -b], dtype=complex)


def cq_two_state(a: float) -> QuantumChannel:
    """x -> |psi_x><psi_x| with psi_0 = a|0> + b|1>, psi_1 = a|0> - b|1>."""
    psi0, psi1 = cq_states(a)
    k0 = np.outer(psi0, _ket(0, 2))
    k1 = np.outer(psi1, _ket(1, 2))
    return QuantumChannel((k0, k1), 2, 2, f"cq:{a:g}")


def n_alpha(alpha: float) -> QuantumChannel:
    if not 0.0 < alpha <= np.pi / 4 + 1e-12:
        raise ValueError(f"angle {alpha} outside (0, pi/4]")
    e0 = np.sin(alpha) * _ketbra(0, 1, 3) + _ketbra(1, 2, 3)
    e1 = np.cos(alpha) * _ketbra(2, 1, 3) + _ketbra(1, 0, 3)
    return QuantumChannel((e0, e1), 3, 3, f"nalpha:{alpha:g}")


def check_stochastic(p, tol: float = 1e-9) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.ndim != 2:
        raise ValueError("channel matrix must be 2-D with rows indexed by inputs")
    if np.any(p < -tol) or np.max(np.abs(p.sum(axis=1) - 1)) > tol:
        raise ValueError("channel matrix is not row-stochastic")
    return np.clip(p, 0, None)


def classical_channel(p, label: str = "classical") -> QuantumChannel:
    """Kraus set {sqrt(N(y|x)) |y><x|} for the row-stochastic matrix p[x, y]."""
    p = check_stochastic(p)
    nx, ny = p.shape
    kraus = [np.sqrt(p[x, y]) * _ketbra(y, x, max(nx, ny))[:ny, :nx]
             for x in range(nx) for y in range(ny) if p[x, y] > 0]
    return QuantumChannel(tuple(kraus), nx, ny, label)


def random_channel(d_in: int, d_out: int, n_kraus: int, seed: int) -> QuantumChannel:
    """Channel from a Haar-random isometry C^d_in -> C^d_out (x) C^n_kraus."""
    rng = np.random.default_rng(seed)
    g = rng.normal(size=(d_out * n_kraus, d_in)) + 1j * rng.normal(size=(d_out * n_kraus, d_in))
    q, r = np.linalg.qr(g)
    q = q * (np.diag(r) / np.abs(np.diag(r)))
    kraus = q.reshape(n_kraus, d_out, d_in)
    return QuantumChannel(tuple(kraus), d_in, d_out, f"random:{d_in}x{d_out}x{n_kraus}:{seed}")


def random_stochastic(nx: int, ny: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    p = rng.random((nx, ny))
    return p / p.sum(axis=1, keepdims=True)


def pentagon_channel() -> np.ndarray:
    """Input x emits x or x+1 (mod 5): confusability graph is the 5-cycle."""
    p = np.zeros((5, 5))
    for x in range(5):
        p[x, x] = p[x, (x + 1) % 5] = 0.5
    return p


# ---------------------------------------------------------------- file format

def load_channel(path) -> QuantumChannel:
    """Read the JSON channel spec {"label", "d_in", "d_out", "kraus": [[[re, im], ...]]}."""
    data = json.loads(Path(path).read_text())
    kraus = []
    for op in data["kraus"]:
        arr = np.asarray(op, dtype=float)
        kraus.append(arr[..., 0] + 1j * arr[..., 1])
    return QuantumChannel(tuple(kraus), int(data["d_in"]), int(data["d_out"]),
                          data.get("label", Path(path).stem))


def dump_channel(ch: QuantumChannel, path) -> None:
    kraus = [[[[float(z.real), float(z.imag)] for z in row] for row in k] for k in ch.kraus]
    payload = {"label": ch.label, "d_in": ch.d_in, "d_out": ch.d_out, "kraus": kraus}
    Path(path).write_text(json.dumps(payload, indent=1) + "\n")
