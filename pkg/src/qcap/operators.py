"""Dense linear algebra on labelled tensor-product spaces.

Array-level helpers accept a stack of square matrices (leading batch axes are
allowed) plus the list of subsystem dimensions, so the same code serves plain
operators and the coefficient stacks of the SDP modelling layer.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

HERM_TOL = 1e-12


def _check_dims(x: np.ndarray, dims: Sequence[int]) -> list[int]:
    dims = [int(d) for d in dims]
    if any(d < 1 for d in dims):
        raise ValueError(f"subsystem dimensions must be positive, got {dims}")
    side = int(np.prod(dims))
    if x.shape[-1] != side or x.shape[-2] != side:
        raise ValueError(f"matrix of shape {x.shape[-2:]} does not match dims {dims}")
    return dims


def _check_systems(systems, n: int) -> list[int]:
    if isinstance(systems, (int, np.integer)):
        systems = [systems]
    systems = [int(s) for s in systems]
    for s in systems:
        if not 0 <= s < n:
            raise ValueError(f"subsystem index {s} out of range for {n} subsystems")
    return systems


def kron(*mats) -> np.ndarray:
    """Kronecker product of two or more matrices."""
    out = np.asarray(mats[0])
    for m in mats[1:]:
        out = np.kron(out, np.asarray(m))
    return out


def partial_trace(x, dims: Sequence[int], keep) -> np.ndarray:
    """Trace out every subsystem not listed in ``keep``.

    Kept subsystems stay in their original order.
    """
    x = np.asarray(x)
    dims = _check_dims(x, dims)
    k = len(dims)
    keep = sorted(set(_check_systems(keep, k)))
    if not keep:
        raise ValueError("keep must name at least one subsystem")
    batch = x.shape[:-2]
    nb = len(batch)
    t = x.reshape(batch + tuple(dims) * 2)
    rows = list(range(k))
    cols = [k + i if i in keep else i for i in range(k)]
    bidx = list(range(2 * k, 2 * k + nb))
    out_idx = bidx + [rows[i] for i in keep] + [cols[i] for i in keep]
    res = np.einsum(t, bidx + rows + cols, out_idx)
    side = int(np.prod([dims[i] for i in keep]))
    return res.reshape(batch + (side, side))


def partial_transpose(x, dims: Sequence[int], systems) -> np.ndarray:
    """Transpose the listed subsystems: (|ij><kl|)^{T_B} = |il><kj|."""
    x = np.asarray(x)
    dims = _check_dims(x, dims)
    k = len(dims)
    systems = _check_systems(systems, k)
    batch = x.shape[:-2]
    nb = len(batch)
    t = x.reshape(batch + tuple(dims) * 2)
    axes = list(range(nb + 2 * k))
    for s in systems:
        axes[nb + s], axes[nb + k + s] = axes[nb + k + s], axes[nb + s]
    return t.transpose(axes).reshape(x.shape)


def permute_systems(x, dims: Sequence[int], perm: Sequence[int]) -> np.ndarray:
    """Reorder tensor factors; output factor ``j`` is input factor ``perm[j]``."""
    x = np.asarray(x)
    dims = _check_dims(x, dims)
    k = len(dims)
    perm = [int(p) for p in perm]
    if sorted(perm) != list(range(k)):
        raise ValueError(f"{perm} is not a permutation of {k} subsystems")
    batch = x.shape[:-2]
    nb = len(batch)
    t = x.reshape(batch + tuple(dims) * 2)
    axes = list(range(nb)) + [nb + p for p in perm] + [nb + k + p for p in perm]
    return t.transpose(axes).reshape(x.shape)


def hermitian_part(m: np.ndarray, tol: float = HERM_TOL) -> np.ndarray:
    """Return (m + m^dag)/2, rejecting matrices that are not Hermitian to ``tol``."""
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    skew = np.max(np.abs(m - m.conj().T), initial=0.0)
    if skew > tol:
        raise ValueError(f"matrix is not Hermitian (max |H - H^dag| = {skew:.3g})")
    return (m + m.conj().T) / 2


@dataclass(frozen=True)
class HermitianOperator:
    """Hermitian matrix tagged with subsystem dimensions."""

    matrix: np.ndarray
    dims: tuple = field(default=None)

    def __post_init__(self):
        m = hermitian_part(self.matrix)
        dims = (m.shape[0],) if self.dims is None else tuple(int(d) for d in self.dims)
        _check_dims(m, dims)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "dims", dims)

    @property
    def side(self) -> int:
        return self.matrix.shape[0]

    def trace(self) -> float:
        return float(np.real(np.trace(self.matrix)))

    def ptrace(self, keep) -> "HermitianOperator":
        keep = sorted(set(_check_systems(keep, len(self.dims))))
        return HermitianOperator(partial_trace(self.matrix, self.dims, keep),
                                 [self.dims[i] for i in keep])

    def ptranspose(self, systems) -> "HermitianOperator":
        return HermitianOperator(partial_transpose(self.matrix, self.dims, systems), self.dims)

    def __matmul__(self, other):
        return self.matrix @ np.asarray(other)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.matrix, dtype=dtype)


def _as_hermitian(h) -> np.ndarray:
    if isinstance(h, HermitianOperator):
        return h.matrix
    return hermitian_part(h)


def spectral_decompose(h) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues in descending order and the matching orthonormal eigenvectors."""
    m = _as_hermitian(h)
    w, v = np.linalg.eigh(m)
    return w[::-1].copy(), v[:, ::-1].copy()


def eigvalsh(h) -> np.ndarray:
    return np.linalg.eigvalsh(_as_hermitian(h))


def operator_norm(h) -> float:
    """Largest absolute eigenvalue of a Hermitian operator."""
    w = eigvalsh(h)
    return float(np.max(np.abs(w)))


def trace_norm(m) -> float:
    m = np.asarray(m.matrix if isinstance(m, HermitianOperator) else m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"trace norm needs a square matrix, got shape {m.shape}")
    return float(np.sum(np.linalg.svd(m, compute_uv=False)))


def hs_inner(a, b) -> complex:
    """Hilbert-Schmidt inner product tr(a^dag b)."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    return complex(np.vdot(a, b))


def is_psd(h, tol: float = 1e-9) -> bool:
    return bool(eigvalsh(h).min() >= -tol)


def binary_entropy(p: float) -> float:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"probability {p} outside [0, 1]")
    if p == 0.0 or p == 1.0:
        return 0.0
    return float(-p * np.log2(p) - (1 - p) * np.log2(1 - p))


def von_neumann_entropy(rho, tol: float = 1e-9) -> float:
    """Entropy in bits, with 0 log 0 = 0."""
    w = eigvalsh(rho)
    if w.min() < -tol:
        raise ValueError(f"state has negative eigenvalue {w.min():.3g}")
    if abs(w.sum() - 1.0) > tol:
        raise ValueError(f"state has trace {w.sum():.12g}, expected 1")
    w = w[w > 0]
    return float(-np.sum(w * np.log2(w)))


def sqrtm_psd(h) -> np.ndarray:
    w, v = np.linalg.eigh(_as_hermitian(h))
    return (v * np.sqrt(np.clip(w, 0, None))) @ v.conj().T
