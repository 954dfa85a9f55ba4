"""Brute-force and unreduced reference computations for small instances.

The full-code oracle optimises over the whole Choi matrix Z of the bipartite
code on [A_i, A_o, B_i, B_o] (message in, channel in, channel out, message
out) with no symmetry reduction, so it checks the reduced success-probability
SDP independently.
"""
from __future__ import annotations

import itertools

import networkx as nx
import numpy as np

from . import operators as ops
from .channels import QuantumChannel, check_stochastic
from .sdp import Problem, SolverError, inner, kron

MAX_EMBEDDED_SIDE = 128


def _code_dims(ch: QuantumChannel, m: int):
    return [m, ch.d_in, ch.d_out, m]


def _message_projector(m: int, d_mid: int) -> np.ndarray:
    """D = sum_k |k><k|_{A_i} (x) 1_{A_o B_i} (x) |k><k|_{B_o}."""
    d = np.zeros((m * m, m * m))
    for k in range(m):
        d[k * m + k, k * m + k] = 1.0
    # D lives on A_i B_o; move it to the [A_i, A_o, B_i, B_o] layout
    full = np.kron(d, np.eye(d_mid))
    return ops.permute_systems(full, [m, m, d_mid], [0, 2, 1])


def full_code_success_prob(ch: QuantumChannel, m: int, ppt: bool = True, **opts) -> float:
    """Optimal success probability over all NS (and optionally PPT) codes, unreduced."""
    return full_code_solve(ch, m, ppt, **opts)[0]


def full_code_solve(ch: QuantumChannel, m: int, ppt: bool = True, **opts):
    """Value and optimal code Choi matrix Z of the unreduced program."""
    if m < 1:
        raise ValueError("number of messages must be >= 1")
    dims = _code_dims(ch, m)
    side = int(np.prod(dims))
    if 2 * side > MAX_EMBEDDED_SIDE:
        raise ValueError(f"full-code program of embedded side {2 * side} exceeds {MAX_EMBEDDED_SIDE}")
    mi, da, db, mo = dims
    p = Problem()
    Z = p.hermitian("Z", side)
    p.psd(Z)
    p.eq(Z.ptrace(dims, [0, 2]), np.eye(mi * db))
    if ppt:
        p.psd(Z.ptranspose(dims, [2, 3]))
    # no signalling from A to B and from B to A
    p.eq(Z.ptrace(dims, [0, 2, 3]), kron(np.eye(mi) / mi, Z.ptrace(dims, [2, 3])))
    p.eq(Z.ptrace(dims, [0, 1, 2]), kron(Z.ptrace(dims, [0, 1]), np.eye(db) / db))
    jt = np.kron(np.kron(np.eye(mi), ch.choi.matrix.T), np.eye(mo))
    p.maximize(inner(jt @ _message_projector(m, da * db), Z) / m)
    sol = p.solve(**opts)
    if sol.status != "optimal":
        raise SolverError(sol, f"full_code_success_prob({ch.label}, m={m}, ppt={ppt})")
    return sol.primal_objective, sol.assignments["Z"]


def compose_choi(ch: QuantumChannel, z, m: int | None = None) -> np.ndarray:
    """Choi matrix on A_i B_o of the channel obtained by plugging ch into the code z."""
    z = np.asarray(z.matrix if isinstance(z, ops.HermitianOperator) else z)
    mid = ch.d_in * ch.d_out
    if m is None:
        m = int(round(np.sqrt(z.shape[0] / mid)))
    dims = _code_dims(ch, m)
    if z.shape != (m * mid * m,) * 2:
        raise ValueError(f"code Choi matrix of shape {z.shape} does not fit dims {dims}")
    jt = np.kron(np.kron(np.eye(m), ch.choi.matrix.T), np.eye(m))
    return ops.partial_trace(jt @ z, dims, [0, 3])


def brute_force_classical_success(pmat, m: int) -> float:
    """Best average success over deterministic unassisted encoders and decoders."""
    pmat = check_stochastic(pmat)
    nx_, ny = pmat.shape
    if nx_ > 4 or ny > 4 or m > 3 or m < 1:
        raise ValueError("brute force limited to |X|, |Y| <= 4 and 1 <= m <= 3")
    best = 0.0
    for dec in itertools.product(range(m), repeat=ny):
        hit = np.zeros((m, ny))
        hit[list(dec), range(ny)] = 1.0
        # the best encoder picks, per message, the input maximising its hit mass
        per_msg = (pmat @ hit.T).max(axis=0)
        best = max(best, per_msg.sum() / m)
    return float(best)


def confusability_graph(pmat) -> nx.Graph:
    pmat = check_stochastic(pmat)
    support = pmat > 0
    g = nx.Graph()
    g.add_nodes_from(range(pmat.shape[0]))
    for a, b in itertools.combinations(range(pmat.shape[0]), 2):
        if np.any(support[a] & support[b]):
            g.add_edge(a, b)
    return g


def zero_error_independent_set(pmat) -> int:
    """Largest set of pairwise non-confusable inputs (exact)."""
    pmat = check_stochastic(pmat)
    if pmat.shape[0] > 12:
        raise ValueError("independent-set oracle limited to 12 inputs")
    comp = nx.complement(confusability_graph(pmat))
    _, size = nx.max_weight_clique(comp, weight=None)
    return int(size)
