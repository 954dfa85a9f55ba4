"""Acceptance criteria, shared by ``qcap selftest`` and the pytest suite.

Each criterion returns an :class:`Outcome`; ``run`` executes them in order and
turns any exception into a failed outcome with the error as detail.  Seeds for
the random channel suites come from QCAP_SEED (default 0).
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

from . import bounds as B
from . import channels as C
from . import oracles
from .sdp import Problem

NS, NSPPT = B.CodeClass.NS, B.CodeClass.NS_PPT
EPS_GRID = (0.0, 0.01, 0.1)
SUITE_SIZE = 5


@dataclass
class Outcome:
    number: int
    title: str
    passed: bool
    detail: str

    def line(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        return f"[{mark}] {self.number:2d} {self.title}: {self.detail}"


def base_seed() -> int:
    return int(os.environ.get("QCAP_SEED", 0))


def qubit_suite(seed: int | None = None) -> list:
    """Seeded random qubit channels with two Kraus operators."""
    s = base_seed() if seed is None else seed
    return [C.random_channel(2, 2, 2, s + k) for k in range(SUITE_SIZE)]


def ad_capacity(gamma: float) -> float:
    return math.log2(1 + math.sqrt(1 - gamma))


def _gamma_grid(stop: float, step: float) -> list[float]:
    return [round(k * step, 10) for k in range(int(round(stop / step)) + 1)]


def _worst(pairs) -> tuple[float, str]:
    """Largest error in (error, label) pairs."""
    err, label = max(pairs, key=lambda p: p[0])
    return err, label


# ----------------------------------------------------------------- criteria

def c01_ad_strong_converse() -> Outcome:
    rows = []
    for g in _gamma_grid(1.0, 0.1):
        ch = C.amplitude_damping(g)
        want = ad_capacity(g)
        rows.append((abs(B.beta(ch).value_log - want), f"beta at gamma={g}"))
        rows.append((abs(B.zeta(ch).value_log - want), f"zeta at gamma={g}"))
    err, where = _worst(rows)
    return Outcome(1, "amplitude damping C_beta = C_zeta = log2(1+sqrt(1-g))", err <= 1e-6,
                   f"max error {err:.2e} ({where}), tol 1e-6")


def c02_identity() -> Outcome:
    rows = []
    for d in (2, 3, 4):
        ch = C.identity(d)
        rows.append((abs(B.beta(ch).value_linear - d), f"beta d={d}"))
        rows.append((abs(B.zeta(ch).value_linear - d), f"zeta d={d}"))
    err, where = _worst(rows)
    return Outcome(2, "identity beta = zeta = d", err <= 1e-7, f"max error {err:.2e} ({where}), tol 1e-7")


def c03_nalpha() -> Outcome:
    ok, notes = True, []
    for a in (math.pi / 16, math.pi / 8, math.pi / 4):
        ch = C.n_alpha(a)
        cb = B.beta(ch).value_log
        cz = B.zeta(ch).value_log
        m0 = B.zero_error_m0(ch, NSPPT).value_linear
        w = B.lovasz_witness_value(ch, B.nalpha_witness(a))
        want_w = 1 + 1 / math.cos(a) ** 2
        good = (abs(cb - 1) <= 1e-6 and cz >= 1 + 1e-4 and abs(m0 - 2) <= 1e-5
                and w > 2 and abs(w - want_w) <= 1e-9)
        ok &= good
        notes.append(f"a={a:.4f}: C_beta {cb:.8f} C_zeta {cz:.6f} M0 {m0:.7f} witness {w:.6f}")
    w4 = B.lovasz_witness_value(C.n_alpha(math.pi / 4), B.nalpha_witness(math.pi / 4))
    ok &= abs(w4 - 3) <= 1e-9
    return Outcome(3, "N_alpha: C_beta = 1 < C_zeta, M0 = 2, witness > 2", ok, "; ".join(notes))


def c04_additivity() -> Outcome:
    s = base_seed()
    pairs = [(C.random_channel(2, 2, 2, 100 + s + 2 * k), C.random_channel(2, 2, 2, 101 + s + 2 * k))
             for k in range(SUITE_SIZE)]
    pairs.append((C.amplitude_damping(0.3), C.amplitude_damping(0.6)))
    rows = []
    for a, b in pairs:
        joint = B.beta(C.tensor_channels(a, b)).value_log
        rows.append((abs(joint - B.beta(a).value_log - B.beta(b).value_log), f"{a.label} x {b.label}"))
    err, where = _worst(rows)
    return Outcome(4, "C_beta additive on tensor products", err <= 1e-5,
                   f"max deviation {err:.2e} ({where}), tol 1e-5")


def c05_full_code_oracle() -> Outcome:
    rows = []
    for ch in qubit_suite():
        for cls, ppt in ((NSPPT, True), (NS, False)):
            full = oracles.full_code_success_prob(ch, 2, ppt=ppt)
            red = B.success_prob(ch, 2, cls).value_linear
            rows.append((abs(full - red), f"{ch.label} {cls.value}"))
    err, where = _worst(rows)
    return Outcome(5, "reduced success SDP = unreduced full-code SDP", err <= 1e-5,
                   f"max deviation {err:.2e} ({where}), tol 1e-5")


def c06_duality() -> Outcome:
    rows = []
    for ch in qubit_suite():
        for cls in (NSPPT, NS):
            p = B.success_prob(ch, 2, cls).value_linear
            d = B.success_prob_dual(ch, 2, cls).value_linear
            rows.append((abs(p - d), f"success {ch.label} {cls.value}"))
        fp = B.f_plus(ch, 2)
        rows.append((fp.diagnostics["duality_gap"], f"f_plus {ch.label}"))
    err, where = _worst(rows)
    return Outcome(6, "primal and dual programs agree", err <= 1e-6, f"max deviation {err:.2e} ({where}), tol 1e-6")


def c07_orderings() -> Outcome:
    slack = 1e-7
    bad = []
    checked = 0
    for ch in qubit_suite():
        for eps in EPS_GRID:
            c1p = B.one_shot_capacity(ch, eps, NSPPT).value_log
            c1 = B.one_shot_capacity(ch, eps, NS).value_log
            re = B.ht_bound(ch, eps).value_log
            rep = B.ht_bound(ch, eps, ppt=True).value_log
            for lo, hi, what in ((c1p, c1, "C1_NSPPT <= C1_NS"), (c1, re, "C1_NS <= R_E"),
                                 (c1p, rep, "C1_NSPPT <= R_E_PPT")):
                checked += 1
                if lo > hi + slack:
                    bad.append(f"{what} fails for {ch.label} eps={eps} ({lo:.9f} > {hi:.9f})")
        for m in (2, 3):
            f = B.success_prob(ch, m, NSPPT).value_linear
            for hi, what in ((B.f_plus(ch, m).value_linear, "f <= f_plus"),
                             (B.f_tilde_plus(ch, m).value_linear, "f <= f_tilde_plus")):
                checked += 1
                if f > hi + slack:
                    bad.append(f"{what} fails for {ch.label} m={m} ({f:.9f} > {hi:.9f})")
    detail = f"{checked} orderings checked" + (": " + "; ".join(bad) if bad else ", all hold")
    return Outcome(7, "bound orderings", not bad, detail)


def c08_strictness() -> Outcome:
    best_ad, at_ad = -np.inf, None
    for g in _gamma_grid(1.0, 0.05):
        ch = C.amplitude_damping(g)
        diff = B.ht_bound(ch, 0.01).value_log - B.one_shot_capacity(ch, 0.01, NS).value_log
        if diff > best_ad:
            best_ad, at_ad = diff, g
    best_cq, at_cq = -np.inf, None
    for a in np.linspace(1 / math.sqrt(2), 1.0, 21):
        ch = C.cq_two_state(float(a))
        diff = B.ht_bound(ch, 0.005).value_log - B.one_shot_capacity(ch, 0.005, NS).value_log
        if diff > best_cq:
            best_cq, at_cq = diff, float(a)
    ok = best_ad >= 1e-4 and best_cq >= 1e-4
    return Outcome(8, "R_E strictly above C1_NS somewhere", ok,
                   f"AD eps=0.01 max gap {best_ad:.3e} bits at gamma={at_ad}; "
                   f"cq eps=0.005 max gap {best_cq:.3e} bits at a={at_cq:.4f}; need 1e-4")


def c09_classical() -> Outcome:
    s = base_seed()
    shapes = [(2, 2), (2, 3), (3, 2), (3, 4), (4, 4)]
    rows = []
    for k, (nx_, ny) in enumerate(shapes):
        pmat = C.random_stochastic(nx_, ny, 200 + s + k)
        ch = C.classical_channel(pmat, label=f"stoch:{nx_}x{ny}:{200 + s + k}")
        for eps in (0.0, 0.1, 0.25):
            c1 = B.one_shot_capacity(ch, eps, NS).value_log
            c1p = B.one_shot_capacity(ch, eps, NSPPT).value_log
            ppv = B.ppv_lp(pmat, eps).value_log
            rows.append((max(abs(c1 - ppv), abs(c1p - ppv)), f"{ch.label} eps={eps}"))
    err, where = _worst(rows)
    noiseless = []
    for kk in (2, 3, 4):
        ch = C.classical_channel(np.eye(kk), label=f"noiseless:{kk}")
        for eps in (0.0, 0.1, 0.25):
            want = kk / (1 - eps)
            noiseless.append((abs(B.one_shot_capacity(ch, eps, NS).value_linear - want),
                              f"k={kk} eps={eps}"))
    err_k, where_k = _worst(noiseless)
    ok = err <= 1e-6 and err_k <= 1e-7
    return Outcome(9, "classical channels: C1_NS = C1_NSPPT = PPV, noiseless k/(1-eps)", ok,
                   f"max deviation {err:.2e} ({where}), tol 1e-6; noiseless {err_k:.2e} ({where_k}), tol 1e-7")


def c10_zero_error() -> Outcome:
    rows = []
    for ch in qubit_suite() + [C.n_alpha(math.pi / 8)]:
        for cls in (NS, NSPPT):
            m0 = B.zero_error_m0(ch, cls).value_linear
            c1 = B.one_shot_capacity(ch, 0.0, cls).value_linear
            rows.append((abs(m0 - c1), f"{ch.label} {cls.value}"))
    err, where = _worst(rows)
    pent = C.pentagon_channel()
    m0_pent = B.zero_error_m0(C.classical_channel(pent, "pentagon"), NS).value_linear
    indep = oracles.zero_error_independent_set(pent)
    ok = err <= 1e-6 and abs(m0_pent - 2.5) <= 1e-6 and indep == 2
    return Outcome(10, "zero-error M0 = 2^C1(eps=0); pentagon", ok,
                   f"max deviation {err:.2e} ({where}), tol 1e-6; pentagon NS {m0_pent:.8f} vs independent set {indep}")


def c11_multiplicativity() -> Outcome:
    ad = C.amplitude_damping(0.3)
    f2 = B.success_prob(C.tensor_channels(ad, ad), 4, NSPPT).value_linear
    fp = B.f_plus(ad, 2).value_linear
    ok = f2 <= fp ** 2 + 1e-6
    return Outcome(11, "f(AD x AD, 4) <= f_plus(AD, 2)^2", ok, f"{f2:.9f} vs {fp ** 2:.9f}")


def c12_decay() -> Outcome:
    ad = C.amplitude_damping(0.5)
    r = B.beta(ad).value_log + 0.1
    f = B.f_plus(ad, 2.0 ** r).value_linear
    decay = B.strong_converse_decay(ad, r, 50)
    ok = f <= 1 - 1e-4 and decay > 0.99
    return Outcome(12, "strong converse decay for AD_0.5 at C_beta + 0.1", ok,
                   f"f_plus {f:.9f} (need <= 0.9999); error bound at n=50 {decay:.6f} (need > 0.99)")


def c13_figures() -> Outcome:
    worst5, at5 = np.inf, None
    for g in _gamma_grid(0.75, 0.05):
        ch = C.amplitude_damping(g)
        margin = B.ea_capacity_search(ch).value_log - B.beta(ch).value_log
        if margin < worst5:
            worst5, at5 = margin, g
    worst6, at6 = -np.inf, None
    for g in _gamma_grid(1.0, 0.05):
        excess = B.ad_holevo_lower(g) - B.beta(C.amplitude_damping(g)).value_log
        if excess > worst6:
            worst6, at6 = excess, g
    ok = worst5 > 0 and worst6 <= 1e-7
    return Outcome(13, "C_beta < C_E on g <= 0.75; Holevo lower bound <= C_beta", ok,
                   f"min C_E - C_beta {worst5:.4f} at gamma={at5}; "
                   f"max lower - C_beta {worst6:.2e} at gamma={at6}")


def lambda_max_sdp(h: np.ndarray) -> float:
    p = Problem()
    t = p.scalar("t")
    p.psd(t * np.eye(h.shape[0]) - h)
    p.minimize(t)
    return p.solve().primal_objective


def trace_norm_sdp(h: np.ndarray) -> float:
    p = Problem()
    P = p.hermitian("P", h.shape[0])
    N = p.hermitian("N", h.shape[0])
    p.psd(P)
    p.psd(N)
    p.eq(P - N, h)
    p.minimize(P.trace() + N.trace())
    return p.solve().primal_objective


def random_hermitian(side: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    g = rng.normal(size=(side, side)) + 1j * rng.normal(size=(side, side))
    return (g + g.conj().T) / 2


def c14_solver_unit() -> Outcome:
    s = base_seed()
    rows = []
    for k in range(10):
        h = random_hermitian(1 + k % 8, 300 + s + k)
        w = np.linalg.eigvalsh(h)
        rows.append((abs(lambda_max_sdp(h) - w.max()), f"lambda_max side {h.shape[0]}"))
        rows.append((abs(trace_norm_sdp(h) - np.abs(w).sum()), f"trace norm side {h.shape[0]}"))
    err, where = _worst(rows)
    h = random_hermitian(6, 300 + s)
    p1 = Problem()
    t = p1.scalar("t")
    p1.psd(t * np.eye(6) - h)
    p1.minimize(t)
    a, b = p1.solve(), p1.solve()
    same = (a.primal_objective == b.primal_objective and a.iterations == b.iterations
            and np.array_equal(a.x, b.x) and np.array_equal(a.z, b.z))
    ok = err <= 1e-7 and same
    return Outcome(14, "solver unit suite", ok,
                   f"max error {err:.2e} ({where}), tol 1e-7; re-run bit-identical: {same}")


CRITERIA = [c01_ad_strong_converse, c02_identity, c03_nalpha, c04_additivity, c05_full_code_oracle,
            c06_duality, c07_orderings, c08_strictness, c09_classical, c10_zero_error,
            c11_multiplicativity, c12_decay, c13_figures, c14_solver_unit]


def run_one(number: int) -> Outcome:
    fn = CRITERIA[number - 1]
    try:
        return fn()
    except Exception as exc:  # a crash is a failed criterion, reported with its cause
        return Outcome(number, fn.__name__[4:].replace("_", " "), False, f"error: {exc}")


def run(only=None) -> list[Outcome]:
    numbers = range(1, len(CRITERIA) + 1) if only is None else only
    for k in numbers:
        if not 1 <= k <= len(CRITERIA):
            raise ValueError(f"no criterion {k}; valid numbers are 1..{len(CRITERIA)}")
    return [run_one(k) for k in numbers]
