"""Dense primal-dual interior-point method for small conic programs.

Solves  min c.x  s.t.  A x = b,  G x + s = h,  s in K  together with its dual
max -h.z - b.y  s.t.  G^T z + A^T y + c = 0,  z in K,  where K is a product of
a nonnegative orthant and real symmetric PSD blocks.

The iteration runs on the homogeneous self-dual embedding (so infeasibility
and unboundedness come out as certificates rather than stalls), uses
Nesterov-Todd scaling and Mehrotra predictor-corrector steps.  Free variables
stay free; the KKT system is solved in its reduced indefinite form with LU
and iterative refinement.
"""
from __future__ import annotations

import logging
import os
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .model import ConicForm, smat, svec

log = logging.getLogger(__name__)

STEP_FRACTION = 0.98
CENTERING_EXPONENT = 3
SHORT_STEP = 0.1
FALLBACK_SIGMA = 0.5
KKT_RESIDUAL_TOL = 1e-10
STALL_ITERS = 15
KKT_METHODS = ("chol", "qr")
BACKTRACK = 0.5
MAX_BACKTRACKS = 30


def default_options() -> dict:
    """Solver defaults; QCAP_FEAS_TOL / QCAP_GAP_TOL / QCAP_MAX_ITER override them."""
    return {
        "feas_tol": float(os.environ.get("QCAP_FEAS_TOL", 1e-8)),
        "gap_tol": float(os.environ.get("QCAP_GAP_TOL", 1e-8)),
        "max_iter": int(os.environ.get("QCAP_MAX_ITER", 200)),
    }


@dataclass
class SolverSolution:
    status: str
    primal_objective: float
    dual_objective: float
    gap: float
    primal_residual: float
    dual_residual: float
    iterations: int
    assignments: dict = field(default_factory=dict)
    x: np.ndarray | None = None
    y: np.ndarray | None = None
    z: np.ndarray | None = None
    s: np.ndarray | None = None
    complementarity: float = float("nan")

    @property
    def value(self) -> float:
        return self.primal_objective

    def summary(self) -> dict:
        return {"status": self.status, "primal": self.primal_objective, "dual": self.dual_objective,
                "gap": self.gap, "primal_residual": self.primal_residual,
                "dual_residual": self.dual_residual, "iterations": self.iterations,
                "complementarity": self.complementarity}


class SolverError(RuntimeError):
    def __init__(self, solution: SolverSolution, context: str = ""):
        self.solution = solution
        msg = f"solver finished with status {solution.status!r}"
        if context:
            msg = f"{context}: {msg}"
        msg += (f" (gap {solution.gap:.2e}, pres {solution.primal_residual:.2e},"
                f" dres {solution.dual_residual:.2e}, {solution.iterations} iterations)")
        super().__init__(msg)


class Cone:
    """Orthant of length l followed by svec-stored symmetric blocks."""

    def __init__(self, l: int, blocks):
        self.l = l
        self.blocks = list(blocks)
        self.offsets = []
        pos = l
        for k in self.blocks:
            self.offsets.append((pos, pos + k * (k + 1) // 2))
            pos += k * (k + 1) // 2
        self.dim = pos
        self.degree = l + sum(self.blocks)

    def split(self, v):
        return v[: self.l], [smat(v[a:b], k) for (a, b), k in zip(self.offsets, self.blocks)]

    def join(self, orth, mats):
        return np.concatenate([orth] + [svec(m) for m in mats])

    def unit(self):
        return self.join(np.ones(self.l), [np.eye(k) for k in self.blocks])


class Scaling:
    """Nesterov-Todd scaling point W with W z = W^{-T} s = lambda."""

    def __init__(self, cone: Cone, s: np.ndarray, z: np.ndarray):
        self.cone = cone
        so, sm = cone.split(s)
        zo, zm = cone.split(z)
        self.w = np.sqrt(so / zo)
        self.lam_o = np.sqrt(so * zo)
        self.R, self.Rinv, self.lam = [], [], []
        for S, Z in zip(sm, zm):
            ls = _factor(S)
            lz = _factor(Z)
            u, lam, vt = np.linalg.svd(lz.T @ ls)
            isq = 1 / np.sqrt(lam)
            self.R.append(ls @ vt.T * isq)
            self.Rinv.append((u * isq).T @ lz.T)
            self.lam.append(lam)

    def lam_vec(self):
        return self.cone.join(self.lam_o, [np.diag(l) for l in self.lam])

    # W u, W^{-T} u, W^T u, and (W^T W)^{-1} u for cone vectors u
    def apply(self, u):
        o, m = self.cone.split(u)
        return self.cone.join(o * self.w, [R.T @ M @ R for R, M in zip(self.R, m)])

    def apply_inv(self, u):
        o, m = self.cone.split(u)
        return self.cone.join(o / self.w, [Ri.T @ M @ Ri for Ri, M in zip(self.Rinv, m)])

    def apply_inv_t(self, u):
        o, m = self.cone.split(u)
        return self.cone.join(o / self.w, [Ri @ M @ Ri.T for Ri, M in zip(self.Rinv, m)])

    def apply_t(self, u):
        o, m = self.cone.split(u)
        return self.cone.join(o * self.w, [R @ M @ R.T for R, M in zip(self.R, m)])

    def apply_wtw(self, u):
        o, m = self.cone.split(u)
        return self.cone.join(o * self.w ** 2,
                              [R @ (R.T @ M @ R) @ R.T for R, M in zip(self.R, m)])

    def scale_columns(self, G, supports):
        """W^{-T} applied to every column of G; ``supports`` lists the nonzero columns per block."""
        out = np.zeros_like(G)
        l = self.cone.l
        if l:
            cols = supports[0]
            out[:l, cols] = G[:l, cols] / self.w[:, None]
        for (a, b), k, Ri, cols in zip(self.cone.offsets, self.cone.blocks, self.Rinv, supports[1:]):
            mats = smat(G[a:b, cols].T, k)
            out[a:b, cols] = svec(Ri @ mats @ Ri.T).T
        return out

    def lam_divide(self, d):
        """Solve lambda o u = d (Jordan product) for u."""
        o, m = self.cone.split(d)
        out = []
        for lam, M in zip(self.lam, m):
            out.append(2 * M / (lam[:, None] + lam[None, :]))
        return self.cone.join(o / self.lam_o, out)


def _factor(S):
    try:
        return np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        w, v = np.linalg.eigh((S + S.T) / 2)
        return v * np.sqrt(np.clip(w, 1e-300, None))


def interior(cone: Cone, v) -> bool:
    """True when every block of v factors by Cholesky, i.e. v is numerically inside K."""
    o, m = cone.split(v)
    if o.size and o.min() <= 0:
        return False
    try:
        for M in m:
            np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        return False
    return True


def restore_structure(cone: Cone, v):
    """Project embedded blocks back onto [[X, -Y], [Y, X]].

    The projection keeps PSD matrices PSD and does not change inner products with
    structured vectors, so it leaves G^T z and s.z alone.  Without it rounding
    seeds a component of z that no residual controls and that grows on
    degenerate faces until the scaling breaks down.
    """
    o, m = cone.split(v)
    out = []
    for M in m:
        k = M.shape[0] // 2
        a = (M[:k, :k] + M[k:, k:]) / 2
        b = (M[k:, :k] - M[:k, k:]) / 2
        out.append(np.block([[a, -b], [b, a]]))
    return cone.join(o, out)


def jordan(cone: Cone, u, v):
    uo, um = cone.split(u)
    vo, vm = cone.split(v)
    return cone.join(uo * vo, [(a @ b + b @ a) / 2 for a, b in zip(um, vm)])


def max_step(cone: Cone, lam: list, lam_o: np.ndarray, d: np.ndarray) -> float:
    """Largest alpha with lambda + alpha d in K (d in scaled coordinates)."""
    o, m = cone.split(d)
    alpha = np.inf
    if cone.l:
        ratio = o / lam_o
        mn = ratio.min()
        if mn < 0:
            alpha = min(alpha, -1 / mn)
    for l, M in zip(lam, m):
        isq = 1 / np.sqrt(l)
        mn = np.linalg.eigvalsh(M * isq[:, None] * isq[None, :]).min()
        if mn < 0:
            alpha = min(alpha, -1 / mn)
    return alpha


class KKT:
    """Reduced KKT system for the current scaling.

    With A^T = [Q1 Q2] [R; 0] the step is dx = Q1 R^-T by + Q2 u, where u solves
    (B^T B) u = t for B = W^-T G Q2.  ``method="chol"`` factors B^T B directly;
    ``method="qr"`` uses the triangular factor of B, which avoids squaring the
    condition number while assembling and is the fallback once mu gets small.
    """

    def __init__(self, form: ConicForm, cone: Cone, W: Scaling, nullspace, supports,
                 reg: float = 0.0, method: str = "chol", Gs=None):
        self.form, self.cone, self.W = form, cone, W
        self.Q1, self.Q2, self.RA = nullspace
        self.Gs = W.scale_columns(form.G, supports) if Gs is None else Gs
        self.method = method
        if method == "chol":
            H = _block_gram(self.Gs, cone, supports)
            if self.RA.size:
                H = self.Q2.T @ H @ self.Q2
            if reg:
                H[np.diag_indices_from(H)] += reg
            self.L = sla.cho_factor(H, lower=True, check_finite=False)
            d = np.abs(np.diag(self.L[0]))
        else:
            B = self.Gs @ self.Q2 if self.RA.size else self.Gs
            if reg:
                B = np.vstack([B, np.sqrt(reg) * np.eye(B.shape[1])])
            self.RB = np.linalg.qr(B, mode="r")
            d = np.abs(np.diag(self.RB))
        if d.size and (not np.all(np.isfinite(d)) or d.min() <= 1e-14 * max(d.max(), 1.0)):
            raise np.linalg.LinAlgError("scaled constraint matrix is rank deficient")

    def _inner_solve(self, t):
        if self.method == "chol":
            return sla.cho_solve(self.L, t, check_finite=False)
        return sla.solve_triangular(self.RB, sla.solve_triangular(self.RB, t, trans="T"))

    def _solve_reduced(self, bx, by, bz):
        Gs = self.Gs
        bzs = self.W.apply_inv_t(bz)
        rhs = bx + Gs.T @ bzs
        if self.RA.size:
            xp = self.Q1 @ sla.solve_triangular(self.RA, by, trans="T")
            dx = xp + self.Q2 @ self._inner_solve(self.Q2.T @ (rhs - Gs.T @ (Gs @ xp)))
            dy = sla.solve_triangular(self.RA, self.Q1.T @ (rhs - Gs.T @ (Gs @ dx)))
        else:
            dx = self._inner_solve(rhs)
            dy = np.zeros(0)
        dz = self.W.apply_inv(Gs @ dx - bzs)
        return dx, dy, dz

    def residual(self, bx, by, bz, dx, dy, dz) -> float:
        form = self.form
        r = np.concatenate([bx - (form.A.T @ dy + form.G.T @ dz), by - form.A @ dx,
                            self.W.apply_inv_t(bz - (form.G @ dx - self.W.apply_wtw(dz)))])
        return float(np.linalg.norm(r) / max(1.0, np.linalg.norm(np.concatenate([bx, by, bz]))))

    def solve(self, bx, by, bz, refine: int = 2):
        form = self.form
        dx, dy, dz = self._solve_reduced(bx, by, bz)
        for _ in range(refine):
            rx = bx - (form.A.T @ dy + form.G.T @ dz)
            ry = by - form.A @ dx
            rz = bz - (form.G @ dx - self.W.apply_wtw(dz))
            ex, ey, ez = self._solve_reduced(rx, ry, rz)
            dx, dy, dz = dx + ex, dy + ey, dz + ez
        return dx, dy, dz


def _block_gram(Gs, cone: Cone, supports) -> np.ndarray:
    """Gs^T Gs summed block by block over each block's nonzero columns."""
    n = Gs.shape[1]
    H = np.zeros((n, n))
    ranges = [(0, cone.l)] + cone.offsets
    for (a, b), cols in zip(ranges, supports):
        if b > a and cols.size:
            g = Gs[a:b, cols]
            H[np.ix_(cols, cols)] += g.T @ g
    return H


def _column_supports(G, cone: Cone):
    ranges = [(0, cone.l)] + cone.offsets
    return [np.flatnonzero(np.any(G[a:b] != 0, axis=0)) for a, b in ranges]


def _nullspace(A: np.ndarray):
    """Q1, Q2, R with A^T = Q1 R and Q2 spanning the null space of A."""
    n, p = A.shape[1], A.shape[0]
    if p == 0:
        return np.zeros((n, 0)), np.eye(n), np.zeros((0, 0))
    q, r = np.linalg.qr(A.T, mode="complete")
    return q[:, :p], q[:, p:], r[:p]


def solve(form: ConicForm, feas_tol=None, gap_tol=None, max_iter=None, verbose=False) -> SolverSolution:
    opts = default_options()
    feas_tol = opts["feas_tol"] if feas_tol is None else feas_tol
    gap_tol = opts["gap_tol"] if gap_tol is None else gap_tol
    max_iter = opts["max_iter"] if max_iter is None else max_iter

    c, A, b, G, h = form.c, form.A, form.b, form.G, form.h
    cone = Cone(form.l, form.blocks)
    if cone.dim == 0:
        raise ValueError("conic program without cone constraints")
    n, p = form.n, A.shape[0]
    e = cone.unit()

    nullspace = _nullspace(A)
    supports = _column_supports(G, cone)
    x, y = np.zeros(n), np.zeros(p)
    s, z = e.copy(), e.copy()
    tau, kappa = 1.0, 1.0

    resx0 = max(1.0, np.linalg.norm(c))
    resy0 = max(1.0, np.linalg.norm(np.concatenate([b, h])))
    status = "max_iter"
    it = 0
    pres = dres = gap = compl = np.inf
    pcost = dcost = np.nan
    best_merit, stall = np.inf, 0

    def snapshot(it):
        return dict(x=x / tau, y=y / tau, z=z / tau, s=s / tau, gap=gap, pres=pres, dres=dres,
                    compl=compl, it=it)

    def report(status, it, snap=None):
        v = snapshot(it) if snap is None else snap
        pc = form.sign * (c @ v["x"] + form.offset)
        dc = form.sign * (-(h @ v["z"]) - b @ v["y"] + form.offset)
        return SolverSolution(status, float(pc), float(dc), float(v["gap"]), float(v["pres"]),
                              float(v["dres"]), v["it"], {}, v["x"], v["y"], v["z"], v["s"],
                              float(v["compl"]))

    # last iterate with residuals and objective gap within tolerance; returned
    # when complementarity stalls above gap_tol on a degenerate face
    accepted = None

    def give_up(status, it):
        if accepted is not None:
            return report("optimal", accepted["it"], accepted)
        return report(status, it)

    for it in range(max_iter + 1):
        rx = A.T @ y + G.T @ z + c * tau
        ry = A @ x - b * tau
        rz = G @ x + s - h * tau
        rt = kappa + c @ x + b @ y + h @ z

        # residuals relative to the size of the terms they balance
        ax, gx = A @ x, G @ x
        pscale = max(resy0, np.linalg.norm(np.concatenate([ax, gx, s])) / tau)
        dscale = max(resx0, max(np.linalg.norm(A.T @ y), np.linalg.norm(G.T @ z)) / tau)
        pres = max(np.linalg.norm(ry), np.linalg.norm(rz)) / tau / pscale
        dres = np.linalg.norm(rx) / tau / dscale
        compl = (s @ z) / tau ** 2
        pcost = c @ x / tau
        dcost = -(h @ z + b @ y) / tau
        # objective duality gap; complementarity can floor above it on degenerate faces
        gap = abs(pcost - dcost)
        if verbose:
            log.info("%3d pcost %+.9e dcost %+.9e gap %.2e compl %.2e pres %.2e dres %.2e tau %.2e kappa %.2e",
                     it, pcost, dcost, gap, compl, pres, dres, tau, kappa)
        if pres <= feas_tol and dres <= feas_tol and gap <= gap_tol:
            if compl <= gap_tol:
                return report("optimal", it)
            accepted = snapshot(it)
        merit = max(pres, dres, compl)
        if merit < 0.5 * best_merit:
            best_merit, stall = merit, 0
        else:
            stall += 1
        if stall >= STALL_ITERS:
            return give_up("numerical_failure", it)

        hz_by = h @ z + b @ y
        if hz_by < 0:
            pinf = np.linalg.norm(A.T @ y + G.T @ z) / resx0 / -hz_by
            if pinf <= feas_tol:
                sol = report("infeasible", it)
                sol.y, sol.z = y / -hz_by, z / -hz_by
                return sol
        cx = c @ x
        if cx < 0:
            dinf = np.linalg.norm(np.concatenate([A @ x, G @ x + s])) / resy0 / -cx
            if dinf <= feas_tol:
                sol = report("unbounded", it)
                sol.x, sol.s = x / -cx, s / -cx
                return sol
        if it == max_iter:
            break

        W = Scaling(cone, s, z)
        lam = W.lam_vec()
        kkt = None
        Gs = W.scale_columns(G, supports)
        for attempt in range(4):
            reg = 0.0 if attempt == 0 else 1e-12 * 100 ** attempt
            for method in KKT_METHODS:
                try:
                    with warnings.catch_warnings():
                        warnings.simplefilter("ignore", sla.LinAlgWarning)
                        cand = KKT(form, cone, W, nullspace, supports, reg, method, Gs)
                        x2, y2, z2 = cand.solve(-c, b, h)
                except (np.linalg.LinAlgError, ValueError):
                    continue
                if not (np.all(np.isfinite(x2)) and np.all(np.isfinite(z2))):
                    continue
                if method == "chol" and cand.residual(-c, b, h, x2, y2, z2) > KKT_RESIDUAL_TOL:
                    continue
                kkt = cand
                break
            if kkt is not None:
                break
        if kkt is None:
            return give_up("numerical_failure", it)

        mu = (s @ z + tau * kappa) / (cone.degree + 1)
        wz2 = W.apply(z2)

        def newton(eta, ds_target, dtk):
            x1, y1, z1 = kkt.solve(-eta * rx, -eta * ry, -eta * rz - W.apply_t(W.lam_divide(ds_target)))
            # c.x2 + b.y2 + h.z2 = -|W z2|^2; the explicit form avoids cancellation
            denom = -(kappa / tau + wz2 @ wz2)
            dtau = (-eta * rt - c @ x1 - b @ y1 - h @ z1 - dtk / tau) / denom
            dx, dy, dz = x1 + dtau * x2, y1 + dtau * y2, z1 + dtau * z2
            dkappa = (dtk - kappa * dtau) / tau
            # ds from the linear equation keeps G x + s - h tau consistent to rounding
            ds = -eta * rz - G @ dx + h * dtau
            if verbose:
                ex = np.linalg.norm(A.T @ dy + G.T @ dz + c * dtau + eta * rx)
                ey = np.linalg.norm(A @ dx - b * dtau + eta * ry)
                log.info("    newton residuals x %.2e y %.2e |dz| %.2e dtau %.2e", ex, ey, np.linalg.norm(dz), dtau)
            return dx, dy, dz, dtau, ds, dkappa, W.apply_inv_t(ds), W.apply(dz)

        def step_length(dtau, dkappa, ds_scaled, dz_scaled):
            a = min(max_step(cone, W.lam, W.lam_o, ds_scaled), max_step(cone, W.lam, W.lam_o, dz_scaled))
            if dtau < 0:
                a = min(a, -tau / dtau)
            if dkappa < 0:
                a = min(a, -kappa / dkappa)
            return a

        # predictor
        ds_aff_t = -jordan(cone, lam, lam)
        pred = newton(1.0, ds_aff_t, -tau * kappa)
        alpha_aff = min(1.0, step_length(pred[3], pred[5], pred[6], pred[7]))
        sigma = (1 - alpha_aff) ** CENTERING_EXPONENT

        # corrector
        ds_t = ds_aff_t - jordan(cone, pred[6], pred[7]) + sigma * mu * e
        dtk = -tau * kappa - pred[3] * pred[5] + sigma * mu
        dx, dy, dz, dtau, ds, dkappa, ds_sc, dz_sc = newton(1 - sigma, ds_t, dtk)
        alpha = min(1.0, STEP_FRACTION * step_length(dtau, dkappa, ds_sc, dz_sc))
        if alpha < SHORT_STEP:
            # the second-order term can dominate once lambda is tiny; fall back to
            # first-order Newton steps at the same and at a stronger centring and
            # keep whichever goes further
            for sig in (sigma, max(sigma, FALLBACK_SIGMA)):
                alt = newton(1 - sig, ds_aff_t + sig * mu * e, -tau * kappa + sig * mu)
                alpha_alt = min(1.0, STEP_FRACTION * step_length(alt[3], alt[5], alt[6], alt[7]))
                if verbose:
                    log.info("    short step %.2e, sigma %.2e gives %.2e", alpha, sig, alpha_alt)
                if alpha_alt > alpha:
                    dx, dy, dz, dtau, ds, dkappa, ds_sc, dz_sc = alt
                    alpha = alpha_alt
        if not np.isfinite(alpha) or alpha <= 0:
            return give_up("numerical_failure", it)

        # the step is computed in scaled coordinates; rounding can still leave the cone
        for _ in range(MAX_BACKTRACKS):
            if interior(cone, s + alpha * ds) and interior(cone, z + alpha * dz):
                break
            alpha *= BACKTRACK
        else:
            return give_up("numerical_failure", it)

        x, y, z, s = x + alpha * dx, y + alpha * dy, z + alpha * dz, s + alpha * ds
        if form.embedded:
            z = restore_structure(cone, z)
        tau, kappa = tau + alpha * dtau, kappa + alpha * dkappa
        if tau <= 0 or kappa <= 0:
            return give_up("numerical_failure", it)

    return give_up(status, it)
