"""Fixed-point solution schemes for the stationary MHD system.

Two schemes are provided. The contraction (Banach) scheme iterates the
explicit updates

    u_n = c_u TQT[Vec((DB_{n-1})B_{n-1}) - Sc(u_{n-1}D)u_{n-1}] - c_p TQT D p_n
    B_n : inner iteration  B^(i) = c_B TQT[Sc(B^(i-1)D)u_n - Sc(u_nD)B^(i-1)]

with the pressure recovered from Sc(Qp) = c Sc(QT[...]) by least squares.
The Schauder scheme linearizes at (u~, B~) and inverts the two operators
I + c TQT Sc(u~ D) by truncated Neumann series, refusing when the measured
series ratio q is >= 1.

Constants (C1, Cs, CD, Cu, k) are estimated once per domain: C1 and
lambda_min analytically from the discrete Dirichlet spectrum, the rest as
sampled extremal ratios with a x2 safety factor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla

from .grid import QField, h1_norm, l2_norm, lq_norm, sc_inner
from .mhd import (MHDParams, MHDState, _dirac_scalar, boundary_B_term,
                  convective, leray_project, lorentz, residual_strong,
                  tqt_rhs_B, tqt_rhs_p, tqt_rhs_u)
from .operators import OperatorSet, dirac_fwd
from .sampling import random_pure_bump

__all__ = [
    "ConstantsBundle",
    "SolverConfig",
    "ConvergenceReport",
    "ConditionViolation",
    "DivergenceError",
    "estimate_constants",
    "check_cond1",
    "check_schauder_bound",
    "lipschitz_Ln",
    "check_theorem4",
    "pressure_recover",
    "banach_inner_B",
    "banach_solve",
    "neumann_apply_u",
    "neumann_apply_B",
    "schauder_solve",
]


class ConditionViolation(RuntimeError):
    """A smallness condition required by the scheme is violated."""

    def __init__(self, message: str, q: float):
        super().__init__(message)
        self.q = q


class DivergenceError(RuntimeError):
    """The iteration left the contractive regime (norm blow-up or sustained
    growth of the state changes)."""


@dataclass(frozen=True)
class ConstantsBundle:
    C1: float
    Cs: float
    CD: float
    Cu: float
    k: float
    lambda_min: float
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if min(self.C1, self.Cs, self.CD, self.Cu, self.k, self.lambda_min) <= 0:
            raise ValueError("all constants must be positive")
        if self.C1 > (1.0 + 1e-9) / self.lambda_min:
            raise ValueError("C1 must not exceed 1/lambda_min")
        if self.k > 1.1 * self.C1:
            raise ValueError("k must satisfy k <= 1.1 C1")


@dataclass
class SolverConfig:
    method: str = "banach"
    tol: float = 1e-8
    max_outer: int = 500
    max_inner: int = 200
    neumann_max_terms: int = 64
    neumann_term_tol: float = 1e-12
    leray_each_step: bool = True

    def __post_init__(self):
        if self.method not in ("banach", "schauder_neumann"):
            raise ValueError("method must be banach or schauder_neumann")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if min(self.max_outer, self.max_inner, self.neumann_max_terms) < 1:
            raise ValueError("iteration limits must be >= 1")


@dataclass
class ConvergenceReport:
    iterations: int = 0
    state_changes: list = field(default_factory=list)   # (du, dB, dp) in H1/H1/L2
    q1: float = math.nan
    q2: float = math.nan
    Ln: list = field(default_factory=list)
    cond1_ok: bool = False
    theorem2_ok: bool = False
    theorem4_ok: bool = False
    F_const: float = math.nan
    C3: float = math.nan
    C4: float = math.nan
    W: float = math.nan
    final_residuals: tuple = ()
    rows: list = field(default_factory=list)            # convergence-CSV dicts
    energy_rows: list = field(default_factory=list)     # EnergyReport.csv_row()


# ---------------------------------------------------------------------------
# constants
# ---------------------------------------------------------------------------

def estimate_constants(domain, ops: OperatorSet, samples: int = 30,
                       seed: int = 0) -> ConstantsBundle:
    """Estimate the bundle of norm constants on one domain.

    C1 = 1/lambda_min (analytic); k = ||TQT|| by power iteration; Cs is
    twice the largest sampled ratio of the three nonlinear estimates
    (L^{5/4} norms) plus the composed form ||T Sc(uD)u|| <= C ||u||_H1^2;
    CD doubles the largest sampled ||Du|| / ||u||_H1; Cu halves the smallest
    sampled ||Du||^2 / ||u||_H1^2 (a coercivity constant is a lower bound).
    """
    if samples < 10:
        raise ValueError("need at least 10 samples")
    lam = ops.lambda_min()
    C1 = 1.0 / lam
    k = ops.op_norm_TQT()
    rng = np.random.default_rng(seed)
    ratios_s, ratios_d, ratios_c = [], [], []
    for _ in range(samples):
        u = random_pure_bump(domain, rng)
        B = random_pure_bump(domain, rng)
        uh, Bh = h1_norm(u), h1_norm(B)
        if uh == 0.0 or Bh == 0.0:
            continue
        ratios_s.append(lq_norm(convective(u, u), 1.25) / uh**2)
        ratios_s.append(lq_norm(lorentz(B, 1.0), 1.25) / Bh**2)
        ratios_s.append(l2_norm(dirac_fwd(B)) / Bh)
        ratios_s.append(l2_norm(ops.teodorescu(convective(u, u))) / uh**2)
        Du = l2_norm(dirac_fwd(u))
        ratios_d.append(Du / uh)
        ratios_c.append(Du**2 / uh**2)
    if not ratios_s:
        raise ValueError("all samples degenerate")
    bundle = ConstantsBundle(
        C1=C1,
        Cs=2.0 * max(ratios_s),
        CD=2.0 * max(ratios_d),
        Cu=0.5 * min(ratios_c),
        k=k,
        lambda_min=lam,
        provenance={"C1": "analytic", "lambda_min": "analytic",
                    "Cs": "estimated", "CD": "estimated",
                    "Cu": "estimated", "k": "estimated"},
    )
    return bundle


def check_cond1(u_h1: float, c: ConstantsBundle, Rm: float) -> bool:
    """Inner-iteration contraction condition ||u||_H1 < 1/(2 C1 Cs Rm^2)."""
    if u_h1 < 0:
        raise ValueError("u_h1 must be nonnegative")
    return u_h1 < 1.0 / (2.0 * c.C1 * c.Cs * Rm**2)


def check_schauder_bound(u_h1: float, c: ConstantsBundle,
                         params: MHDParams) -> bool:
    """||u~||_H1 <= min{mu0/(Re^2 k CD), 1/(Rm^2 k CD)} (non-strict)."""
    if u_h1 < 0:
        raise ValueError("u_h1 must be nonnegative")
    thr = min(params.mu0 / (params.Re**2 * c.k * c.CD),
              1.0 / (params.Rm**2 * c.k * c.CD))
    return u_h1 <= thr


def lipschitz_Ln(c: ConstantsBundle, C3: float, C4: float, F: float,
                 params: MHDParams) -> float:
    """L_n = 2 Re^2 C1 (Cs C3 + ((1/2 + Cs) C4 / mu0) Rm^2 C1 F)."""
    if min(C3, C4, F) < 0:
        raise ValueError("history norms must be nonnegative")
    return 2.0 * params.Re**2 * c.C1 * (
        c.Cs * C3
        + (0.5 + c.Cs) * C4 / params.mu0 * params.Rm**2 * c.C1 * F)


def check_theorem4(c: ConstantsBundle, params: MHDParams,
                   supB_h1: float) -> tuple[bool, float]:
    """Small-data conditions of the contraction scheme:
    (1/mu0) sup||B_n||^2 <= 1/(16 C1^2 Cs^2 Re^4)  and
    Rm^2 < 4 Cs^2 Re^2 (8 W Re^2 C1 Cs - 1)/(1 + 2 Cs),
    W = sqrt(1/(4 C1^2 Cs^2 Re^4) - (1/mu0) sup||B_n||^2).
    Returns (both_ok, W); W is NaN when the radicand is negative (the first
    condition already failed in that case)."""
    if supB_h1 < 0:
        raise ValueError("supB_h1 must be nonnegative")
    a = 1.0 / (c.C1**2 * c.Cs**2 * params.Re**4)
    supB2 = supB_h1**2 / params.mu0
    cond_a = supB2 <= a / 16.0
    radicand = a / 4.0 - supB2
    if radicand < 0:
        return False, math.nan
    W = math.sqrt(radicand)
    rhs = (4.0 * c.Cs**2 * params.Re**2
           * (8.0 * W * params.Re**2 * c.C1 * c.Cs - 1.0) / (1.0 + 2.0 * c.Cs))
    cond_b = params.Rm**2 < rhs
    return cond_a and cond_b, W


# ---------------------------------------------------------------------------
# pressure recovery
# ---------------------------------------------------------------------------

def pressure_recover(rhs: QField, ops: OperatorSet, tol: float = 1e-12,
                     maxit: int = 2000) -> QField:
    """Zero-mean scalar p minimizing ||Sc(Q p) - rhs||_L2.

    S: p -> Sc(Q(p)) is symmetric positive semidefinite with a nontrivial
    kernel (scalar fields whose embedding is Bergman-monogenic).  MINRES
    started from zero keeps all iterates in range(S), so it returns the
    minimum-norm least-squares solution; the result is then shifted to
    zero mean, the normalization used for the pressure throughout.
    """
    dom = ops.domain
    if np.abs(rhs.values[..., 1:]).max(initial=0.0) > 0:
        raise ValueError("pressure right-hand side must be scalar")

    def S(parr: np.ndarray) -> np.ndarray:
        f = np.zeros(dom.shape + (4,))
        f[..., 0] = parr.reshape(dom.shape)
        return ops.bergman_Q(QField(dom, f)).values[..., 0].ravel()

    r0 = rhs.values[..., 0].ravel()
    rnorm = np.linalg.norm(r0)
    if rnorm == 0.0:
        return QField.zeros(dom)
    ncells = dom.num_cells
    lin = spla.LinearOperator((ncells, ncells), matvec=S, rmatvec=S)
    x, _ = spla.minres(lin, r0, rtol=tol, maxiter=maxit)
    # normal-equation residual S(Sx - r); the projection of r onto
    # range(S) is what a least-squares minimizer can match.
    normal_res = np.linalg.norm(S(S(x) - r0))
    normal_ref = np.linalg.norm(S(r0))
    if normal_ref > 0 and normal_res > 1e-8 * normal_ref:
        raise RuntimeError(
            "pressure_recover did not converge: relative normal-equation "
            f"residual {normal_res / normal_ref:.3e}")
    x -= x.mean()
    out = np.zeros(dom.shape + (4,))
    out[..., 0] = x.reshape(dom.shape)
    return QField(dom, out)


# ---------------------------------------------------------------------------
# operator-norm estimation of the linearized convection maps
# ---------------------------------------------------------------------------

def _linmap_norm(apply_fn, domain, iters: int = 30, tol: float = 1e-6,
                 seed: int = 0) -> float:
    """Power-iteration estimate of the norm of a linear map on L2 fields."""
    rng = np.random.default_rng(seed)
    v = QField(domain, rng.standard_normal(domain.shape + (4,)))
    nv = l2_norm(v)
    v = (1.0 / nv) * v
    est = 0.0
    for _ in range(iters):
        w = apply_fn(v)
        nw = l2_norm(w)
        if nw == 0.0:
            return 0.0
        est_new = nw
        v = (1.0 / nw) * w
        if abs(est_new - est) <= tol * max(est_new, 1e-300):
            return est_new
        est = est_new
    return est


def _neumann(apply_A, r: QField, cfg: SolverConfig) -> tuple[QField, int]:
    """Truncated series sum_n (-A)^n r."""
    x = r.copy()
    term = r
    rnorm = l2_norm(r)
    used = 1
    for _ in range(cfg.neumann_max_terms - 1):
        term = -1.0 * apply_A(term)
        x = x + term
        used += 1
        if l2_norm(term) < cfg.neumann_term_tol * max(rnorm, 1e-300):
            break
    return x, used


def neumann_apply_u(state_lin: MHDState, B: QField, p: QField,
                    params: MHDParams, ops: OperatorSet,
                    cfg: SolverConfig) -> tuple[QField, float, int]:
    """Solve [I + (Re^2/mu0) TQT Sc(u~D)] u = Re^2 TQT[(1/mu0)Vec((DB~)B) - Dp]
    by Neumann series; returns (u, q1, terms used). Refuses when q1 >= 1."""
    ut = state_lin.u
    c = params.Re**2 / params.mu0

    def A(v: QField) -> QField:
        return c * ops.TQT(convective(ut, v))

    q1 = _linmap_norm(A, ops.domain)
    if q1 >= 1.0:
        raise ConditionViolation(
            f"Neumann series for u refused: q1 = {q1:.6g} >= 1", q1)
    r = params.Re**2 * ops.TQT(lorentz(B, params.mu0) - _dirac_scalar(p))
    u, used = _neumann(A, r, cfg)
    return u, q1, used


def neumann_apply_B(state_lin: MHDState, u: QField, params: MHDParams,
                    ops: OperatorSet,
                    cfg: SolverConfig) -> tuple[QField, float, int]:
    """Solve [I + Rm^2 TQT Sc(u~D)] B = Rm^2 TQT Sc(B~D) u by Neumann
    series; returns (B, q2, terms used). Refuses when q2 >= 1."""
    ut, Bt = state_lin.u, state_lin.B
    c = params.Rm**2

    def A(v: QField) -> QField:
        return c * ops.TQT(convective(ut, v))

    q2 = _linmap_norm(A, ops.domain)
    if q2 >= 1.0:
        raise ConditionViolation(
            f"Neumann series for B refused: q2 = {q2:.6g} >= 1", q2)
    r = c * ops.TQT(convective(Bt, u))
    B, used = _neumann(A, r, cfg)
    return B, q2, used


# ---------------------------------------------------------------------------
# contraction (Banach) scheme
# ---------------------------------------------------------------------------

def banach_inner_B(u_n: QField, B_init: QField, params: MHDParams,
                   ops: OperatorSet, cfg: SolverConfig,
                   boundary: QField | None = None) -> tuple[QField, int, float]:
    """Inner iteration B^(i) = c_B TQT[Sc(B^(i-1)D)u_n - Sc(u_nD)B^(i-1)]
    (+ fixed boundary term). Returns (B, iterations, last contraction ratio).
    Non-contraction (check via check_cond1) shows up as ratio >= 1."""
    dom = ops.domain
    B = B_init.copy()
    prev_change = math.nan
    ratio = 0.0
    state = MHDState(QField.zeros(dom), B, QField.zeros(dom))
    for i in range(1, cfg.max_inner + 1):
        state.B = B
        B_new = _vec_part(tqt_rhs_B(state, params, ops, u=u_n))
        if boundary is not None:
            B_new = B_new + boundary
        change = h1_norm(B_new - B)
        if prev_change and not math.isnan(prev_change):
            ratio = change / prev_change
        prev_change = change
        B = B_new
        if change <= cfg.tol * max(1.0, h1_norm(B)):
            return B, i, ratio
    return B, cfg.max_inner, ratio



def _vec_part(f: QField) -> QField:
    """Vector part of a field. The integral operators return full
    quaternions; the velocity and magnetic iterates are pure by definition,
    so the solvers drop the scalar remnant after every update."""
    out = f.values.copy()
    out[..., 0] = 0.0
    return QField(f.domain, out)


def _change_triplet(new: MHDState, old: MHDState) -> tuple[float, float, float]:
    return (h1_norm(new.u - old.u), h1_norm(new.B - old.B),
            l2_norm(new.p - old.p))


def banach_solve(params: MHDParams, ops: OperatorSet, cfg: SolverConfig,
                 init: MHDState | None = None,
                 constants: ConstantsBundle | None = None,
                 ) -> tuple[MHDState, ConvergenceReport]:
    """Outer contraction iteration of the integral form.

    Each step recovers p_n from the previous state, updates u_n explicitly,
    and runs the inner B iteration; divergence-free projection per step is
    optional (on by default). The per-step Lipschitz constant L_n is
    evaluated from the iterate history and logged alongside the condition
    booleans when a constants bundle is supplied."""
    from .energy import energy
    dom = ops.domain
    state = init.copy() if init is not None else MHDState.zeros(dom)
    B_bd = boundary_B_term(params, ops)
    report = ConvergenceReport()
    hist_u = [h1_norm(state.u)]
    hist_B = [h1_norm(state.B)]
    grow = 0
    for n in range(1, cfg.max_outer + 1):
        prev = state
        p_n = pressure_recover(tqt_rhs_p(prev, params, ops), ops)
        u_n = _vec_part(tqt_rhs_u(prev, params, ops, p=p_n))
        if cfg.leray_each_step:
            u_n = leray_project(u_n, ops)
        B_n, _, _ = banach_inner_B(
            u_n, prev.B, params, ops, cfg,
            boundary=B_bd if params.boundary_h is not None else None)
        if cfg.leray_each_step:
            B_n = leray_project(B_n, ops)
        state = MHDState(u_n, B_n, p_n)
        du, dB, dp = _change_triplet(state, prev)
        hist_u.append(h1_norm(u_n))
        hist_B.append(h1_norm(B_n))
        row = {"iter": n, "du": du, "dB": dB, "dp": dp}
        if constants is not None:
            C3 = hist_u[-2] + (hist_u[-3] if n >= 2 else 0.0)
            C4 = hist_B[-2] + (hist_B[-3] if n >= 2 else 0.0)
            F = 2.0 * constants.Cs * (hist_B[-1] + hist_B[-2])
            Ln = lipschitz_Ln(constants, C3, C4, F, params)
            report.Ln.append(Ln)
            report.C3, report.C4, report.F_const = C3, C4, F
            row["Ln"] = Ln
            row["cond1"] = check_cond1(hist_u[-1], constants, params.Rm)
            row["thm2"] = check_schauder_bound(hist_u[-1], constants, params)
            ok4, W = check_theorem4(constants, params, max(hist_B))
            row["thm4"] = ok4
            report.cond1_ok = row["cond1"]
            report.theorem2_ok = row["thm2"]
            report.theorem4_ok, report.W = ok4, W
        res = residual_strong(state, params, ops)
        erep = energy(state.u, state.B, params, ops,
                      Cs=constants.Cs if constants else None)
        row.update(Jenergy=erep.J, res_mom=res[0], res_ind=res[1],
                   divu=res[2], divB=res[3])
        report.energy_rows.append(erep.csv_row())
        report.rows.append(row)
        report.state_changes.append((du, dB, dp))
        report.iterations = n
        scale = max(1.0, hist_u[-1] + hist_B[-1] + l2_norm(state.p))
        if (du + dB + dp) / scale < cfg.tol:
            break
        # divergence guards
        if hist_u[-1] + hist_B[-1] > 1e3 * max(1.0, hist_u[0] + hist_B[0]):
            raise DivergenceError(
                f"state norm blow-up at iteration {n}: "
                f"{hist_u[-1] + hist_B[-1]:.3g}")
        if n >= 2 and sum(report.state_changes[-1]) > sum(report.state_changes[-2]):
            grow += 1
            if grow >= 5:
                raise DivergenceError(
                    f"state change grew 5 consecutive steps at iteration {n}")
        else:
            grow = 0
    report.final_residuals = residual_strong(state, params, ops)
    return state, report


# ---------------------------------------------------------------------------
# Schauder / Neumann scheme
# ---------------------------------------------------------------------------

def schauder_solve(params: MHDParams, ops: OperatorSet, cfg: SolverConfig,
                   init: MHDState | None = None,
                   constants: ConstantsBundle | None = None,
                   ) -> tuple[MHDState, ConvergenceReport]:
    """Outer fixed-point loop on the linearization map (u~, B~) -> (u, B),
    with the linear solves done by truncated Neumann series. The per-iterate
    norm bound is logged every step; a measured series ratio q >= 1 raises
    ConditionViolation."""
    from .energy import energy
    dom = ops.domain
    state = init.copy() if init is not None else MHDState.zeros(dom)
    B_bd = boundary_B_term(params, ops)
    report = ConvergenceReport()
    init_norm = max(1.0, h1_norm(state.u) + h1_norm(state.B))
    grow = 0
    for n in range(1, cfg.max_outer + 1):
        prev = state
        p = pressure_recover(tqt_rhs_p(prev, params, ops), ops)
        u, q1, _ = neumann_apply_u(prev, prev.B, p, params, ops, cfg)
        u = _vec_part(u)
        if cfg.leray_each_step:
            u = leray_project(u, ops)
        B, q2, _ = neumann_apply_B(prev, u, params, ops, cfg)
        B = _vec_part(B)
        if params.boundary_h is not None:
            B = B + B_bd
        if cfg.leray_each_step:
            B = leray_project(B, ops)
        state = MHDState(u, B, p)
        du, dB, dp = _change_triplet(state, prev)
        report.q1, report.q2 = q1, q2
        row = {"iter": n, "du": du, "dB": dB, "dp": dp, "q1": q1, "q2": q2}
        if constants is not None:
            row["cond1"] = check_cond1(h1_norm(u), constants, params.Rm)
            row["thm2"] = check_schauder_bound(h1_norm(prev.u), constants,
                                               params)
            report.cond1_ok = row["cond1"]
            report.theorem2_ok = row["thm2"]
        res = residual_strong(state, params, ops)
        erep = energy(state.u, state.B, params, ops,
                      Cs=constants.Cs if constants else None)
        row.update(Jenergy=erep.J, res_mom=res[0], res_ind=res[1],
                   divu=res[2], divB=res[3])
        report.energy_rows.append(erep.csv_row())
        report.rows.append(row)
        report.state_changes.append((du, dB, dp))
        report.iterations = n
        scale = max(1.0, h1_norm(u) + h1_norm(B) + l2_norm(p))
        if (du + dB + dp) / scale < cfg.tol:
            break
        if h1_norm(u) + h1_norm(B) > 1e3 * init_norm:
            raise DivergenceError(f"state norm blow-up at iteration {n}")
        if n >= 2 and sum(report.state_changes[-1]) > sum(report.state_changes[-2]):
            grow += 1
            if grow >= 5:
                raise DivergenceError(
                    f"state change grew 5 consecutive steps at iteration {n}")
        else:
            grow = 0
    report.final_residuals = residual_strong(state, params, ops)
    return state, report
