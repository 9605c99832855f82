"""Controller co-design: LMI assembly, SDP solve, gain recovery, verification.

The design problem couples a 3x6 feedback gain K with a symmetric trigger
matrix M through a common congruence variable H. Feasibility of the blocks
built here certifies, for mu in (0,1) and disturbance energy bound lambda:

  * the sublevel set V(x) = x'P_sigma(x) x <= 1 is an inner approximation of
    the closed-loop basin of attraction under input saturation, and
  * the sublevel set V <= 1/eps (eps > 1) is invariant and attractive under
    any disturbance with w'w <= lambda.

Decision variables: eps, W0, W1, Q symmetric, S diagonal positive, Y, Z0,
Z1 (3x6), H (6x6), plus eta when the basin size enters the objective.
Gains are recovered as K = Y H^-T, M = H^-1 Q H^-T, P_i = H^-1 W_i H^-T,
G_i = Z_i H^-T.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from rvetc.controller import ControllerGains
from rvetc.dynamics import DiscreteModel
from rvetc.sdp import (
    LmiBlock,
    SdpInfeasibleError,
    SdpProblem,
    SdpSolverError,
    SolverReport,
    VarLayout,
    solve_cvxopt,
)

OBJECTIVES = ("feasibility", "basin", "attractor", "firing", "mixed")

NX = 6
NU = 3


class SynthesisInfeasibleError(RuntimeError):
    """The LMI feasibility problem admits no solution for these parameters."""

    def __init__(self, message: str, most_violated: str | None = None):
        super().__init__(message)
        self.most_violated = most_violated


class GainRecoveryError(RuntimeError):
    """H is numerically singular; the solution cannot be inverted into gains."""


@dataclass(frozen=True)
class SynthesisParams:
    """Problem data for the gain/trigger co-design.

    ``objective`` selects what is optimized subject to the same feasibility
    blocks; ``alpha`` weights the mixed trade-off cost
    alpha1*eta - alpha2*eps - alpha3*trace(Q). ``trace_sign`` = 'maximize'
    keeps the trace-promotion reading of the trade-off; 'literal' flips the
    trace term sign.
    """

    model: DiscreteModel
    lambda_noise: float = 1e-7
    mu_decay: float = 0.04
    u_bar: float = 0.2
    objective: str = "mixed"
    alpha: tuple[float, float, float] = (1.0, 100.0, 1.0)
    strictness_margin: float = 1e-9
    trace_sign: str = "maximize"
    trace_zero: bool = False
    solver_margin: float = 1e-6
    solver_options: dict | None = None

    def __post_init__(self):
        if not (0.0 < self.mu_decay < 1.0):
            raise ValueError(f"mu_decay must lie in (0, 1), got {self.mu_decay}")
        if not self.lambda_noise > 0:
            raise ValueError(f"lambda_noise must be positive, got {self.lambda_noise}")
        if not self.u_bar > 0:
            raise ValueError(f"u_bar must be positive, got {self.u_bar}")
        if self.objective not in OBJECTIVES:
            raise ValueError(f"objective must be one of {OBJECTIVES}, got {self.objective!r}")
        if any(a < 0 for a in self.alpha):
            raise ValueError("alpha weights must be non-negative")
        if self.strictness_margin < 0:
            raise ValueError("strictness_margin must be >= 0")
        if self.trace_sign not in ("maximize", "literal"):
            raise ValueError("trace_sign must be 'maximize' or 'literal'")

    @property
    def uses_eta(self) -> bool:
        return self.objective in ("basin", "mixed")


@dataclass
class DecisionVars:
    """Solved decision variables (plus the solver report that produced them)."""

    eps: float
    W0: np.ndarray
    W1: np.ndarray
    Q: np.ndarray
    S: np.ndarray
    Y: np.ndarray
    Z0: np.ndarray
    Z1: np.ndarray
    H: np.ndarray
    eta: float | None = None
    report: SolverReport | None = None

    def W(self, i: int) -> np.ndarray:
        return self.W0 if i == 0 else self.W1

    def Z(self, i: int) -> np.ndarray:
        return self.Z0 if i == 0 else self.Z1


def make_layout(with_eta: bool) -> VarLayout:
    layout = VarLayout()
    layout.add("eps", "scalar")
    layout.add("W0", "sym", (NX, NX))
    layout.add("W1", "sym", (NX, NX))
    layout.add("Q", "sym", (NX, NX))
    layout.add("S", "diag", (NU,))
    layout.add("Y", "full", (NU, NX))
    layout.add("Z0", "full", (NU, NX))
    layout.add("Z1", "full", (NU, NX))
    layout.add("H", "full", (NX, NX))
    if with_eta:
        layout.add("eta", "scalar")
    return layout


class _Builder:
    """Accumulates affine terms into a symmetric LmiBlock."""

    def __init__(self, label: str, dim: int, layout: VarLayout):
        self.blk = LmiBlock(label, dim, np.zeros((dim, dim)), {})
        self.layout = layout

    def const(self, rows: slice, cols: slice, mat: np.ndarray) -> None:
        mat = np.atleast_2d(np.asarray(mat, float))
        self.blk.const[rows, cols] += mat
        if rows != cols:
            self.blk.const[cols, rows] += mat.T

    def term(self, name: str, rows: slice, cols: slice,
             left: np.ndarray | None = None, right: np.ndarray | None = None,
             transpose: bool = False, coeff: float = 1.0, sym: bool = False) -> None:
        """Add coeff * L @ X(.T) @ R into [rows, cols] (mirrored off-diagonal).

        ``sym=True`` symmetrizes the contribution (for He(X) on the
        diagonal); diagonal placements must end up symmetric.
        """
        for k, E in self.layout.entries(name):
            X = E.T if transpose else E
            contrib = X if left is None else left @ X
            if right is not None:
                contrib = contrib @ right
            contrib = coeff * np.atleast_2d(contrib)
            if sym:
                contrib = contrib + contrib.T
            F = self.blk.coeffs.setdefault(k, np.zeros((self.blk.dim, self.blk.dim)))
            F[rows, cols] += contrib
            if rows != cols:
                F[cols, rows] += contrib.T

    def scalar_term(self, name: str, rows: slice, cols: slice, mat: np.ndarray) -> None:
        k = self.layout.index(name)
        F = self.blk.coeffs.setdefault(k, np.zeros((self.blk.dim, self.blk.dim)))
        mat = np.atleast_2d(mat)
        F[rows, cols] += mat
        if rows != cols:
            F[cols, rows] += mat.T


def assemble_phi(i: int, j: int, p: SynthesisParams,
                 layout: VarLayout | None = None) -> LmiBlock:
    """Decrease/contraction block Phi_{i,j}; i is the current trigger mode,
    j the successor mode.

    For i = 0 every third-row/column entry carries a factor i and vanishes,
    so the block is assembled directly as its nonzero 12x12 leading
    principal submatrix (keeping the zero rows stalls interior-point
    solvers without changing feasibility).
    """
    if i not in (0, 1) or j not in (0, 1):
        raise ValueError("mode indices must be 0 or 1")
    layout = layout or make_layout(p.uses_eta)
    A, B, Bw = p.model.A, p.model.B, p.model.B_w
    lam, mu = p.lambda_noise, p.mu_decay
    dim = 15 if i == 1 else 12
    r1, r2, r3 = slice(0, 6), slice(6, 12), slice(12, 15)
    b = _Builder(f"Phi_{i}{j}", dim, layout)

    b.term("H", r1, r1, sym=True)                                   # He(H)
    b.term(f"W{j}", r1, r1, coeff=-1.0)
    b.scalar_term("eps", r1, r1, -(lam / mu) * (Bw @ Bw.T))
    b.term("H", r1, r2, left=-A, transpose=True)                    # -A H'
    b.term(f"W{i}", r2, r2, coeff=1.0 - mu)
    b.term("Q", r2, r2, coeff=-(1.0 - 2.0 * i))                     # -(1-2i) Q
    if i == 1:
        b.term("Y", r1, r2, left=-B)
        b.term("S", r1, r3, left=-B)                                # S diagonal: S' = S
        b.term("Y", r2, r3, transpose=True)
        b.term(f"Z{i}", r2, r3, transpose=True)
        b.term("S", r3, r3, coeff=2.0)
    return b.blk


def assemble_psi(i: int, ell: int, p: SynthesisParams,
                 layout: VarLayout | None = None) -> LmiBlock:
    """Saturation sector block Psi_{i,ell} bounding row ell of Z_i by u_bar.

    Assembled with the strictness margin already subtracted (the proof
    uses strict positivity of these blocks).
    """
    if i not in (0, 1):
        raise ValueError("mode index must be 0 or 1")
    if ell not in (1, 2, 3):
        raise ValueError("row index ell must be 1, 2 or 3")
    layout = layout or make_layout(p.uses_eta)
    r, c = slice(0, 6), slice(6, 7)
    b = _Builder(f"Psi_{i}{ell}", 7, layout)
    b.term(f"W{i}", r, r)
    b.term("Q", r, r, coeff=-(1.0 - 2.0 * i))
    e_l = np.zeros((NU, 1))
    e_l[ell - 1, 0] = 1.0
    b.term(f"Z{i}", r, c, transpose=True, right=e_l)                # (Z_i)_ell'
    b.const(c, c, np.array([[p.u_bar**2]]))
    return b.blk


def assemble_eta_block(i: int, p: SynthesisParams,
                       layout: VarLayout | None = None) -> LmiBlock:
    """Basin-size block: eta I over He(H) - W_i + (1-2i) Q via a Schur corner."""
    if not p.uses_eta:
        raise ValueError(f"eta block is only part of the basin/mixed objectives, "
                         f"not {p.objective!r}")
    if i not in (0, 1):
        raise ValueError("mode index must be 0 or 1")
    layout = layout or make_layout(True)
    r1, r2 = slice(0, 6), slice(6, 12)
    b = _Builder(f"Eta_{i}", 12, layout)
    b.scalar_term("eta", r1, r1, np.eye(6))
    b.const(r1, r2, np.eye(6))
    b.term("H", r2, r2, sym=True)
    b.term(f"W{i}", r2, r2, coeff=-1.0)
    b.term("Q", r2, r2, coeff=1.0 - 2.0 * i)                        # +(1-2i) Q
    return b.blk


_S_FLOOR = 1e-9
_ETA_FLOOR = 1e-12


def build_problem(p: SynthesisParams) -> SdpProblem:
    """All feasibility blocks plus the objective-specific cost and bounds."""
    layout = make_layout(p.uses_eta)
    blocks = [assemble_phi(i, j, p, layout) for i in (0, 1) for j in (0, 1)]
    for i in (0, 1):
        for ell in (1, 2, 3):
            blk = assemble_psi(i, ell, p, layout)
            # strict positivity of the sector blocks backs the positivity of V
            blk.const -= p.strictness_margin * np.eye(blk.dim)
            blocks.append(blk)
    if p.uses_eta:
        blocks += [assemble_eta_block(i, p, layout) for i in (0, 1)]

    n = layout.n_vars
    rows, rhs = [], []

    def bound(idx: int, lower: float) -> None:
        row = np.zeros(n)
        row[idx] = -1.0
        rows.append(row)
        rhs.append(-lower)

    bound(layout.index("eps"), 1.0 + p.strictness_margin)
    for ell in range(NU):
        bound(layout.index("S", ell), _S_FLOOR)
    if p.uses_eta:
        bound(layout.index("eta"), _ETA_FLOOR)

    cost = np.zeros(n)
    a1, a2, a3 = p.alpha
    tr_sign = -1.0 if p.trace_sign == "maximize" else 1.0
    if p.objective == "basin":
        cost[layout.index("eta")] = 1.0
    elif p.objective == "attractor":
        cost[layout.index("eps")] = -1.0
    elif p.objective == "firing":
        for d in range(NX):
            cost[layout.index("Q", d, d)] = -1.0
    elif p.objective == "mixed":
        cost[layout.index("eta")] = a1
        cost[layout.index("eps")] = -a2
        for d in range(NX):
            cost[layout.index("Q", d, d)] = tr_sign * a3

    lin_G = np.array(rows)
    lin_h = np.array(rhs)
    if p.trace_zero:
        # trace(Q) = 0 as paired inequalities
        row = np.zeros(n)
        for d in range(NX):
            row[layout.index("Q", d, d)] = 1.0
        lin_G = np.vstack([lin_G, row, -row])
        lin_h = np.concatenate([lin_h, [0.0, 0.0]])
    return SdpProblem(n_vars=n, blocks=blocks, cost=cost, lin_G=lin_G, lin_h=lin_h)


def _estimated_mean_motion(model: DiscreteModel) -> float | None:
    """Recover n from the decoupled out-of-plane block of the HCW STM."""
    A = model.A
    if abs(A[2, 5]) < 1e-300:
        return None
    ratio = -A[5, 2] / A[2, 5]
    if not np.isfinite(ratio) or ratio <= 0:
        return None
    return float(np.sqrt(ratio))


def _preconditioner(p: SynthesisParams, layout: VarLayout):
    """Variable scaling + per-block congruences evening out position/velocity scales.

    States are measured in units of (u_bar/n) for positions and u_bar for
    velocities; inputs in units of u_bar. The transformation is exact, so
    the solved variables are returned in physical units regardless.
    """
    n_est = _estimated_mean_motion(p.model)
    if n_est is None:
        return np.ones(layout.n_vars), None
    Ld = p.u_bar / n_est
    d = np.array([Ld, Ld, Ld, p.u_bar, p.u_bar, p.u_bar])
    D = np.diag(d)
    ub = p.u_bar

    scale = np.ones(layout.n_vars)
    for name in ("W0", "W1", "Q"):
        for a in range(NX):
            for bcol in range(a, NX):
                scale[layout.index(name, a, bcol)] = d[a] * d[bcol]
    for a in range(NX):
        for bcol in range(NX):
            scale[layout.index("H", a, bcol)] = d[a] * d[bcol]
    for name in ("Y", "Z0", "Z1"):
        for r in range(NU):
            for bcol in range(NX):
                scale[layout.index(name, r, bcol)] = ub * d[bcol]
    for ell in range(NU):
        scale[layout.index("S", ell)] = ub * ub

    def congruence_for(label: str) -> np.ndarray | None:
        if label.startswith("Phi"):
            i = int(label[4])
            if i == 1:
                C = np.zeros((15, 15))
                C[0:6, 0:6] = D
                C[6:12, 6:12] = D
                C[12:15, 12:15] = ub * np.eye(3)
            else:
                C = np.zeros((12, 12))
                C[0:6, 0:6] = D
                C[6:12, 6:12] = D
            return C
        if label.startswith("Psi"):
            C = np.zeros((7, 7))
            C[0:6, 0:6] = D
            C[6, 6] = ub
            return C
        return None  # eta blocks stay in physical form (identity off-diagonal)

    return scale, congruence_for


def solve_synthesis(p: SynthesisParams) -> DecisionVars:
    """Solve the co-design SDP; returns physical-unit decision variables.

    Raises :class:`SynthesisInfeasibleError` with the most-violated block
    label when the feasibility problem has no solution, and
    :class:`SdpSolverError` with residuals on non-convergence.
    """
    layout = make_layout(p.uses_eta)
    problem = build_problem(p)
    scale, congruence_for = _preconditioner(p, layout)
    congruences = None
    if congruence_for is not None:
        congruences = [congruence_for(b.label) for b in problem.blocks]
    try:
        v, report = solve_cvxopt(
            problem,
            var_scale=scale,
            block_congruence=congruences,
            psd_margin=p.solver_margin,
            options=p.solver_options,
        )
    except SdpInfeasibleError as exc:
        label = _most_violated_block(problem, scale, congruences)
        raise SynthesisInfeasibleError(
            f"synthesis LMIs are infeasible for these parameters"
            f"{'; most violated block: ' + label if label else ''}",
            most_violated=label,
        ) from exc

    return DecisionVars(
        eps=layout.unpack("eps", v),
        W0=layout.unpack("W0", v),
        W1=layout.unpack("W1", v),
        Q=layout.unpack("Q", v),
        S=layout.unpack("S", v),
        Y=layout.unpack("Y", v),
        Z0=layout.unpack("Z0", v),
        Z1=layout.unpack("Z1", v),
        H=layout.unpack("H", v),
        eta=layout.unpack("eta", v) if p.uses_eta else None,
        report=report,
    )


def _most_violated_block(problem: SdpProblem, scale, congruences) -> str | None:
    """Diagnose infeasibility: minimize t with every block shifted by +t I.

    The block closest to binding at the optimum is the hardest to satisfy.
    """
    n = problem.n_vars
    blocks = []
    for blk in problem.blocks:
        coeffs = dict(blk.coeffs)
        coeffs[n] = np.eye(blk.dim)
        blocks.append(LmiBlock(blk.label, blk.dim, blk.const.copy(), coeffs))
    lin_G = np.hstack([problem.lin_G, np.zeros((problem.lin_G.shape[0], 1))])
    cost = np.zeros(n + 1)
    cost[n] = 1.0
    relaxed = SdpProblem(n + 1, blocks, cost, lin_G, problem.lin_h.copy())
    try:
        v, _ = solve_cvxopt(
            relaxed,
            var_scale=np.concatenate([scale, [1.0]]),
            block_congruence=congruences,
        )
    except (SdpInfeasibleError, SdpSolverError):
        return None
    eigs = {blk.label: blk.min_eigenvalue(v) for blk in problem.blocks}
    return min(eigs, key=eigs.get)


def recover_gains(d: DecisionVars, p: SynthesisParams) -> ControllerGains:
    """Invert the congruence: K, M, P_i, G_i from the solved variables."""
    cond = np.linalg.cond(d.H)
    if not np.isfinite(cond) or cond > 1e12:
        raise GainRecoveryError(f"H is numerically singular (condition number {cond:.3e})")
    Hinv = np.linalg.inv(d.H)

    def congr(Wmat):
        X = Hinv @ Wmat @ Hinv.T
        return 0.5 * (X + X.T)

    return ControllerGains(
        K=d.Y @ Hinv.T,
        M=congr(d.Q),
        P0=congr(d.W0),
        P1=congr(d.W1),
        G0=d.Z0 @ Hinv.T,
        G1=d.Z1 @ Hinv.T,
        eps=d.eps,
        u_bar=p.u_bar,
    )


@dataclass
class CheckResult:
    name: str
    passed: bool
    worst: float
    detail: str = ""


@dataclass
class VerificationReport:
    checks: list[CheckResult] = field(default_factory=list)
    sector_convention: str = "Z @ H^-T"

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def render(self) -> str:
        lines = []
        for c in self.checks:
            status = "PASS" if c.passed else "FAIL"
            lines.append(f"[{status}] {c.name}: worst = {c.worst:.6e}"
                         + (f"  ({c.detail})" if c.detail else ""))
        lines.append(f"sector matrices interpreted as {self.sector_convention}")
        lines.append("verification " + ("PASSED" if self.passed else "FAILED"))
        return "\n".join(lines)


def _pack_vars(layout: VarLayout, d: DecisionVars) -> np.ndarray:
    v = np.zeros(layout.n_vars)
    v[layout.index("eps")] = d.eps
    for name, mat in (("W0", d.W0), ("W1", d.W1), ("Q", d.Q)):
        for a in range(NX):
            for bcol in range(a, NX):
                v[layout.index(name, a, bcol)] = mat[a, bcol]
    for ell in range(NU):
        v[layout.index("S", ell)] = d.S[ell, ell]
    for name, mat in (("Y", d.Y), ("Z0", d.Z0), ("Z1", d.Z1)):
        for r in range(NU):
            for bcol in range(NX):
                v[layout.index(name, r, bcol)] = mat[r, bcol]
    for a in range(NX):
        for bcol in range(NX):
            v[layout.index("H", a, bcol)] = d.H[a, bcol]
    if d.eta is not None and "eta" in layout:
        v[layout.index("eta")] = d.eta
    return v


def _switched_quads(X: np.ndarray, g: ControllerGains):
    """Vectorized sigma and V over rows of X."""
    qm = np.einsum("ni,ij,nj->n", X, g.M, X)
    sigma = (qm < 0.0).astype(int)
    v0 = np.einsum("ni,ij,nj->n", X, g.P0, X)
    v1 = np.einsum("ni,ij,nj->n", X, g.P1, X)
    return sigma, np.where(sigma == 0, v0, v1)


def _closed_loop_step(X: np.ndarray, W: np.ndarray, g: ControllerGains,
                      model: DiscreteModel) -> np.ndarray:
    sigma, _ = _switched_quads(X, g)
    U = np.clip(sigma[:, None] * (X @ g.K.T), -g.u_bar, g.u_bar)
    return X @ model.A.T + U @ model.B.T + W @ model.B_w.T


def _sample_ring(g: ControllerGains, rng: np.random.Generator,
                 lo: float, hi: float, size: int) -> np.ndarray:
    D = rng.normal(size=(size, NX))
    D /= np.linalg.norm(D, axis=1, keepdims=True)
    sigma, q = _switched_quads(D, g)
    if np.any(q <= 0):
        raise ValueError("P_sigma not positive on its partition")
    levels = rng.uniform(lo, hi, size=size)
    return D * np.sqrt(levels / q)[:, None]


def _sample_ball(rng: np.random.Generator, radius_sq: float, size: int) -> np.ndarray:
    D = rng.normal(size=(size, NX))
    D /= np.linalg.norm(D, axis=1, keepdims=True)
    mag = np.sqrt(radius_sq * rng.random(size))
    return D * mag[:, None]


def verify_solution(g: ControllerGains, d: DecisionVars, p: SynthesisParams,
                    n_samples: int = 10_000, seed: int = 0,
                    tol_block: float = 1e-7, tol_dv: float = 1e-9) -> VerificationReport:
    """Independent numeric re-verification of the solved design.

    Uses only an eigensolver and direct closed-loop evaluation, never the
    SDP backend's own residuals: (a) min eigenvalue of every physical block,
    (b) positivity of P_i - (1-2i)M, (c) sampled Lyapunov decrease on the
    basin ring, (d) sampled invariance of the attractor under bounded noise,
    (e) saturation-sector containment on the basin, (f) trigger matrix sign
    split when the objective promotes firing reduction.
    """
    rng = np.random.default_rng(seed)
    rep = VerificationReport()
    layout = make_layout(p.uses_eta)
    v = _pack_vars(layout, d)

    problem = build_problem(p)
    worst_label, worst_eig = "", np.inf
    for blk in problem.blocks:
        e = blk.min_eigenvalue(v)
        if e < worst_eig:
            worst_label, worst_eig = blk.label, e
    rep.checks.append(CheckResult(
        "lmi_blocks_min_eig", worst_eig >= -tol_block, worst_eig,
        f"worst block {worst_label}, tolerance {-tol_block:g}"))

    part = min(float(np.linalg.eigvalsh(g.P0 - g.M)[0]),
               float(np.linalg.eigvalsh(g.P1 + g.M)[0]))
    rep.checks.append(CheckResult(
        "partition_positivity", part > 0.0, part, "min eig of P_i - (1-2i)M"))

    rep.checks.append(CheckResult(
        "attractor_within_basin", g.eps > 1.0, g.eps, "requires eps > 1"))

    if g.eps > 1.0:
        inv_eps = 1.0 / g.eps
        X = _sample_ring(g, rng, inv_eps, 1.0, n_samples)
        W = _sample_ball(rng, p.lambda_noise, n_samples)
        _, v_now = _switched_quads(X, g)
        _, v_next = _switched_quads(_closed_loop_step(X, W, g, p.model), g)
        dv = v_next - v_now - tol_dv * np.maximum(1.0, v_now)
        k = int(np.argmax(dv))
        rep.checks.append(CheckResult(
            "lyapunov_decrease_on_ring", bool(np.all(dv <= 0.0)), float(dv[k]),
            f"max of V(x+)-V(x)-tol at sample {k}"))

        X = _sample_ring(g, rng, 0.0, inv_eps, n_samples)
        W = _sample_ball(rng, p.lambda_noise, n_samples)
        _, v_next = _switched_quads(_closed_loop_step(X, W, g, p.model), g)
        worst_v = float(np.max(v_next))
        rep.checks.append(CheckResult(
            "attractor_invariance", worst_v <= inv_eps + tol_dv, worst_v,
            f"bound 1/eps + tol = {inv_eps + tol_dv:.6e}"))

        X = _sample_ring(g, rng, 0.0, 1.0, n_samples)
        sigma, _ = _switched_quads(X, g)
        for convention, G0, G1 in (("Z @ H^-T", g.G0, g.G1),
                                   ("Z @ H^-1", d.Z0 @ np.linalg.inv(d.H),
                                    d.Z1 @ np.linalg.inv(d.H))):
            Gx = np.where(sigma[:, None] == 0, X @ G0.T, X @ G1.T)
            worst_g = float(np.max(np.abs(Gx)))
            ok = worst_g <= g.u_bar * (1.0 + 1e-9)
            if ok or convention == "Z @ H^-1":
                break
        rep.sector_convention = convention
        rep.checks.append(CheckResult(
            "sector_containment", ok, worst_g,
            f"max |(G_sigma x)_l| on basin vs u_bar = {g.u_bar}"))

    if p.objective in ("firing", "mixed"):
        eigs = np.linalg.eigvalsh(g.M)
        ok = eigs[0] < 0.0 < eigs[-1]
        rep.checks.append(CheckResult(
            "trigger_sign_split", ok, float(eigs[0] * eigs[-1]),
            "M must have eigenvalues of both signs"))
    return rep
