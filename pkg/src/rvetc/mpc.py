"""Receding-horizon comparison controller: condensed QP with box input bounds.

The finite-horizon quadratic cost

    sum_{j=1..Np} x_{k+j}' Qf x_{k+j} + sum_{j=0..Np-1} u_{k+j}' Rf u_{k+j}
        + x_{k+Np}' P_tilde x_{k+Np}

is condensed over the predicted states into 1/2 u_F' H u_F + f(x_k)' u_F
(equal to the cost up to an x-only constant), solved over the stacked input
box, and only the first input is applied. The terminal weight defaults to
ten times the LQR cost-to-go from a discrete algebraic Riccati equation.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from rvetc import kernels
from rvetc.dynamics import DiscreteModel


class DareError(RuntimeError):
    """Riccati fixed-point iteration failed to converge."""


class QpSolverError(RuntimeError):
    """Box-QP solve exceeded its iteration budget; residual attached."""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class MpcWeights:
    """Stage weights, terminal weight and horizon length."""

    Qf: np.ndarray
    Rf: np.ndarray
    P_tilde: np.ndarray
    Np: int

    def __post_init__(self):
        if self.Np < 1:
            raise ValueError(f"horizon must be >= 1, got {self.Np}")
        if np.linalg.eigvalsh(0.5 * (self.Rf + self.Rf.T))[0] <= 0:
            raise ValueError("Rf must be positive definite")
        for name in ("Qf", "P_tilde"):
            m = getattr(self, name)
            if np.linalg.eigvalsh(0.5 * (m + m.T))[0] < -1e-12:
                raise ValueError(f"{name} must be positive semidefinite")


def dare_solve(A: np.ndarray, B: np.ndarray, Qf: np.ndarray, Rf: np.ndarray,
               tol: float = 1e-12, max_iter: int = 100_000) -> np.ndarray:
    """Fixed point of the Riccati recursion
    P <- A'PA - A'PB (R + B'PB)^-1 B'PA + Q, started from Q."""
    P = np.asarray(Qf, float).copy()
    for _ in range(max_iter):
        BtP = B.T @ P
        Pn = A.T @ P @ A - A.T @ P @ B @ np.linalg.solve(Rf + BtP @ B, BtP @ A) + Qf
        Pn = 0.5 * (Pn + Pn.T)
        if np.max(np.abs(Pn - P)) < tol * max(1.0, np.max(np.abs(P))):
            P = Pn
            break
        P = Pn
    else:
        raise DareError(
            f"Riccati iteration did not converge within {max_iter} iterations "
            f"(last update {np.max(np.abs(Pn - P)):.3e})")
    res = dare_residual(A, B, Qf, Rf, P)
    if res > 1e-9:
        raise DareError(f"DARE residual {res:.3e} exceeds 1e-9 after convergence")
    return P


def dare_residual(A, B, Qf, Rf, P) -> float:
    """Relative infinity-norm residual of the DARE at P."""
    BtP = B.T @ P
    R = A.T @ P @ A - P - A.T @ P @ B @ np.linalg.solve(Rf + BtP @ B, BtP @ A) + Qf
    return float(np.max(np.abs(R)) / max(1.0, np.max(np.abs(P))))


def lqr_gain(A, B, Rf, P) -> np.ndarray:
    """Infinite-horizon feedback u = -(R + B'PB)^-1 B'PA x."""
    BtP = B.T @ P
    return -np.linalg.solve(Rf + BtP @ B, BtP @ A)


def make_weights(model: DiscreteModel, Qf: np.ndarray, Rf: np.ndarray,
                 Np: int, terminal_scale: float = 10.0) -> MpcWeights:
    """Weights with the terminal matrix tied to the LQR cost-to-go."""
    P_lqr = dare_solve(model.A, model.B, Qf, Rf)
    return MpcWeights(Qf=np.asarray(Qf, float), Rf=np.asarray(Rf, float),
                      P_tilde=terminal_scale * P_lqr, Np=int(Np))


def build_prediction(A: np.ndarray, B: np.ndarray, Np: int):
    """Stacked prediction maps: x_stack = F x_k + G u_stack.

    F stacks A^1..A^Np; G is block lower triangular with blocks A^(i-j) B.
    """
    if Np < 1:
        raise ValueError(f"horizon must be >= 1, got {Np}")
    nx, nu = B.shape
    F = np.zeros((nx * Np, nx))
    G = np.zeros((nx * Np, nu * Np))
    apow_B = [B]
    apow = A.copy()
    F[0:nx] = A
    for k in range(1, Np):
        apow_B.append(A @ apow_B[-1])
        apow = A @ apow
        F[k * nx:(k + 1) * nx] = apow
    for i in range(Np):
        for j in range(i + 1):
            G[i * nx:(i + 1) * nx, j * nu:(j + 1) * nu] = apow_B[i - j]
    return F, G


@dataclass
class CondensedQp:
    """State-independent part of the condensed horizon QP.

    ``H`` is the Hessian of the objective 1/2 u'Hu + f(x)'u; ``f_map``
    sends the current state to the gradient offset f; ``box`` is the
    per-entry input bound. Factorization and Lipschitz caches are built
    lazily on first solve.
    """

    H: np.ndarray
    f_map: np.ndarray
    box: float
    max_iter: int = 20_000
    kkt_tol_scale: float = 1e-8
    _cho: tuple | None = field(default=None, repr=False)
    _lip: float | None = field(default=None, repr=False)

    def f_of(self, x: np.ndarray) -> np.ndarray:
        return self.f_map @ np.asarray(x, float)

    def objective(self, f: np.ndarray, u: np.ndarray) -> float:
        return float(0.5 * u @ self.H @ u + f @ u)

    def cho(self):
        if self._cho is None:
            self._cho = cho_factor(self.H)
        return self._cho

    def lipschitz(self) -> float:
        if self._lip is None:
            self._lip = float(np.linalg.eigvalsh(self.H)[-1])
        return self._lip


def condense(A: np.ndarray, B: np.ndarray, w: MpcWeights,
             u_bar: float = np.inf) -> CondensedQp:
    """Eliminate predicted states from the horizon cost.

    The returned Hessian is 2 (G'QG + R + G_N' P G_N) so that
    1/2 u'Hu + f'u reproduces the expanded cost exactly (up to the x-only
    constant), with f = 2 (G'QF + G_N' P F_N) x.
    """
    nx, nu = B.shape
    F, G = build_prediction(A, B, w.Np)
    GN = G[-nx:, :]
    FN = F[-nx:, :]
    Qblk = np.kron(np.eye(w.Np), w.Qf)
    Rblk = np.kron(np.eye(w.Np), w.Rf)
    H = 2.0 * (G.T @ Qblk @ G + Rblk + GN.T @ w.P_tilde @ GN)
    H = 0.5 * (H + H.T)
    f_map = 2.0 * (G.T @ Qblk @ F + GN.T @ w.P_tilde @ FN)
    return CondensedQp(H=H, f_map=f_map, box=float(u_bar))


def kkt_residual(qp: CondensedQp, f: np.ndarray, u: np.ndarray) -> float:
    """Max KKT violation of the box QP at u (gradient H u + f)."""
    return kernels.kkt_residual_box(qp.H, f, qp.box, u)


def _kkt_from_gradient(g, u, ub) -> float:
    r = np.abs(g)
    at_lo = u <= -ub
    at_hi = u >= ub
    r[at_lo] = np.maximum(0.0, -g[at_lo])
    r[at_hi] = np.maximum(0.0, g[at_hi])
    return float(np.max(r, initial=0.0))


def _solve_refined(Hff, rhs):
    sol = np.linalg.solve(Hff, rhs)
    return sol + np.linalg.solve(Hff, rhs - Hff @ sol)


def _active_set_polish(H, f, ub, u, tol, max_steps=None):
    """Primal active-set refinement: finishes what FISTA started.

    Classic feasible active-set method for the box QP: step from the
    current iterate toward the working-set equality minimizer, stop at the
    first blocking bound and pin it; at an equality minimizer release the
    most negative multiplier. One constraint changes per solve, the
    objective decreases monotonically, and one iterative-refinement pass
    per solve keeps the interior gradient accurate for badly conditioned
    Hessians. Finite for positive definite H.
    """
    n = len(f)
    u = np.clip(np.asarray(u, float).copy(), -ub, ub)
    pinned = np.zeros(n, dtype=bool)
    if np.isfinite(ub):
        pinned = np.abs(u) >= ub
    if max_steps is None:
        max_steps = 6 * n
    for _ in range(max_steps):
        free = ~pinned
        if free.any():
            rhs = -(f[free] + H[np.ix_(free, pinned)] @ u[pinned])
            try:
                sol = _solve_refined(H[np.ix_(free, free)], rhs)
            except np.linalg.LinAlgError:
                return u
            d = sol - u[free]
            # largest feasible fraction of the step toward the minimizer
            with np.errstate(divide="ignore", invalid="ignore"):
                t_hi = np.where(d > 0, (ub - u[free]) / d, np.inf)
                t_lo = np.where(d < 0, (-ub - u[free]) / d, np.inf)
            t = np.minimum(t_hi, t_lo)
            blocker = int(np.argmin(t))
            alpha = min(1.0, float(t[blocker]))
            u[free] = u[free] + alpha * d
            if alpha < 1.0:
                idx = np.flatnonzero(free)[blocker]
                u[idx] = ub if d[blocker] > 0 else -ub
                pinned[idx] = True
                continue
        # at the working-set minimizer: check optimality, release one bound
        g = H @ u + f
        if _kkt_from_gradient(g.copy(), u, ub) <= tol:
            return u
        # at +ub optimality needs g <= 0, at -ub it needs g >= 0
        mult = np.where(pinned, np.where(u > 0, -g, g), 0.0)
        idx = int(np.argmin(mult))
        if mult[idx] >= 0.0:
            return u
        pinned[idx] = False
    return u


def qp_solve_box(qp: CondensedQp, x_k: np.ndarray,
                 u0: np.ndarray | None = None) -> np.ndarray:
    """Solve the condensed QP for the stacked input sequence.

    Fast path: when the unconstrained minimizer (via a cached Cholesky
    factor) lies inside the box it is optimal. Otherwise accelerated
    projected gradient runs to the KKT tolerance, with an active-set polish
    as backstop near the tolerance floor.
    """
    f = qp.f_of(x_k)
    tol = qp.kkt_tol_scale * (1.0 + float(np.max(np.abs(f), initial=0.0)))
    u_unc = cho_solve(qp.cho(), -f)
    if np.max(np.abs(u_unc), initial=0.0) <= qp.box:
        return u_unc
    if u0 is None:
        u0 = np.zeros_like(f)
    u, _ = kernels.qp_box_fista(qp.H, f, qp.box, u0, qp.lipschitz(),
                                tol, qp.max_iter)
    res = kkt_residual(qp, f, u)
    if res > tol:
        u = _active_set_polish(qp.H, f, qp.box, u, tol)
        res = kkt_residual(qp, f, u)
    if res > tol:
        raise QpSolverError(
            f"box QP did not reach KKT tolerance {tol:.3e} "
            f"within {qp.max_iter} iterations (residual {res:.3e})", res)
    return u


def mpc_step(x_hat: np.ndarray, qp: CondensedQp,
             u0: np.ndarray | None = None) -> np.ndarray:
    """Receding-horizon move: solve over the horizon, apply the first input.

    The box constraint already bounds the move, so saturation is a no-op;
    this is asserted rather than assumed.
    """
    u_first = qp_solve_box(qp, x_hat, u0)[:3]
    clipped = np.clip(u_first, -qp.box, qp.box)
    assert np.array_equal(clipped, u_first), "box-feasible QP move escaped the box"
    return u_first


class MpcController:
    """Stateful wrapper keeping the shifted previous solution as warm start."""

    def __init__(self, qp: CondensedQp):
        self.qp = qp
        self._warm = np.zeros(qp.H.shape[0])

    def step(self, x_hat: np.ndarray) -> np.ndarray:
        u_full = qp_solve_box(self.qp, x_hat, self._warm)
        self._warm = np.roll(u_full, -3)
        self._warm[-3:] = 0.0
        return u_full[:3]
