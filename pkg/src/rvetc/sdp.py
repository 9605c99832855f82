"""Neutral semidefinite-program description and the conic-solver backend.

A problem is a flat scalar variable vector v, a linear cost c'v, elementwise
linear inequalities, and a list of symmetric blocks affine in v that must be
PSD. The backend maps this 1:1 onto CVXOPT's SDP form. A diagonal variable
scaling and per-block congruences can be supplied to precondition badly
scaled problems; both transformations are exact (the returned v and the
feasible set are those of the original problem).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from cvxopt import matrix as cvx_matrix
from cvxopt import solvers as cvx_solvers


class SdpInfeasibleError(RuntimeError):
    """Primal infeasibility certified by the solver."""

    def __init__(self, message: str, certificate_residual: float | None = None):
        super().__init__(message)
        self.certificate_residual = certificate_residual


class SdpSolverError(RuntimeError):
    """Solver failed to converge; residuals attached for diagnosis."""

    def __init__(self, message: str, residuals: dict | None = None):
        super().__init__(message)
        self.residuals = residuals or {}


@dataclass
class LmiBlock:
    """Symmetric matrix-valued affine map v -> const + sum_k v[k] * coeffs[k]."""

    label: str
    dim: int
    const: np.ndarray
    coeffs: dict[int, np.ndarray] = field(default_factory=dict)

    def evaluate(self, v: np.ndarray) -> np.ndarray:
        out = self.const.copy()
        for k, F in self.coeffs.items():
            out += v[k] * F
        return out

    def min_eigenvalue(self, v: np.ndarray) -> float:
        return float(np.linalg.eigvalsh(self.evaluate(v))[0])


@dataclass
class SdpProblem:
    n_vars: int
    blocks: list[LmiBlock]
    cost: np.ndarray
    lin_G: np.ndarray  # lin_G @ v <= lin_h, shape (n_ineq, n_vars)
    lin_h: np.ndarray


@dataclass
class SolverReport:
    backend: str
    status: str
    iterations: int
    primal_objective: float
    dual_objective: float
    gap: float
    relative_gap: float | None
    primal_infeasibility: float
    dual_infeasibility: float
    block_min_eigs: dict[str, float] = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "backend": self.backend,
            "status": self.status,
            "iterations": self.iterations,
            "primal_objective": self.primal_objective,
            "dual_objective": self.dual_objective,
            "gap": self.gap,
            "relative_gap": self.relative_gap,
            "primal_infeasibility": self.primal_infeasibility,
            "dual_infeasibility": self.dual_infeasibility,
            "block_min_eigs": dict(self.block_min_eigs),
        }


_CVXOPT_OPTIONS = {
    "show_progress": False,
    "abstol": 1e-8,
    "reltol": 1e-8,
    "feastol": 1e-8,
    "maxiters": 200,
}

# interior-point iterates can collapse onto the cone boundary before the
# tightest tolerances are met; these settings are reliably attainable
_CVXOPT_RELAXED = {"abstol": 1e-7, "reltol": 1e-7, "feastol": 1e-7}


def _transform(problem: SdpProblem, var_scale: np.ndarray,
               block_congruence: list[np.ndarray | None],
               psd_margin: float) -> SdpProblem:
    """Substitute v = var_scale * v' and congruence-transform each block.

    Congruences preserve positive semidefiniteness; ``psd_margin`` is
    subtracted from each transformed constant so the solver returns
    strictly interior blocks.
    """
    blocks = []
    for blk, C in zip(problem.blocks, block_congruence):
        if C is None:
            const = blk.const.copy()
            coeffs = {k: F * var_scale[k] for k, F in blk.coeffs.items()}
        else:
            Cinv = np.linalg.inv(C)
            const = Cinv @ blk.const @ Cinv.T
            coeffs = {k: (Cinv @ F @ Cinv.T) * var_scale[k]
                      for k, F in blk.coeffs.items()}
        const = const - psd_margin * np.eye(blk.dim)
        blocks.append(LmiBlock(blk.label, blk.dim, const, coeffs))
    lin_G = problem.lin_G * var_scale[None, :] if problem.lin_G.size else problem.lin_G
    return SdpProblem(
        n_vars=problem.n_vars,
        blocks=blocks,
        cost=problem.cost * var_scale,
        lin_G=lin_G,
        lin_h=problem.lin_h.copy(),
    )


def solve_cvxopt(problem: SdpProblem,
                 var_scale: np.ndarray | None = None,
                 block_congruence: list[np.ndarray | None] | None = None,
                 psd_margin: float = 0.0,
                 options: dict | None = None) -> tuple[np.ndarray, SolverReport]:
    """Solve the SDP with CVXOPT's interior-point cone solver.

    Returns the variable vector in the ORIGINAL (unscaled) coordinates and
    a report. Raises :class:`SdpInfeasibleError` on certified infeasibility
    and :class:`SdpSolverError` on non-convergence.
    """
    if var_scale is None:
        var_scale = np.ones(problem.n_vars)
    if block_congruence is None:
        block_congruence = [None] * len(problem.blocks)
    work = _transform(problem, var_scale, block_congruence, psd_margin)

    c = cvx_matrix(work.cost.astype(float))
    Gs, hs = [], []
    for blk in work.blocks:
        d = blk.dim
        G = np.zeros((d * d, problem.n_vars))
        for k, F in blk.coeffs.items():
            G[:, k] = -F.flatten(order="F")
        Gs.append(cvx_matrix(G))
        hs.append(cvx_matrix(blk.const))
    Gl = hl = None
    if work.lin_G.size:
        Gl = cvx_matrix(work.lin_G.astype(float))
        hl = cvx_matrix(work.lin_h.astype(float))

    opts = dict(_CVXOPT_OPTIONS)
    if options:
        opts.update(options)
    try:
        sol = cvx_solvers.sdp(c, Gl=Gl, hl=hl, Gs=Gs, hs=hs, options=opts)
    except ArithmeticError:
        relaxed = dict(opts)
        for key, val in _CVXOPT_RELAXED.items():
            relaxed[key] = max(relaxed.get(key, val), val)
        try:
            sol = cvx_solvers.sdp(c, Gl=Gl, hl=hl, Gs=Gs, hs=hs, options=relaxed)
        except ArithmeticError as exc:
            raise SdpSolverError(
                f"interior-point iteration collapsed at the cone boundary: {exc}",
                residuals={"options": {k: v for k, v in relaxed.items()
                                       if k != "show_progress"}},
            ) from exc

    status = sol["status"]
    if status == "primal infeasible":
        raise SdpInfeasibleError(
            "SDP certified primal infeasible",
            certificate_residual=sol.get("residual as primal infeasibility certificate"),
        )
    if status == "dual infeasible":
        raise SdpSolverError("SDP certified dual infeasible (objective unbounded)",
                             residuals={"status": status})
    if sol["x"] is None:
        raise SdpSolverError("solver returned no iterate", residuals={"status": status})

    v = np.array(sol["x"]).ravel() * var_scale
    report = SolverReport(
        backend="cvxopt",
        status=status,
        iterations=int(sol.get("iterations", -1)),
        primal_objective=float(sol["primal objective"]),
        dual_objective=float(sol["dual objective"]),
        gap=float(sol["gap"]),
        relative_gap=None if sol.get("relative gap") is None else float(sol["relative gap"]),
        primal_infeasibility=float(sol["primal infeasibility"]),
        dual_infeasibility=float(sol["dual infeasibility"]),
        block_min_eigs={blk.label: blk.min_eigenvalue(v) for blk in problem.blocks},
    )
    if status != "optimal":
        raise SdpSolverError(
            f"solver stopped with status '{status}' "
            f"(gap={report.gap:.3e}, primal_inf={report.primal_infeasibility:.3e}, "
            f"dual_inf={report.dual_infeasibility:.3e})",
            residuals=report.as_dict(),
        )
    return v, report


class VarLayout:
    """Maps named scalar/symmetric/diagonal/full matrix variables to a flat vector."""

    def __init__(self):
        self._specs: dict[str, tuple[str, tuple[int, ...], int]] = {}
        self._n = 0

    def add(self, name: str, kind: str, shape: tuple[int, ...] = ()) -> None:
        if kind == "scalar":
            size = 1
        elif kind == "sym":
            size = shape[0] * (shape[0] + 1) // 2
        elif kind == "diag":
            size = shape[0]
        elif kind == "full":
            size = shape[0] * shape[1]
        else:
            raise ValueError(f"unknown variable kind {kind!r}")
        self._specs[name] = (kind, shape, self._n)
        self._n += size

    @property
    def n_vars(self) -> int:
        return self._n

    def __contains__(self, name: str) -> bool:
        return name in self._specs

    def entries(self, name: str):
        """Yield (flat_index, basis_matrix) pairs spanning the named variable."""
        kind, shape, off = self._specs[name]
        if kind == "scalar":
            yield off, np.array(1.0)
        elif kind == "sym":
            n = shape[0]
            k = 0
            for i in range(n):
                for j in range(i, n):
                    E = np.zeros((n, n))
                    E[i, j] = 1.0
                    E[j, i] = 1.0
                    yield off + k, E
                    k += 1
        elif kind == "diag":
            n = shape[0]
            for i in range(n):
                E = np.zeros((n, n))
                E[i, i] = 1.0
                yield off + i, E
        else:
            rows, cols = shape
            k = 0
            for i in range(rows):
                for j in range(cols):
                    E = np.zeros((rows, cols))
                    E[i, j] = 1.0
                    yield off + k, E
                    k += 1

    def index(self, name: str, *ij: int) -> int:
        kind, shape, off = self._specs[name]
        if kind == "scalar":
            return off
        if kind == "diag":
            return off + ij[0]
        if kind == "sym":
            i, j = min(ij), max(ij)
            n = shape[0]
            # row-major upper-triangle offset
            return off + i * n - i * (i - 1) // 2 + (j - i)
        i, j = ij
        return off + i * shape[1] + j

    def unpack(self, name: str, v: np.ndarray) -> np.ndarray | float:
        kind, shape, off = self._specs[name]
        if kind == "scalar":
            return float(v[off])
        if kind == "diag":
            return np.diag(v[off:off + shape[0]])
        if kind == "sym":
            n = shape[0]
            out = np.zeros((n, n))
            k = off
            for i in range(n):
                for j in range(i, n):
                    out[i, j] = v[k]
                    out[j, i] = v[k]
                    k += 1
            return out
        rows, cols = shape
        return v[off:off + rows * cols].reshape(rows, cols)
