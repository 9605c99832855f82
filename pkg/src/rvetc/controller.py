"""Run-time event-triggered control law.

Pure functions over immutable gains: trigger evaluation (sign of x'Mx),
saturated impulse computation, switched Lyapunov value and the
basin/attractor set queries.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ControllerGains:
    """Everything needed to run the ETC law and evaluate its sets.

    K is the 3x6 feedback gain, M the symmetric (indefinite) trigger
    matrix, P0/P1 the switched Lyapunov matrices, G0/G1 the sector
    matrices certifying |G_sigma x| <= u_bar on the basin.
    """

    K: np.ndarray
    M: np.ndarray
    P0: np.ndarray
    P1: np.ndarray
    G0: np.ndarray
    G1: np.ndarray
    eps: float
    u_bar: float

    def __post_init__(self):
        for name in ("M", "P0", "P1"):
            m = getattr(self, name)
            if not np.allclose(m, m.T, rtol=0, atol=1e-9 * max(1.0, np.linalg.norm(m))):
                raise ValueError(f"{name} must be symmetric")
        # eps > 1 is verified, not enforced here, so that defective gains
        # files can still be loaded and reported by the verification battery
        if not self.eps > 0.0:
            raise ValueError(f"attractor level eps must be positive, got {self.eps}")
        if not self.u_bar > 0.0:
            raise ValueError("u_bar must be positive")

    def P(self, sigma: int) -> np.ndarray:
        return self.P0 if sigma == 0 else self.P1

    def G(self, sigma: int) -> np.ndarray:
        return self.G0 if sigma == 0 else self.G1


@dataclass(frozen=True)
class TriggerDecision:
    sigma: int
    quad_value: float
    boundary: bool


@dataclass(frozen=True)
class ImpulseCommand:
    u_raw: np.ndarray
    u_applied: np.ndarray
    sigma: int


class Region(enum.Enum):
    INSIDE_ATTRACTOR = "inside_attractor"
    INSIDE_BASIN = "inside_basin"
    OUTSIDE = "outside"


#: relative slack for closed-set boundary classification
_SET_RTOL = 1e-12


def saturate(u: np.ndarray, u_bar: float) -> np.ndarray:
    """Componentwise clamp to [-u_bar, u_bar]."""
    if not u_bar > 0:
        raise ValueError("u_bar must be positive")
    return np.clip(np.asarray(u, float), -u_bar, u_bar)


def default_tie_tol(x: np.ndarray, M: np.ndarray) -> float:
    """Boundary-detection width 1e-12 * ||x||^2 * ||M||_2."""
    return 1e-12 * float(np.dot(x, x)) * float(np.abs(np.linalg.eigvalsh(M)).max())


def sigma_select(x: np.ndarray, M: np.ndarray, tie_tol: float | None = None) -> TriggerDecision:
    """Trigger logic: fire (sigma=1) iff x'Mx < 0.

    Either choice is valid exactly on the switching surface; ties break to
    sigma=0 (no impulse) within ``tie_tol`` and the boundary flag is set.
    """
    x = np.asarray(x, float)
    q = float(x @ M @ x)
    if tie_tol is None:
        tie_tol = default_tie_tol(x, M)
    if abs(q) <= tie_tol:
        return TriggerDecision(sigma=0, quad_value=q, boundary=True)
    return TriggerDecision(sigma=0 if q > 0 else 1, quad_value=q, boundary=False)


def etc_input(x: np.ndarray, g: ControllerGains, tie_tol: float | None = None) -> ImpulseCommand:
    """Saturated event-triggered impulse u = sat(sigma(x) K x)."""
    dec = sigma_select(x, g.M, tie_tol)
    u_raw = dec.sigma * (g.K @ np.asarray(x, float))
    return ImpulseCommand(u_raw=u_raw, u_applied=saturate(u_raw, g.u_bar), sigma=dec.sigma)


def lyapunov_value(x: np.ndarray, g: ControllerGains, tie_tol: float | None = None) -> float:
    """Switched Lyapunov value V(x) = x' P_sigma(x) x."""
    x = np.asarray(x, float)
    dec = sigma_select(x, g.M, tie_tol)
    return float(x @ g.P(dec.sigma) @ x)


def set_membership(x: np.ndarray, g: ControllerGains) -> Region:
    """Classify against the attractor (V <= 1/eps) and basin (V <= 1) sublevels."""
    if not g.eps > 1.0:
        raise ValueError(f"set ordering requires eps > 1, got {g.eps}")
    v = lyapunov_value(x, g)
    if v <= (1.0 / g.eps) * (1.0 + _SET_RTOL):
        return Region.INSIDE_ATTRACTOR
    if v <= 1.0 + _SET_RTOL:
        return Region.INSIDE_BASIN
    return Region.OUTSIDE


def sample_level_ring(g: ControllerGains, rng: np.random.Generator,
                      lo_level: float, hi_level: float, size: int) -> np.ndarray:
    """Sample states with lo_level < V(x) <= hi_level, uniformly in level per ray.

    sigma is constant along rays (quadratic forms are scale-invariant in
    sign), so V(t d) = t^2 d'P_sigma(d) d can be inverted per direction.
    """
    out = np.empty((size, 6))
    k = 0
    while k < size:
        d = rng.normal(size=6)
        nrm = np.linalg.norm(d)
        if nrm == 0.0:
            continue
        d /= nrm
        dec = sigma_select(d, g.M)
        q = float(d @ g.P(dec.sigma) @ d)
        if q <= 0.0:
            raise ValueError("P_sigma not positive on its partition; gains invalid")
        level = rng.uniform(lo_level, hi_level)
        out[k] = d * np.sqrt(level / q)
        k += 1
    return out
