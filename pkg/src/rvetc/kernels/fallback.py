"""Pure-NumPy implementations of the hot kernels.

Mirrors `_native.pyx` operation for operation so that either backend can
serve the same callers; the compiled module is preferred when importable.
"""
from __future__ import annotations

import numpy as np

BACKEND = "fallback"


def rk4_two_body(y: np.ndarray, mu: float, dt: float, substeps: int) -> np.ndarray:
    """Advance [r; v] by dt under point-mass gravity, classical RK4, fixed step."""
    y = np.array(y, dtype=float)
    h = dt / substeps

    def rhs(s):
        r = s[:3]
        rn = np.sqrt(r[0] * r[0] + r[1] * r[1] + r[2] * r[2])
        a = (-mu / (rn * rn * rn)) * r
        return np.concatenate([s[3:], a])

    for _ in range(substeps):
        k1 = rhs(y)
        k2 = rhs(y + 0.5 * h * k1)
        k3 = rhs(y + 0.5 * h * k2)
        k4 = rhs(y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return y


def kkt_residual_box(H: np.ndarray, f: np.ndarray, u_bar: float,
                     u: np.ndarray) -> float:
    """Max KKT violation of min 1/2 u'Hu + f'u over the box [-u_bar, u_bar]^n.

    Interior coordinates need zero gradient; coordinates at a bound need a
    correctly signed gradient.
    """
    g = H @ u + f
    at_lo = u <= -u_bar
    at_hi = u >= u_bar
    r = np.abs(g)
    r[at_lo] = np.maximum(0.0, -g[at_lo])
    r[at_hi] = np.maximum(0.0, g[at_hi])
    return float(np.max(r)) if r.size else 0.0


def qp_box_fista(H: np.ndarray, f: np.ndarray, u_bar: float, u0: np.ndarray,
                 lip: float, tol: float, max_iter: int,
                 check_every: int = 20) -> tuple[np.ndarray, int]:
    """Accelerated projected gradient (FISTA) with adaptive restart on a box.

    Returns (u, iterations). Iterations equals max_iter when the KKT
    tolerance was not reached; callers may then polish or report failure.
    """
    x = np.clip(np.asarray(u0, float), -u_bar, u_bar)
    y = x.copy()
    t = 1.0
    for it in range(max_iter):
        g = H @ y + f
        xn = np.clip(y - g / lip, -u_bar, u_bar)
        tn = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        yn = xn + ((t - 1.0) / tn) * (xn - x)
        # gradient-mapping restart: momentum points against progress
        if np.dot(xn - x, y - xn) > 0.0:
            yn = xn.copy()
            tn = 1.0
        x, y, t = xn, yn, tn
        if (it + 1) % check_every == 0 and kkt_residual_box(H, f, u_bar, x) <= tol:
            return x, it + 1
    return x, max_iter
