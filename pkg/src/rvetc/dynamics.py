"""Relative orbital dynamics: HCW model, exact discretization, two-body truth.

State ordering is ``[rx, ry, rz, vx, vy, vz]`` in the target LVLH frame:
x radial (outward), z orbit-normal, y completing the right-handed triad.
All quantities are SI (m, m/s, rad, s).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from rvetc import kernels

MU_EARTH = 398600.4e9  # m^3/s^2

STATE_ORDER = ("rx", "ry", "rz", "vx", "vy", "vz")


class DegenerateStateError(ValueError):
    """Raised for states with no usable radial/orbit-normal geometry."""


@dataclass(frozen=True)
class OrbitSpec:
    """Circular target orbit: gravitational parameter, radius, orientation.

    ``n_override`` replaces the derived mean motion sqrt(mu/R0^3) when a
    literal (e.g. rounded) reference value must be reproduced.
    """

    mu_grav: float = MU_EARTH
    R0: float = 6878e3
    inclination: float = 0.0
    raan: float = 0.0
    n_override: float | None = None

    def __post_init__(self):
        if not (np.isfinite(self.R0) and self.R0 > 0):
            raise ValueError(f"orbit radius must be positive, got {self.R0}")
        if not (np.isfinite(self.mu_grav) and self.mu_grav > 0):
            raise ValueError(f"mu_grav must be positive, got {self.mu_grav}")

    @property
    def mean_motion(self) -> float:
        if self.n_override is not None:
            return float(self.n_override)
        return float(np.sqrt(self.mu_grav / self.R0**3))


@dataclass(frozen=True)
class StateVector:
    """Relative position/velocity in LVLH, packed as x = [r; v]."""

    vec: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vec, dtype=float).reshape(6)
        if not np.all(np.isfinite(v)):
            raise ValueError("state vector has non-finite components")
        object.__setattr__(self, "vec", v)

    @classmethod
    def from_rv(cls, r, v) -> "StateVector":
        return cls(np.concatenate([np.asarray(r, float), np.asarray(v, float)]))

    @property
    def r(self) -> np.ndarray:
        return self.vec[:3]

    @property
    def v(self) -> np.ndarray:
        return self.vec[3:]


@dataclass(frozen=True)
class ContinuousModel:
    """HCW continuous-time matrices (state, impulse input, noise input)."""

    A_c: np.ndarray
    B_c: np.ndarray
    B_wc: np.ndarray


@dataclass(frozen=True)
class DiscreteModel:
    """Zero-order-hold discretization of the HCW model at period T."""

    A: np.ndarray
    B: np.ndarray
    B_w: np.ndarray
    T: float


@dataclass(frozen=True)
class InertialState:
    """Position/velocity in the geocentric-equatorial (ECI) frame."""

    r_eci: np.ndarray
    v_eci: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "r_eci", np.asarray(self.r_eci, float).reshape(3))
        object.__setattr__(self, "v_eci", np.asarray(self.v_eci, float).reshape(3))
        if np.linalg.norm(self.r_eci) <= 0.0:
            raise DegenerateStateError("inertial position has zero norm")


def hcw_continuous(n: float) -> ContinuousModel:
    """HCW state-space matrices for mean motion ``n`` (rad/s).

    In-plane (x-y) and out-of-plane (z) dynamics are decoupled; noise
    enters the velocity rows only.
    """
    if not (np.isfinite(n) and n > 0):
        raise ValueError(f"mean motion must be positive and finite, got {n}")
    A_c = np.zeros((6, 6))
    A_c[0:3, 3:6] = np.eye(3)
    A_c[3, 0] = 3.0 * n * n
    A_c[3, 4] = 2.0 * n
    A_c[4, 3] = -2.0 * n
    A_c[5, 2] = -n * n
    B_c = np.zeros((6, 3))
    B_c[3:6, :] = np.eye(3)
    B_wc = np.zeros((6, 6))
    B_wc[3:6, 3:6] = np.eye(3)
    return ContinuousModel(A_c, B_c, B_wc)


def discretize(cm: ContinuousModel, T: float) -> DiscreteModel:
    """Exact ZOH discretization over sampling period ``T``.

    A = exp(A_c T), B = A B_c (impulses change velocity at the interval
    start), and B_w integrates the exponential over the period via the
    augmented-block identity

        exp([[A_c, I], [0, 0]] T) = [[A, int_0^T exp(A_c s) ds], [0, I]].
    """
    if not (np.isfinite(T) and T > 0):
        raise ValueError(f"sampling period must be positive, got {T}")
    A_c = cm.A_c
    nx = A_c.shape[0]
    A = expm(A_c * T)
    B = A @ cm.B_c
    aug = np.zeros((2 * nx, 2 * nx))
    aug[:nx, :nx] = A_c
    aug[:nx, nx:] = np.eye(nx)
    int_exp = expm(aug * T)[:nx, nx:]
    B_w = int_exp @ cm.B_wc
    return DiscreteModel(A=A, B=B, B_w=B_w, T=float(T))


def hcw_stm_closed_form(n: float, t: float) -> np.ndarray:
    """Closed-form HCW state transition matrix (independent of expm).

    Textbook sin/cos solution for the state ordering [r; v]; serves as
    the analytic oracle for :func:`discretize`.
    """
    if not (np.isfinite(n) and n > 0):
        raise ValueError(f"mean motion must be positive and finite, got {n}")
    nt = n * t
    c = np.cos(nt)
    s = np.sin(nt)
    return np.array([
        [4 - 3 * c,        0.0, 0.0,  s / n,            2 * (1 - c) / n,      0.0],
        [6 * (s - nt),     1.0, 0.0,  2 * (c - 1) / n,  (4 * s - 3 * nt) / n, 0.0],
        [0.0,              0.0, c,    0.0,              0.0,                  s / n],
        [3 * n * s,        0.0, 0.0,  c,                2 * s,                0.0],
        [6 * n * (c - 1),  0.0, 0.0,  -2 * s,           4 * c - 3,            0.0],
        [0.0,              0.0, -n * s, 0.0,            0.0,                  c],
    ])


def two_body_accel(s: InertialState, mu_grav: float) -> np.ndarray:
    """Point-mass gravitational acceleration -mu r / ||r||^3."""
    rnorm = np.linalg.norm(s.r_eci)
    if rnorm <= 0.0:
        raise DegenerateStateError("two-body acceleration singular at r = 0")
    return -mu_grav * s.r_eci / rnorm**3


def propagate_two_body(s: InertialState, dt: float, substeps: int,
                       mu_grav: float = MU_EARTH) -> InertialState:
    """Fixed-step classical RK4 integration of the two-body problem."""
    if not (np.isfinite(dt) and dt > 0):
        raise ValueError(f"dt must be positive, got {dt}")
    if substeps < 1:
        raise ValueError(f"substeps must be >= 1, got {substeps}")
    y = np.concatenate([s.r_eci, s.v_eci])
    y = kernels.rk4_two_body(y, mu_grav, dt, int(substeps))
    if not np.all(np.isfinite(y)) or np.linalg.norm(y[:3]) <= 0.0:
        raise DegenerateStateError("two-body propagation hit a singular radius")
    return InertialState(y[:3], y[3:])


def lvlh_basis(target: InertialState) -> np.ndarray:
    """Rotation matrix ECI -> LVLH; rows are the LVLH axes in ECI.

    x = r/|r| (outward radial), z = h/|h| (orbit normal), y = z x x.
    """
    r = target.r_eci
    h = np.cross(r, target.v_eci)
    hnorm = np.linalg.norm(h)
    rnorm = np.linalg.norm(r)
    if rnorm <= 0.0 or hnorm <= 0.0:
        raise DegenerateStateError("LVLH frame undefined: zero radius or angular momentum")
    x_hat = r / rnorm
    z_hat = h / hnorm
    y_hat = np.cross(z_hat, x_hat)
    return np.vstack([x_hat, y_hat, z_hat])


def _lvlh_rate(target: InertialState) -> np.ndarray:
    """Angular velocity of the LVLH frame, expressed in LVLH (0, 0, |h|/r^2)."""
    r = target.r_eci
    h = np.cross(r, target.v_eci)
    return np.array([0.0, 0.0, np.linalg.norm(h) / np.dot(r, r)])


def relative_state_lvlh(target: InertialState, chaser: InertialState) -> StateVector:
    """Chaser state relative to the target, in the target LVLH frame.

    Velocity includes the transport-theorem correction for the rotating
    frame: v_rel = R (v_c - v_t) - omega x rho.
    """
    R = lvlh_basis(target)
    rho = R @ (chaser.r_eci - target.r_eci)
    v_rel = R @ (chaser.v_eci - target.v_eci) - np.cross(_lvlh_rate(target), rho)
    return StateVector.from_rv(rho, v_rel)


def inertial_from_relative(target: InertialState, x: StateVector) -> InertialState:
    """Inverse of :func:`relative_state_lvlh`: chaser ECI state from LVLH offsets."""
    R = lvlh_basis(target)
    r_c = target.r_eci + R.T @ x.r
    v_c = target.v_eci + R.T @ (x.v + np.cross(_lvlh_rate(target), x.r))
    return InertialState(r_c, v_c)


def impulse_to_inertial(target: InertialState, dv_lvlh: np.ndarray) -> np.ndarray:
    """Map an LVLH velocity impulse to ECI (pure rotation; positions unchanged)."""
    return lvlh_basis(target).T @ np.asarray(dv_lvlh, float)


def circular_orbit_state(orbit: OrbitSpec, arg_lat: float = 0.0) -> InertialState:
    """Target inertial state on the circular orbit at argument of latitude ``arg_lat``."""
    ci, si = np.cos(orbit.inclination), np.sin(orbit.inclination)
    co, so = np.cos(orbit.raan), np.sin(orbit.raan)
    rot = np.array([
        [co, -so * ci, so * si],
        [so, co * ci, -co * si],
        [0.0, si, ci],
    ])
    cu, su = np.cos(arg_lat), np.sin(arg_lat)
    r_p = orbit.R0 * np.array([cu, su, 0.0])
    v_circ = np.sqrt(orbit.mu_grav / orbit.R0)
    v_p = v_circ * np.array([-su, cu, 0.0])
    return InertialState(rot @ r_p, rot @ v_p)
