"""Closed-loop execution and Monte-Carlo orchestration.

Two truth models share one logging format: the linear HCW loop with bounded
additive process noise, and the two-body loop where target and chaser are
propagated separately in ECI and the relative state is rebuilt in LVLH each
interval. Disturbances in the two-body loop follow the measured-state
trigger / imperfect-thrust pipeline (additive command error, small-angle
rotation, saturation after corruption).

Reproducibility: every realization draws from its own generator derived by
seed-splitting, and draws happen in a fixed order per step (measurement,
thrust magnitude, thrust angles, process noise), so logs are bit-identical
for a given (config, seed).
"""
from __future__ import annotations

import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from rvetc import controller as ctl
from rvetc.controller import ControllerGains
from rvetc.dynamics import (
    DiscreteModel,
    InertialState,
    OrbitSpec,
    StateVector,
    circular_orbit_state,
    discretize,
    hcw_continuous,
    impulse_to_inertial,
    inertial_from_relative,
    propagate_two_body,
    relative_state_lvlh,
)
from rvetc.mpc import CondensedQp, MpcController

_FIRING_THRESHOLD = 1e-12


class SimulationError(RuntimeError):
    """Propagation or controller failure inside a closed-loop run."""


@dataclass(frozen=True)
class DisturbanceSpec:
    """Noise magnitudes: process bound, thrust execution, sensor accuracy.

    The configured mean values are magnitude specifications; each draw gets an
    independent random sign per axis. Near-range sensor parameters apply
    only when every |r_i| is below ``near_range``.
    """

    process_lambda: float = 1e-7
    thrust_mag: tuple[float, float] = (2e-4, 1e-6)          # m/s (mean, sd)
    thrust_angle: tuple[float, float] = (np.deg2rad(1.0), np.deg2rad(1e-2))
    sensor_pos_far: tuple[float, float] = (1e-1, 5e-3)      # m
    sensor_pos_near: tuple[float, float] = (1e-2, 5e-4)
    sensor_vel_far: tuple[float, float] = (1e-2, 5e-4)      # m/s
    sensor_vel_near: tuple[float, float] = (1e-3, 5e-5)
    near_range: float = 20.0

    def __post_init__(self):
        if self.process_lambda < 0:
            raise ValueError("process_lambda must be >= 0")
        if self.near_range <= 0:
            raise ValueError("near_range must be positive")
        for name in ("thrust_mag", "thrust_angle", "sensor_pos_far",
                     "sensor_pos_near", "sensor_vel_far", "sensor_vel_near"):
            if getattr(self, name)[1] < 0:
                raise ValueError(f"{name} standard deviation must be >= 0")

    @classmethod
    def zeroed(cls) -> "DisturbanceSpec":
        return cls(process_lambda=0.0, thrust_mag=(0.0, 0.0), thrust_angle=(0.0, 0.0),
                   sensor_pos_far=(0.0, 0.0), sensor_pos_near=(0.0, 0.0),
                   sensor_vel_far=(0.0, 0.0), sensor_vel_near=(0.0, 0.0))


@dataclass(frozen=True)
class RunConfig:
    """One closed-loop realization: model, controller, scenario and seed."""

    model: str = "linear"                  # linear | nonlinear
    controller: str = "etc"                # etc | mpc | none
    x0: StateVector = field(default_factory=lambda: StateVector(np.zeros(6)))
    T: float = 10.0
    n_sim: int = 240
    seed: int = 0
    seed_spawn_key: tuple[int, ...] = ()
    disturbances: DisturbanceSpec = field(default_factory=DisturbanceSpec)
    orbit: OrbitSpec = field(default_factory=OrbitSpec)
    measurement_mode: str = "true_state_gain"  # trigger always uses the measurement
    noise_law: str = "uniform_ball"           # process-noise magnitude law
    process_noise_nonlinear: bool = False
    rk4_substep: float = 1.0
    arg_lat0: float = 0.0
    trigger_hysteresis: float = 0.0           # reserved; no hysteresis by default

    def __post_init__(self):
        if self.model not in ("linear", "nonlinear"):
            raise ValueError(f"unknown model {self.model!r}")
        if self.controller not in ("etc", "mpc", "none"):
            raise ValueError(f"unknown controller {self.controller!r}")
        if self.n_sim < 1:
            raise ValueError("n_sim must be >= 1")
        if self.T <= 0:
            raise ValueError("sampling period must be positive")


@dataclass
class TrajectoryLog:
    """Per-step record; state-like arrays hold n_sim + 1 rows.

    The final row carries the evaluated trigger value of the terminal state
    with a zero (never applied) impulse.
    """

    t: np.ndarray
    x: np.ndarray
    x_meas: np.ndarray
    sigma: np.ndarray
    u_raw: np.ndarray
    u_applied: np.ndarray
    V: np.ndarray
    dv_cum: np.ndarray

    @property
    def n_steps(self) -> int:
        return len(self.t) - 1


@dataclass
class Metrics:
    u_tot: float
    firing_fraction: float
    final_V: float
    final_pos_error: float
    converged: bool | None

    def as_dict(self) -> dict:
        return {
            "u_tot": self.u_tot,
            "firing_fraction": self.firing_fraction,
            "final_V": self.final_V,
            "final_pos_error": self.final_pos_error,
            "converged": self.converged,
        }


def _make_rng(cfg: RunConfig) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence(cfg.seed, spawn_key=cfg.seed_spawn_key))


def _rademacher(rng: np.random.Generator, size: int) -> np.ndarray:
    return np.where(rng.random(size) < 0.5, -1.0, 1.0)


def sample_process_noise(rng: np.random.Generator, lam: float,
                         law: str = "uniform_ball", size: int | None = None) -> np.ndarray:
    """Norm-bounded zero-mean process noise, acting on the velocity rows.

    ``uniform_ball`` draws the energy w'w uniformly on [0, lambda] with a
    uniform direction; ``gaussian_truncated`` resamples a scaled normal
    until it satisfies the bound. Position components are zero (the noise
    input matrix routes disturbances into the velocity rows only).
    """
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    n = 1 if size is None else size
    out = np.zeros((n, 6))
    if lam > 0:
        if law == "uniform_ball":
            d = rng.normal(size=(n, 3))
            d /= np.linalg.norm(d, axis=1, keepdims=True)
            mag = np.sqrt(lam * rng.random(n))
            out[:, 3:] = d * mag[:, None]
        elif law == "gaussian_truncated":
            sd = np.sqrt(lam) / 3.0
            for i in range(n):
                while True:
                    w = rng.normal(0.0, sd, size=3)
                    if w @ w <= lam:
                        break
                out[i, 3:] = w
        else:
            raise ValueError(f"unknown noise law {law!r}")
    return out[0] if size is None else out


def _rot_x(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def _rot_y(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def _rot_z(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def small_angle_rotation(rng: np.random.Generator, spec: DisturbanceSpec) -> np.ndarray:
    """Composition of small random rotations about x, y, z (thrust misalignment)."""
    mean, sd = spec.thrust_angle
    th = _rademacher(rng, 3) * rng.normal(mean, sd, size=3)
    if np.any(np.abs(th) >= np.deg2rad(5.0)):
        raise ValueError("thrust misalignment angles are not small (>= 5 deg)")
    return _rot_x(th[0]) @ _rot_y(th[1]) @ _rot_z(th[2])


def corrupt_measurement(x_true: np.ndarray, rng: np.random.Generator,
                        spec: DisturbanceSpec,
                        range_to_target: float | None = None) -> np.ndarray:
    """Additive sensor noise with a range-dependent accuracy switch.

    The near (more accurate) parameter set engages only when all three
    position components are inside ``near_range``.
    """
    x_true = np.asarray(x_true, float)
    if range_to_target is None:
        range_to_target = float(np.max(np.abs(x_true[:3])))
    near = range_to_target < spec.near_range
    mr, sr = spec.sensor_pos_near if near else spec.sensor_pos_far
    mv, sv = spec.sensor_vel_near if near else spec.sensor_vel_far
    dr = _rademacher(rng, 3) * rng.normal(mr, sr, size=3)
    dv = _rademacher(rng, 3) * rng.normal(mv, sv, size=3)
    return x_true + np.concatenate([dr, dv])


def step_linear(x: np.ndarray, u_applied: np.ndarray, w: np.ndarray,
                dm: DiscreteModel) -> np.ndarray:
    """One HCW interval: x+ = A x + B u + B_w w (u already saturated)."""
    return dm.A @ x + dm.B @ u_applied + dm.B_w @ w


def _new_log(n: int, t0_step: float) -> TrajectoryLog:
    return TrajectoryLog(
        t=np.arange(n + 1) * t0_step,
        x=np.zeros((n + 1, 6)),
        x_meas=np.zeros((n + 1, 6)),
        sigma=np.zeros(n + 1, dtype=int),
        u_raw=np.zeros((n + 1, 3)),
        u_applied=np.zeros((n + 1, 3)),
        V=np.full(n + 1, np.nan),
        dv_cum=np.zeros(n + 1),
    )


def _log_V(x: np.ndarray, gains: ControllerGains | None) -> float:
    return ctl.lyapunov_value(x, gains) if gains is not None else np.nan


def run_linear(cfg: RunConfig, gains: ControllerGains | None = None,
               mpc: CondensedQp | None = None) -> TrajectoryLog:
    """Closed loop on the discretized HCW model with additive process noise.

    Measurements are exact in this scenario; the process noise w is drawn
    once per interval and held constant across it.
    """
    dm = discretize(hcw_continuous(cfg.orbit.mean_motion), cfg.T)
    rng = _make_rng(cfg)
    n = cfg.n_sim
    log = _new_log(n, cfg.T)
    x = cfg.x0.vec.copy()

    mpc_ctl = None
    if cfg.controller == "etc":
        if gains is None:
            raise SimulationError("ETC run requires controller gains")
        if ctl.lyapunov_value(x, gains) > 1.0:
            warnings.warn("initial state lies outside the basin estimate; "
                          "closed-loop stability is unproven there", stacklevel=2)
    elif cfg.controller == "mpc":
        if mpc is None:
            raise SimulationError("MPC run requires a condensed QP")
        mpc_ctl = MpcController(mpc)

    for k in range(n):
        log.x[k] = x
        log.x_meas[k] = x
        log.V[k] = _log_V(x, gains)
        if cfg.controller == "etc":
            cmd = ctl.etc_input(x, gains)
            u_raw, u_app, sig = cmd.u_raw, cmd.u_applied, cmd.sigma
        elif cfg.controller == "mpc":
            u_raw = mpc_ctl.step(x)
            u_app = ctl.saturate(u_raw, mpc.box)
            sig = int(np.max(np.abs(u_app)) > _FIRING_THRESHOLD)
        else:
            u_raw = u_app = np.zeros(3)
            sig = 0
        w = sample_process_noise(rng, cfg.disturbances.process_lambda, cfg.noise_law)
        x = step_linear(x, u_app, w, dm)
        log.sigma[k] = sig
        log.u_raw[k] = u_raw
        log.u_applied[k] = u_app
        log.dv_cum[k + 1] = log.dv_cum[k] + np.sum(np.abs(u_app))
    log.x[n] = x
    log.x_meas[n] = x
    log.V[n] = _log_V(x, gains)
    if gains is not None:
        log.sigma[n] = ctl.sigma_select(x, gains.M).sigma
    return log


def run_nonlinear(cfg: RunConfig, gains: ControllerGains | None = None,
                  mpc: CondensedQp | None = None,
                  impulse_schedule: np.ndarray | None = None) -> TrajectoryLog:
    """Closed loop against the two-body truth model.

    Each interval: corrupt the measurement, pick the trigger mode from it,
    form the commanded impulse, corrupt its magnitude and direction, apply
    the saturated result along the LVLH axes, then propagate both craft
    with fixed-step RK4 and rebuild the relative state.

    With ``impulse_schedule`` (controller "none") the listed LVLH impulses
    are applied verbatim, bypassing the disturbance pipeline; this is the
    replay mode used for model-consistency checks.
    """
    d = cfg.disturbances
    rng = _make_rng(cfg)
    n = cfg.n_sim
    substeps = max(1, int(round(cfg.T / cfg.rk4_substep)))
    mu = cfg.orbit.mu_grav

    target = circular_orbit_state(cfg.orbit, cfg.arg_lat0)
    chaser = inertial_from_relative(target, cfg.x0)

    mpc_ctl = None
    if cfg.controller == "etc" and gains is None:
        raise SimulationError("ETC run requires controller gains")
    if cfg.controller == "mpc":
        if mpc is None:
            raise SimulationError("MPC run requires a condensed QP")
        mpc_ctl = MpcController(mpc)
    if impulse_schedule is not None:
        impulse_schedule = np.asarray(impulse_schedule, float)
        if impulse_schedule.shape != (n, 3):
            raise ValueError(f"impulse schedule must be ({n}, 3)")

    log = _new_log(n, cfg.T)
    x_true = relative_state_lvlh(target, chaser).vec

    try:
        for k in range(n):
            log.x[k] = x_true
            log.V[k] = _log_V(x_true, gains)
            x_meas = corrupt_measurement(x_true, rng, d)
            log.x_meas[k] = x_meas
            du = _rademacher(rng, 3) * rng.normal(d.thrust_mag[0], d.thrust_mag[1], 3)
            R_dth = small_angle_rotation(rng, d)

            if impulse_schedule is not None:
                u_raw = impulse_schedule[k]
                u_real = u_raw.copy()
                sig = int(np.max(np.abs(u_real)) > _FIRING_THRESHOLD)
            elif cfg.controller == "etc":
                sig = ctl.sigma_select(x_meas, gains.M).sigma
                x_amp = x_meas if cfg.measurement_mode == "measured_state_gain" else x_true
                u_raw = sig * (gains.K @ x_amp)
                u_real = ctl.saturate(R_dth @ (sig * (gains.K @ x_amp + du)), gains.u_bar)
            elif cfg.controller == "mpc":
                u_raw = mpc_ctl.step(x_meas)
                u_real = ctl.saturate(R_dth @ (u_raw + du), mpc.box)
                sig = int(np.max(np.abs(u_real)) > _FIRING_THRESHOLD)
            else:
                u_raw = u_real = np.zeros(3)
                sig = 0

            dv_eci = impulse_to_inertial(target, u_real)
            chaser = InertialState(chaser.r_eci, chaser.v_eci + dv_eci)
            if cfg.process_noise_nonlinear:
                # optional HCW-style additive noise on the reconstructed state
                w = sample_process_noise(rng, d.process_lambda, cfg.noise_law)
            else:
                w = None
            chaser = propagate_two_body(chaser, cfg.T, substeps, mu)
            target = propagate_two_body(target, cfg.T, substeps, mu)
            x_true = relative_state_lvlh(target, chaser).vec
            if w is not None:
                dm = discretize(hcw_continuous(cfg.orbit.mean_motion), cfg.T)
                x_true = x_true + dm.B_w @ w
                chaser = inertial_from_relative(target, StateVector(x_true))

            log.sigma[k] = sig
            log.u_raw[k] = u_raw
            log.u_applied[k] = u_real
            log.dv_cum[k + 1] = log.dv_cum[k] + np.sum(np.abs(u_real))
    except (ValueError, FloatingPointError) as exc:
        raise SimulationError(f"nonlinear propagation failed at step {k}: {exc}") from exc

    log.x[n] = x_true
    log.x_meas[n] = x_true
    log.V[n] = _log_V(x_true, gains)
    if gains is not None:
        log.sigma[n] = ctl.sigma_select(x_true, gains.M).sigma
    return log


def run(cfg: RunConfig, gains: ControllerGains | None = None,
        mpc: CondensedQp | None = None) -> TrajectoryLog:
    if cfg.model == "linear":
        return run_linear(cfg, gains, mpc)
    return run_nonlinear(cfg, gains, mpc)


def compute_metrics(log: TrajectoryLog, gains: ControllerGains | None = None) -> Metrics:
    """Fuel proxy (sum of absolute impulse components), firing share, tail state."""
    n = log.n_steps
    u = log.u_applied[:n]
    u_tot = float(np.sum(np.abs(u)))
    firing = float(np.mean(np.max(np.abs(u), axis=1) > _FIRING_THRESHOLD))
    final_v = float(log.V[n])
    converged: bool | None = None
    if gains is not None:
        thresh = 1.0 / gains.eps + 1e-9
        above = np.nonzero(log.V > thresh)[0]
        converged = bool(len(above) == 0 or above[-1] < n)
    return Metrics(u_tot=u_tot, firing_fraction=firing, final_V=final_v,
                   final_pos_error=float(np.max(np.abs(log.x[n, :3]))),
                   converged=converged)


@dataclass
class MonteCarloResult:
    n_realizations: int
    base_seed: int
    per_realization: list[Metrics]
    failures: dict[int, str]
    mean_u_tot: float
    sd_u_tot: float
    mean_firing_fraction: float
    sd_firing_fraction: float
    mean_final_V: float
    all_converged: bool | None

    def as_dict(self) -> dict:
        return {
            "n_realizations": self.n_realizations,
            "base_seed": self.base_seed,
            "aggregate": {
                "mean_u_tot": self.mean_u_tot,
                "sd_u_tot": self.sd_u_tot,
                "mean_firing_fraction": self.mean_firing_fraction,
                "sd_firing_fraction": self.sd_firing_fraction,
                "mean_final_V": self.mean_final_V,
                "all_converged": self.all_converged,
            },
            "realizations": [m.as_dict() for m in self.per_realization],
            "failures": {str(k): v for k, v in self.failures.items()},
        }


def _mc_chunk(args) -> list[tuple[int, Metrics | None, str | None]]:
    cfg, gains, mpc, indices = args
    out = []
    for i in indices:
        cfg_i = replace(cfg, seed_spawn_key=(i,))
        try:
            log = run(cfg_i, gains, mpc)
            out.append((i, compute_metrics(log, gains), None))
        except Exception as exc:  # recorded, never silently dropped
            out.append((i, None, f"{type(exc).__name__}: {exc}"))
    return out


def monte_carlo(cfg: RunConfig, n_realizations: int, base_seed: int,
                gains: ControllerGains | None = None,
                mpc: CondensedQp | None = None,
                jobs: int = 1) -> MonteCarloResult:
    """Run seeded independent realizations and aggregate their metrics.

    Realization i uses the stream split(base_seed, i); results are
    identical for a given base seed regardless of ``jobs``.
    """
    if n_realizations < 1:
        raise ValueError("n_realizations must be >= 1")
    cfg = replace(cfg, seed=base_seed)
    indices = list(range(n_realizations))
    jobs = max(1, min(jobs, n_realizations))
    chunks = [indices[i::jobs] for i in range(jobs)]
    results: list[tuple[int, Metrics | None, str | None]] = []
    if jobs == 1:
        results = _mc_chunk((cfg, gains, mpc, indices))
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for part in pool.map(_mc_chunk, [(cfg, gains, mpc, ch) for ch in chunks]):
                results.extend(part)
    results.sort(key=lambda r: r[0])

    metrics = [m for _, m, err in results if err is None]
    failures = {i: err for i, _, err in results if err is not None}
    if not metrics:
        raise SimulationError(f"all {n_realizations} realizations failed: "
                              f"{next(iter(failures.values()))}")
    u = np.array([m.u_tot for m in metrics])
    ff = np.array([m.firing_fraction for m in metrics])
    fv = np.array([m.final_V for m in metrics])
    conv = [m.converged for m in metrics]
    return MonteCarloResult(
        n_realizations=n_realizations,
        base_seed=base_seed,
        per_realization=metrics,
        failures=failures,
        mean_u_tot=float(u.mean()),
        sd_u_tot=float(u.std(ddof=1)) if len(u) > 1 else 0.0,
        mean_firing_fraction=float(ff.mean()),
        sd_firing_fraction=float(ff.std(ddof=1)) if len(ff) > 1 else 0.0,
        mean_final_V=float(fv.mean()),
        all_converged=None if any(c is None for c in conv) else bool(all(conv)),
    )
