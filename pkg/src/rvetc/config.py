"""Configuration ingestion: schema validation, defaults, factory helpers.

A run configuration is a single JSON document. Unknown keys are rejected;
omitted keys take the bundled defaults (the baseline study scenario with
its three initial-condition cases). Field names carry unit suffixes.
"""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from rvetc.dynamics import DiscreteModel, OrbitSpec, StateVector, discretize, hcw_continuous
from rvetc.mpc import CondensedQp, MpcWeights, condense, make_weights
from rvetc.simulate import DisturbanceSpec, RunConfig
from rvetc.synthesis import SynthesisParams


class ConfigError(ValueError):
    """Invalid configuration; message carries the offending field path."""


def _load_packaged(name: str) -> dict:
    with resources.files("rvetc.data").joinpath(name).open("r") as fh:
        return json.load(fh)


def _deep_merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, val in override.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


@dataclass(frozen=True)
class ToolConfig:
    """Validated configuration document plus typed factory accessors."""

    doc: dict

    # -- document access -------------------------------------------------
    def __getitem__(self, key: str):
        return self.doc[key]

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.doc, indent=2, sort_keys=True) + "\n")

    # -- factories --------------------------------------------------------
    def orbit_spec(self) -> OrbitSpec:
        o = self.doc["orbit"]
        return OrbitSpec(
            mu_grav=o["mu_grav_m3_s2"],
            R0=o["R0_m"],
            inclination=np.deg2rad(o["inclination_deg"]),
            raan=np.deg2rad(o["raan_deg"]),
            n_override=o["n_override_rad_s"],
        )

    def discrete_model(self) -> DiscreteModel:
        return discretize(hcw_continuous(self.orbit_spec().mean_motion),
                          self.doc["timing"]["T_s"])

    def synthesis_params(self, model: DiscreteModel | None = None) -> SynthesisParams:
        s = self.doc["synthesis"]
        return SynthesisParams(
            model=model if model is not None else self.discrete_model(),
            lambda_noise=s["lambda_noise"],
            mu_decay=s["mu_decay"],
            u_bar=s["u_bar_m_s"],
            objective=s["objective"],
            alpha=tuple(s["alpha"]),
            strictness_margin=s["strictness_margin"],
            trace_sign=s["trace_sign"],
            trace_zero=s["trace_zero"],
            solver_margin=s["solver_margin"],
        )

    @property
    def horizon(self) -> int:
        h = self.doc["mpc"]["horizon"]
        return int(h) if h is not None else self.doc["timing"]["n_sim"] // 2

    def mpc_weights(self, model: DiscreteModel | None = None) -> MpcWeights:
        m = self.doc["mpc"]
        model = model if model is not None else self.discrete_model()
        return make_weights(model, np.diag(m["q_weights"]), np.diag(m["r_weights"]),
                            self.horizon, m["terminal_scale"])

    def condensed_qp(self, model: DiscreteModel | None = None) -> CondensedQp:
        m = self.doc["mpc"]
        model = model if model is not None else self.discrete_model()
        qp = condense(model.A, model.B, self.mpc_weights(model),
                      u_bar=self.doc["synthesis"]["u_bar_m_s"])
        qp.max_iter = m["max_iter"]
        qp.kkt_tol_scale = m["kkt_tol_scale"]
        return qp

    def disturbance_spec(self) -> DisturbanceSpec:
        d = self.doc["disturbances"]
        thrust_mean = d["thrust_mag_mean_m_s"]
        if thrust_mean is None:
            thrust_mean = self.doc["synthesis"]["u_bar_m_s"] / 1000.0
        return DisturbanceSpec(
            process_lambda=d["process_lambda"],
            thrust_mag=(thrust_mean, d["thrust_mag_sd_m_s"]),
            thrust_angle=(np.deg2rad(d["thrust_angle_mean_deg"]),
                          np.deg2rad(d["thrust_angle_sd_deg"])),
            sensor_pos_far=(d["sensor_pos_far_mean_m"], d["sensor_pos_far_sd_m"]),
            sensor_pos_near=(d["sensor_pos_near_mean_m"], d["sensor_pos_near_sd_m"]),
            sensor_vel_far=(d["sensor_vel_far_mean_m_s"], d["sensor_vel_far_sd_m_s"]),
            sensor_vel_near=(d["sensor_vel_near_mean_m_s"], d["sensor_vel_near_sd_m_s"]),
            near_range=d["near_range_m"],
        )

    @property
    def case_names(self) -> list[str]:
        return list(self.doc["cases"].keys())

    def case_state(self, name: str) -> StateVector:
        try:
            return StateVector(np.asarray(self.doc["cases"][name], float))
        except KeyError:
            raise ConfigError(
                f"cases: unknown case {name!r}; available: {self.case_names}") from None

    def run_config(self, case: str, model: str, controller: str,
                   seed: int | None = None) -> RunConfig:
        sim = self.doc["simulation"]
        return RunConfig(
            model=model,
            controller=controller,
            x0=self.case_state(case),
            T=self.doc["timing"]["T_s"],
            n_sim=self.doc["timing"]["n_sim"],
            seed=seed if seed is not None else self.doc["monte_carlo"]["base_seed"],
            disturbances=self.disturbance_spec(),
            orbit=self.orbit_spec(),
            measurement_mode=sim["measurement_mode"],
            noise_law=sim["noise_law"],
            process_noise_nonlinear=sim["process_noise_nonlinear"],
            rk4_substep=sim["rk4_substep_s"],
            arg_lat0=np.deg2rad(self.doc["orbit"]["arg_lat0_deg"]),
        )


def validate_document(doc: dict) -> None:
    """Schema check plus the semantic range checks the schema cannot express."""
    schema = _load_packaged("config.schema.json")
    validator = jsonschema.Draft202012Validator(schema)
    errors = sorted(validator.iter_errors(doc), key=lambda e: e.json_path)
    if errors:
        e = errors[0]
        raise ConfigError(f"{e.json_path}: {e.message}")
    mu = doc["synthesis"]["mu_decay"]
    if not (0.0 < mu < 1.0):
        raise ConfigError(f"$.synthesis.mu_decay: must lie in the open interval (0, 1), got {mu}")
    if doc["mpc"]["horizon"] is not None and doc["mpc"]["horizon"] > doc["timing"]["n_sim"]:
        raise ConfigError("$.mpc.horizon: must not exceed timing.n_sim")


def load_config(path: str | Path | None = None) -> ToolConfig:
    """Parse and validate a configuration file; None loads the bundled baseline.

    User documents are validated before merging so that unknown keys and
    out-of-range values are rejected with their field path, then merged
    over the defaults.
    """
    defaults = _load_packaged("default_config.json")
    if path is None:
        merged = defaults
    else:
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file not found: {p}")
        try:
            user = json.loads(p.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(user, dict):
            raise ConfigError("config root must be a JSON object")
        merged = _deep_merge(defaults, user)
        if "cases" in user:
            # a user case table is complete, not merged into the defaults
            merged["cases"] = copy.deepcopy(user["cases"])
    validate_document(merged)
    return ToolConfig(doc=merged)
