"""Result persistence: gains JSON, trajectory CSV, metrics JSON, report tables.

All writers are deterministic (sorted keys, fixed float formatting, no
timestamps) so identical inputs yield byte-identical files.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from rvetc.controller import ControllerGains
from rvetc.dynamics import STATE_ORDER, discretize, hcw_continuous
from rvetc.simulate import MonteCarloResult, TrajectoryLog
from rvetc.synthesis import DecisionVars, SynthesisParams


class GainsFileError(ValueError):
    """Malformed or incomplete gains document."""


def _mat(a: np.ndarray) -> list:
    return np.asarray(a, float).tolist()


def gains_document(g: ControllerGains, d: DecisionVars, p: SynthesisParams,
                   mean_motion: float) -> dict:
    """Assemble the persisted gains document (row-major 2-D arrays).

    Beyond the controller gains, the document carries the solved decision
    variables and the model provenance (mean motion and sampling period) so
    that the full LMI verification battery can be re-run from the file.
    """
    return {
        "state_order": list(STATE_ORDER),
        "K": _mat(g.K),
        "M": _mat(g.M),
        "P0": _mat(g.P0),
        "P1": _mat(g.P1),
        "G0": _mat(g.G0),
        "G1": _mat(g.G1),
        "eps": g.eps,
        "u_bar": g.u_bar,
        "synthesis_params": {
            "lambda_noise": p.lambda_noise,
            "mu_decay": p.mu_decay,
            "u_bar": p.u_bar,
            "objective": p.objective,
            "alpha": list(p.alpha),
            "trace_sign": p.trace_sign,
            "trace_zero": p.trace_zero,
            "strictness_margin": p.strictness_margin,
            "solver_margin": p.solver_margin,
            "mean_motion": mean_motion,
            "T": p.model.T,
        },
        "solver_report": d.report.as_dict() if d.report is not None else None,
        "decision_vars": {
            "eps": d.eps,
            "W0": _mat(d.W0),
            "W1": _mat(d.W1),
            "Q": _mat(d.Q),
            "S_diag": _mat(np.diag(d.S)),
            "Y": _mat(d.Y),
            "Z0": _mat(d.Z0),
            "Z1": _mat(d.Z1),
            "H": _mat(d.H),
            "eta": d.eta,
        },
    }


def write_json(doc: dict, path: str | Path) -> None:
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def load_gains(path: str | Path) -> tuple[ControllerGains, DecisionVars, SynthesisParams]:
    """Read a gains document back into runtime objects.

    The discrete model is rebuilt from the stored mean motion and sampling
    period (the discretization is deterministic), so verification reproduces
    the original blocks exactly.
    """
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise GainsFileError(f"cannot read gains file {path}: {exc}") from exc
    try:
        sp = doc["synthesis_params"]
        model = discretize(hcw_continuous(sp["mean_motion"]), sp["T"])
        params = SynthesisParams(
            model=model,
            lambda_noise=sp["lambda_noise"],
            mu_decay=sp["mu_decay"],
            u_bar=sp["u_bar"],
            objective=sp["objective"],
            alpha=tuple(sp["alpha"]),
            strictness_margin=sp["strictness_margin"],
            trace_sign=sp["trace_sign"],
            trace_zero=sp.get("trace_zero", False),
            solver_margin=sp.get("solver_margin", 1e-6),
        )
        gains = ControllerGains(
            K=np.array(doc["K"], float),
            M=np.array(doc["M"], float),
            P0=np.array(doc["P0"], float),
            P1=np.array(doc["P1"], float),
            G0=np.array(doc["G0"], float),
            G1=np.array(doc["G1"], float),
            eps=float(doc["eps"]),
            u_bar=float(doc["u_bar"]),
        )
        dv = doc["decision_vars"]
        dvars = DecisionVars(
            eps=float(dv["eps"]),
            W0=np.array(dv["W0"], float),
            W1=np.array(dv["W1"], float),
            Q=np.array(dv["Q"], float),
            S=np.diag(np.array(dv["S_diag"], float)),
            Y=np.array(dv["Y"], float),
            Z0=np.array(dv["Z0"], float),
            Z1=np.array(dv["Z1"], float),
            H=np.array(dv["H"], float),
            eta=dv["eta"],
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise GainsFileError(f"gains file {path} is malformed: {exc}") from exc
    if doc["state_order"] != list(STATE_ORDER):
        raise GainsFileError(f"unsupported state order {doc['state_order']}")
    return gains, dvars, params


_CSV_HEADER = "t,rx,ry,rz,vx,vy,vz,sigma,ux,uy,uz,V,dv_cum"


def write_trajectory_csv(log: TrajectoryLog, path: str | Path) -> None:
    """One row per step, SI units, 12 significant digits."""
    fmt = "%.12g"
    lines = [_CSV_HEADER]
    for k in range(len(log.t)):
        fields = [fmt % log.t[k]]
        fields += [fmt % v for v in log.x[k]]
        fields.append(str(int(log.sigma[k])))
        fields += [fmt % v for v in log.u_applied[k]]
        fields.append(fmt % log.V[k])
        fields.append(fmt % log.dv_cum[k])
        lines.append(",".join(fields))
    Path(path).write_text("\n".join(lines) + "\n")


def metrics_document(result: MonteCarloResult, case: str, model: str,
                     controller: str) -> dict:
    doc = result.as_dict()
    doc.update({"case": case, "model": model, "controller": controller})
    return doc


def render_performance_table(metrics_docs: list[dict]) -> str:
    """Aligned ETC-vs-MPC table of mean fuel cost and firing percentage.

    One row per case with paired controller columns, the usual layout for
    fuel/actuation comparisons.
    """
    by_case: dict[str, dict[str, dict]] = {}
    for doc in metrics_docs:
        by_case.setdefault(doc["case"], {})[doc["controller"]] = doc
    header1 = f"{'':<10}|{'u_tot [m/s]':^21}|{'% firing instants':^21}|"
    header2 = f"{'':<10}|{'ETC':^10}{'MPC':^11}|{'ETC':^10}{'MPC':^11}|"
    rule = "-" * len(header1)
    lines = [header1, header2, rule]

    def cell(doc: dict | None, key: str, scale: float) -> str:
        if doc is None:
            return "-"
        return f"{doc['aggregate'][key] * scale:.3f}" if key == "mean_u_tot" \
            else f"{doc['aggregate'][key] * scale:.2f}"

    for case in sorted(by_case):
        etc = by_case[case].get("etc")
        mpc = by_case[case].get("mpc")
        lines.append(
            f"{case:<10}|{cell(etc, 'mean_u_tot', 1):>9} {cell(mpc, 'mean_u_tot', 1):>10} "
            f"|{cell(etc, 'mean_firing_fraction', 100):>9} "
            f"{cell(mpc, 'mean_firing_fraction', 100):>10} |")
    return "\n".join(lines)
