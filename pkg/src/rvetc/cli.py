"""Command-line front end.

Subcommands: ``synth`` (solve the design problem and persist gains),
``simulate`` (one closed-loop realization to CSV + JSON), ``montecarlo``
(seeded batch with aggregate table), ``verify`` (re-check a gains file),
``report`` (format existing metrics files into the comparison table).

Exit codes are a stable scripting contract: 0 success, 2 configuration
error, 3 infeasible synthesis, 4 verification failure, 5 runtime
simulation/solver error.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from rvetc import io as rio
from rvetc.config import ConfigError, ToolConfig, load_config
from rvetc.controller import ControllerGains
from rvetc.dynamics import DegenerateStateError
from rvetc.io import GainsFileError, load_gains
from rvetc.mpc import DareError, QpSolverError
from rvetc.sdp import SdpSolverError
from rvetc.simulate import SimulationError, compute_metrics, monte_carlo, run
from rvetc.synthesis import (
    GainRecoveryError,
    SynthesisInfeasibleError,
    recover_gains,
    solve_synthesis,
    verify_solution,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_VERIFICATION = 4
EXIT_RUNTIME = 5


class VerificationFailure(RuntimeError):
    pass


def _output_dir(args, cfg: ToolConfig) -> Path:
    out = os.environ.get("RVETC_OUTPUT_DIR") or cfg["output_dir"]
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _load(args) -> ToolConfig:
    return load_config(args.config)


def _gains_path(args, cfg: ToolConfig) -> Path:
    if getattr(args, "gains", None):
        return Path(args.gains)
    return _output_dir(args, cfg) / "gains.json"


def cmd_synth(args) -> int:
    cfg = _load(args)
    model = cfg.discrete_model()
    params = cfg.synthesis_params(model)
    dvars = solve_synthesis(params)
    gains = recover_gains(dvars, params)
    report = verify_solution(gains, dvars, params)

    outdir = _output_dir(args, cfg)
    gains_path = Path(args.gains_out) if args.gains_out else outdir / "gains.json"
    report_path = Path(args.report_out) if args.report_out else outdir / "verification.txt"
    rio.write_json(rio.gains_document(gains, dvars, params,
                                      cfg.orbit_spec().mean_motion), gains_path)
    report_path.write_text(report.render() + "\n")
    print(f"gains written to {gains_path}")
    print(report.render())
    if not report.passed:
        raise VerificationFailure("synthesized solution failed verification")
    return EXIT_OK


def _controllers(args) -> list[str]:
    return ["etc", "mpc"] if args.controller == "both" else [args.controller]


def _cases(args, cfg: ToolConfig) -> list[str]:
    if args.case == "all":
        return cfg.case_names
    cfg.case_state(args.case)  # raises ConfigError for unknown names
    return [args.case]


def _controller_inputs(controller: str, cfg: ToolConfig, args):
    """(gains, qp) pair as required by the requested controller."""
    gains = qp = None
    if controller == "etc":
        gains, _, _ = load_gains(_gains_path(args, cfg))
    elif controller == "mpc":
        qp = cfg.condensed_qp()
        # for attractor-membership metrics when a gains file is available
        path = _gains_path(args, cfg)
        if path.exists():
            gains, _, _ = load_gains(path)
    return gains, qp


def cmd_simulate(args) -> int:
    cfg = _load(args)
    gains, qp = _controller_inputs(args.controller, cfg, args)
    rc = cfg.run_config(args.case, args.model, args.controller, seed=args.seed)
    log = run(rc, gains, qp)
    metrics = compute_metrics(log, gains)

    outdir = _output_dir(args, cfg)
    prefix = args.out_prefix or f"{args.case}_{args.model}_{args.controller}"
    csv_path = outdir / f"{prefix}_trajectory.csv"
    json_path = outdir / f"{prefix}_metrics.json"
    rio.write_trajectory_csv(log, csv_path)
    rio.write_json({
        "case": args.case,
        "model": args.model,
        "controller": args.controller,
        "seed": rc.seed,
        "metrics": metrics.as_dict(),
    }, json_path)
    print(f"trajectory written to {csv_path}")
    print(f"metrics written to {json_path}")
    return EXIT_OK


def cmd_montecarlo(args) -> int:
    cfg = _load(args)
    outdir = _output_dir(args, cfg)
    n = args.n_realizations or cfg["monte_carlo"]["n_realizations"]
    base_seed = args.seed if args.seed is not None else cfg["monte_carlo"]["base_seed"]
    jobs = args.jobs or os.cpu_count() or 1

    docs = []
    for controller in _controllers(args):
        gains, qp = _controller_inputs(controller, cfg, args)
        for case in _cases(args, cfg):
            rc = cfg.run_config(case, args.model, controller)
            result = monte_carlo(rc, n, base_seed, gains, qp, jobs=jobs)
            doc = rio.metrics_document(result, case, args.model, controller)
            docs.append(doc)
            path = outdir / f"mc_{case}_{args.model}_{controller}.json"
            rio.write_json(doc, path)
            print(f"{case}/{controller}: mean u_tot = {result.mean_u_tot:.3f} m/s, "
                  f"firing = {100 * result.mean_firing_fraction:.2f}% -> {path}")
            if result.failures:
                print(f"  warning: {len(result.failures)} failed realization(s)",
                      file=sys.stderr)
    table = rio.render_performance_table(docs)
    (outdir / f"performance_{args.model}.txt").write_text(table + "\n")
    print(table)
    return EXIT_OK


def cmd_verify(args) -> int:
    cfg = _load(args)
    gains, dvars, params = load_gains(_gains_path(args, cfg))
    report = verify_solution(gains, dvars, params, n_samples=args.samples)
    _append_runtime_invariants(report, gains, args.samples * 10)
    print(report.render())
    if not report.passed:
        raise VerificationFailure("gains failed verification")
    return EXIT_OK


def _append_runtime_invariants(report, gains: ControllerGains, n: int) -> None:
    """Sampled run-time law invariants: trigger sign identity, saturation bound,
    positivity of the partitioned quadratic form."""
    from rvetc.synthesis import CheckResult, _switched_quads

    rng = np.random.default_rng(1)
    X = rng.normal(size=(n, 6)) * (10.0 ** rng.uniform(-2, 3, size=(n, 1)))
    qm = np.einsum("ni,ij,nj->n", X, gains.M, X)
    sigma = (qm < 0.0).astype(int)
    signed_quad = (1.0 - 2.0 * sigma) * qm
    report.checks.append(CheckResult(
        "trigger_sign_identity", bool(np.all(signed_quad >= 0.0)), float(signed_quad.min()),
        "(1-2 sigma) x'Mx >= 0 for all samples"))

    U = np.clip(sigma[:, None] * (X @ gains.K.T), -gains.u_bar, gains.u_bar)
    worst_u = float(np.max(np.abs(U), initial=0.0))
    report.checks.append(CheckResult(
        "saturation_bound", worst_u <= gains.u_bar + 1e-15, worst_u,
        f"u_bar = {gains.u_bar}"))

    D = X / np.linalg.norm(X, axis=1, keepdims=True)
    _, vq = _switched_quads(D, gains)
    qpart = vq - (1.0 - 2.0 * sigma) * np.einsum("ni,ij,nj->n", D, gains.M, D)
    report.checks.append(CheckResult(
        "partition_quadratic_positive", bool(np.all(qpart > 0.0)), float(qpart.min()),
        "x'(P_sigma - (1-2 sigma)M)x on the unit sphere"))


def cmd_report(args) -> int:
    docs = []
    for path in args.metrics:
        doc = json.loads(Path(path).read_text())
        if "aggregate" not in doc:
            raise ConfigError(f"{path} is not a montecarlo metrics file")
        docs.append(doc)
    table = rio.render_performance_table(docs)
    print(table)
    if args.out:
        Path(args.out).write_text(table + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rvetc",
        description="Event-triggered impulsive rendezvous control toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, gains=True):
        p.add_argument("--config", help="JSON config file (defaults bundled)")
        if gains:
            p.add_argument("--gains", help="gains JSON (default <outdir>/gains.json)")

    p = sub.add_parser("synth", help="solve the LMI co-design and write gains")
    common(p, gains=False)
    p.add_argument("--gains-out", help="output gains path")
    p.add_argument("--report-out", help="output verification report path")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("simulate", help="run one closed-loop realization")
    common(p)
    p.add_argument("--case", required=True)
    p.add_argument("--model", choices=["linear", "nonlinear"], default="linear")
    p.add_argument("--controller", choices=["etc", "mpc", "none"], default="etc")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out-prefix", default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("montecarlo", help="seeded Monte-Carlo batch with aggregates")
    common(p)
    p.add_argument("--case", required=True, help="case name or 'all'")
    p.add_argument("--model", choices=["linear", "nonlinear"], default="linear")
    p.add_argument("--controller", choices=["etc", "mpc", "both"], default="etc")
    p.add_argument("-n", "--n-realizations", type=int, default=None)
    p.add_argument("--seed", type=int, default=None, help="base seed")
    p.add_argument("--jobs", type=int, default=None,
                   help="parallel workers (default: available cores)")
    p.set_defaults(func=cmd_montecarlo)

    p = sub.add_parser("verify", help="re-run the verification battery on a gains file")
    common(p)
    p.add_argument("--samples", type=int, default=10_000)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("report", help="format montecarlo metrics files into a table")
    p.add_argument("metrics", nargs="+", help="metrics JSON files")
    p.add_argument("--out", help="also write the table here")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, GainsFileError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SynthesisInfeasibleError as exc:
        print(f"synthesis infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except VerificationFailure as exc:
        print(f"verification failure: {exc}", file=sys.stderr)
        return EXIT_VERIFICATION
    except (SimulationError, SdpSolverError, QpSolverError, DareError,
            GainRecoveryError, DegenerateStateError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
