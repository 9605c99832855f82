"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Run with `pytest tests/test_acceptance.py -v -s` for the per-criterion
report. Reference comparison values are asserted as bands, not digits:
the solved gains depend on the optimizer path and the baseline weights are
a calibration choice.
"""
import json
import time
from dataclasses import replace

import numpy as np
import pytest

from rvetc.dynamics import discretize, hcw_continuous, hcw_stm_closed_form
from rvetc.io import metrics_document
from rvetc.mpc import dare_residual, dare_solve, kkt_residual, qp_solve_box
from rvetc.simulate import DisturbanceSpec, monte_carlo, run_linear, run_nonlinear
from rvetc.synthesis import (
    _closed_loop_step,
    _sample_ball,
    _sample_ring,
    _switched_quads,
    build_problem,
    make_layout,
    recover_gains,
    solve_synthesis,
    verify_solution,
    _pack_vars,
)

N_SAMPLES = 10_000


def _report(num: int, passed: bool, detail: str) -> None:
    print(f"\n[{'PASS' if passed else 'FAIL'}] criterion {num}: {detail}")
    assert passed, f"criterion {num}: {detail}"


@pytest.fixture(scope="module")
def etc_mc(baseline_config, baseline_gains):
    out = {}
    t0 = time.perf_counter()
    for case in baseline_config.case_names:
        cfg = baseline_config.run_config(case, "linear", "etc")
        out[case] = monte_carlo(cfg, 100, baseline_config["monte_carlo"]["base_seed"],
                                gains=baseline_gains)
    out["elapsed"] = time.perf_counter() - t0
    return out


@pytest.fixture(scope="module")
def mpc_mc(baseline_config, baseline_qp, baseline_gains):
    out = {}
    for case in baseline_config.case_names:
        cfg = baseline_config.run_config(case, "linear", "mpc")
        out[case] = monte_carlo(cfg, 100, baseline_config["monte_carlo"]["base_seed"],
                                gains=baseline_gains, mpc=baseline_qp)
    return out


def test_criterion_01_synthesis_feasible_and_verified(baseline_config):
    t0 = time.perf_counter()
    params = baseline_config.synthesis_params()
    dvars = solve_synthesis(params)
    gains = recover_gains(dvars, params)
    report = verify_solution(gains, dvars, params, n_samples=N_SAMPLES)
    elapsed = time.perf_counter() - t0

    problem = build_problem(params)
    v = _pack_vars(make_layout(params.uses_eta), dvars)
    worst_block = min(blk.min_eigenvalue(v) for blk in problem.blocks)
    part = min(np.linalg.eigvalsh(gains.P0 - gains.M)[0],
               np.linalg.eigvalsh(gains.P1 + gains.M)[0])
    ok = (dvars.eps > 1.0 and report.passed and worst_block >= -1e-7
          and part > 0.0 and elapsed <= 300.0)
    _report(1, ok, f"mixed-objective SDP feasible (eps = {dvars.eps:.8f}), "
                   f"min block eig {worst_block:.2e} >= -1e-7, "
                   f"min partition eig {part:.2e} > 0, solved+verified in {elapsed:.1f}s")


def test_criterion_02_noiseless_lyapunov_decrease(baseline_gains, baseline_params):
    rng = np.random.default_rng(2026)
    g = baseline_gains
    X = _sample_ring(g, rng, 1.0 / g.eps, 1.0, N_SAMPLES)
    _, v_now = _switched_quads(X, g)
    Xp = _closed_loop_step(X, np.zeros((N_SAMPLES, 6)), g, baseline_params.model)
    _, v_next = _switched_quads(Xp, g)
    margin = np.max(v_next - v_now * (1.0 + 1e-9))
    _report(2, margin <= 0.0,
            f"V(x+) <= V(x)(1+1e-9) on {N_SAMPLES} basin-ring samples, w = 0 "
            f"(worst slack {margin:.3e})")


def test_criterion_03_attractor_invariance(baseline_gains, baseline_params):
    rng = np.random.default_rng(2027)
    g = baseline_gains
    X = _sample_ring(g, rng, 0.0, 1.0 / g.eps, N_SAMPLES)
    W = _sample_ball(rng, baseline_params.lambda_noise, N_SAMPLES)
    _, v_next = _switched_quads(_closed_loop_step(X, W, g, baseline_params.model), g)
    worst = float(np.max(v_next))
    bound = 1.0 / g.eps + 1e-9
    _report(3, worst <= bound,
            f"V(x+) <= 1/eps + 1e-9 on {N_SAMPLES} attractor samples with noise "
            f"(worst {worst:.9f} vs bound {bound:.9f})")


def test_criterion_04_three_cases_converge(etc_mc, baseline_config):
    all_conv = all(etc_mc[c].all_converged for c in baseline_config.case_names)
    elapsed = etc_mc["elapsed"]
    _report(4, all_conv and elapsed <= 60.0,
            "100% of 3 x 100 linear ETC realizations reach the attractor by "
            f"step 240 and remain ({elapsed:.1f}s <= 60s)")


def test_criterion_05_firing_reduction(etc_mc, mpc_mc, baseline_config):
    details = []
    ok = True
    for case in baseline_config.case_names:
        etc_f = etc_mc[case].mean_firing_fraction
        mpc_f = mpc_mc[case].mean_firing_fraction
        ok &= 0.40 <= etc_f <= 0.85 and mpc_f == 1.0
        details.append(f"{case}: ETC {100 * etc_f:.2f}% / MPC {100 * mpc_f:.0f}%")
    _report(5, ok, "ETC firing in [40%, 85%], MPC exactly 100% -- " + "; ".join(details))


def test_criterion_06_fuel_bands(etc_mc, mpc_mc, baseline_config):
    details = []
    ok = True
    for case in baseline_config.case_names:
        etc_u = etc_mc[case].mean_u_tot
        mpc_u = mpc_mc[case].mean_u_tot
        ratio = mpc_u / etc_u
        ok &= 1.2 <= etc_u <= 5.0 and 0.5 <= ratio <= 2.0
        details.append(f"{case}: ETC {etc_u:.3f} m/s, MPC {mpc_u:.3f} m/s (x{ratio:.2f})")
    _report(6, ok, "ETC u_tot in [1.2, 5.0] m/s and MPC within 2x -- " + "; ".join(details))


def test_criterion_07_nonlinear_validation(baseline_config, baseline_gains, baseline_qp):
    t0 = time.perf_counter()
    base_seed = baseline_config["monte_carlo"]["base_seed"]
    cfg = baseline_config.run_config("case1", "nonlinear", "etc")
    etc = monte_carlo(cfg, 20, base_seed, gains=baseline_gains)
    cfg = baseline_config.run_config("case1", "nonlinear", "mpc")
    mpc = monte_carlo(cfg, 20, base_seed, gains=baseline_gains, mpc=baseline_qp)
    elapsed = time.perf_counter() - t0
    reached = np.mean([m.final_pos_error < 5.0 for m in etc.per_realization])
    ok = (reached >= 0.95 and etc.mean_firing_fraction < 1.0
          and mpc.mean_firing_fraction == 1.0 and elapsed <= 300.0)
    _report(7, ok, f"{100 * reached:.0f}% of nonlinear ETC runs end inside 5 m, "
                   f"ETC firing {100 * etc.mean_firing_fraction:.2f}% < MPC 100% "
                   f"({elapsed:.1f}s <= 300s)")


def test_criterion_08_discretization_oracle(baseline_config):
    n = baseline_config.orbit_spec().mean_motion
    T = baseline_config["timing"]["T_s"]
    A = discretize(hcw_continuous(n), T).A
    err = np.max(np.abs(A - hcw_stm_closed_form(n, T)))
    bound = 1e-12 * np.max(np.abs(A))
    _report(8, err <= bound,
            f"||A - closed-form STM||_max = {err:.3e} <= 1e-12 ||A||_max = {bound:.3e}")


def test_criterion_09_dare(baseline_model):
    one = np.array([[1.0]])
    p = dare_solve(one, one, one, one)[0, 0]
    golden_err = abs(p - (1 + np.sqrt(5)) / 2)
    res = dare_residual(baseline_model.A, baseline_model.B, np.eye(6), np.eye(3),
                        dare_solve(baseline_model.A, baseline_model.B, np.eye(6), np.eye(3)))
    _report(9, golden_err <= 1e-10 and res <= 1e-9,
            f"scalar DARE golden-ratio error {golden_err:.2e} <= 1e-10, "
            f"HCW DARE residual {res:.2e} <= 1e-9")


def test_criterion_10_qp_kkt(baseline_qp):
    rng = np.random.default_rng(10)
    worst = 0.0
    for _ in range(100):
        scale = 10.0 ** rng.uniform(0, 3.2)
        x = rng.normal(size=6)
        x[:3] *= scale
        x[3:] *= scale * 1e-3
        u = qp_solve_box(baseline_qp, x)
        f = baseline_qp.f_of(x)
        worst = max(worst, kkt_residual(baseline_qp, f, u) / (1 + np.max(np.abs(f))))
    _report(10, worst <= 1e-8,
            f"100 random condensed instances at Np = 120: "
            f"worst scaled KKT residual {worst:.3e} <= 1e-8")


def test_criterion_11_model_consistency(baseline_config, baseline_gains):
    # replay the linear closed-loop impulse schedule through the two-body
    # truth model so the comparison isolates the propagation models
    lin_cfg = replace(baseline_config.run_config("case1", "linear", "etc", seed=0),
                      disturbances=DisturbanceSpec.zeroed())
    lin = run_linear(lin_cfg, baseline_gains)
    nl_cfg = replace(baseline_config.run_config("case1", "nonlinear", "none", seed=0),
                     disturbances=DisturbanceSpec.zeroed())
    nl = run_nonlinear(nl_cfg, impulse_schedule=lin.u_applied[:lin_cfg.n_sim])

    sep = np.linalg.norm(lin.x[:, :3], axis=1)
    disc = np.linalg.norm(nl.x - lin.x, axis=1)
    far = sep >= 20.0
    worst_far = float(np.max(disc[far] / sep[far]))
    worst_abs = float(np.max(disc))
    ok = worst_far <= 0.01 and worst_abs <= 0.01 * sep[0]
    _report(11, ok, f"two-body vs HCW under the same impulses: discrepancy/separation "
                    f"{100 * worst_far:.4f}% (<= 1%) while above the 20 m close-range "
                    f"threshold, absolute discrepancy {worst_abs:.3f} m <= 1% of the "
                    f"{sep[0]:.0f} m initial separation over all 240 steps")


def test_criterion_12_determinism(baseline_config, baseline_gains):
    cfg = baseline_config.run_config("case1", "linear", "etc")
    blobs = []
    for _ in range(2):
        res = monte_carlo(cfg, 10, base_seed=555, gains=baseline_gains, jobs=2)
        doc = metrics_document(res, "case1", "linear", "etc")
        blobs.append(json.dumps(doc, sort_keys=True).encode())
    _report(12, blobs[0] == blobs[1],
            "repeated montecarlo with one base seed produced byte-identical "
            f"aggregate JSON ({len(blobs[0])} bytes)")
