"""Benchmark: compiled extension vs pure-NumPy fallback on the hot kernels.

Run after installing the package (the extension builds during install):

    python benchmarks/bench_kernels.py

Workloads mirror the two runtime hot spots: saturated box-QP solves at the
default MPC horizon, and two-body RK4 propagation at the simulation cadence.
"""
from __future__ import annotations

import time

import numpy as np

from rvetc.config import load_config
from rvetc.kernels import _native_available, fallback
from rvetc.mpc import kkt_residual


def _build_qp_instances(n_instances: int = 40):
    cfg = load_config()
    model = cfg.discrete_model()
    qp = cfg.condensed_qp(model)
    rng = np.random.default_rng(3)
    instances = []
    for _ in range(n_instances):
        scale = 10.0 ** rng.uniform(2.0, 3.3)
        x = rng.normal(size=6)
        x[:3] *= scale
        x[3:] *= scale * 1e-3
        f = qp.f_of(x)
        tol = qp.kkt_tol_scale * (1.0 + np.max(np.abs(f)))
        instances.append((f, tol))
    return qp, instances


def bench_qp(impl, qp, instances) -> tuple[float, int]:
    lip = qp.lipschitz()
    u0 = np.zeros(qp.H.shape[0])
    t0 = time.perf_counter()
    iters = 0
    for f, tol in instances:
        _, it = impl.qp_box_fista(qp.H, f, qp.box, u0, lip, tol, qp.max_iter)
        iters += it
    return time.perf_counter() - t0, iters


def bench_rk4(impl, n_intervals: int = 2000) -> float:
    mu = 398600.4e9
    y = np.array([6878e3, 0.0, 0.0, 0.0, 7612.0, 0.0])
    t0 = time.perf_counter()
    for _ in range(n_intervals):
        y = impl.rk4_two_body(y, mu, 10.0, 10)
    return time.perf_counter() - t0


def main() -> None:
    impls = {"fallback": fallback}
    native = _native_available()
    if native is not None:
        impls["native"] = native
    else:
        print("compiled extension not importable; benchmarking fallback only")

    qp, instances = _build_qp_instances()
    print(f"\nbox-QP (dim {qp.H.shape[0]}, {len(instances)} saturated instances)")
    base = None
    for name, impl in impls.items():
        dt, iters = bench_qp(impl, qp, instances)
        speed = "" if base is None else f"  ({base / dt:.1f}x vs fallback)"
        if base is None:
            base = dt
        print(f"  {name:<9} {dt * 1e3:8.1f} ms total, {iters} FISTA iterations{speed}")
        u, _ = impl.qp_box_fista(qp.H, instances[0][0], qp.box,
                                 np.zeros(qp.H.shape[0]), qp.lipschitz(),
                                 instances[0][1], qp.max_iter)
        print(f"            KKT residual of first instance: "
              f"{kkt_residual(qp, instances[0][0], u):.2e}")

    print("\ntwo-body RK4 (2000 intervals x 10 substeps)")
    base = None
    for name, impl in impls.items():
        dt = bench_rk4(impl)
        speed = "" if base is None else f"  ({base / dt:.1f}x vs fallback)"
        if base is None:
            base = dt
        print(f"  {name:<9} {dt * 1e3:8.1f} ms{speed}")


if __name__ == "__main__":
    main()
