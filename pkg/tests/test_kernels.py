import numpy as np
import pytest

from rvetc.kernels import _native_available, backend_name, fallback

native = _native_available()
needs_native = pytest.mark.skipif(native is None, reason="compiled extension not built")


def _random_box_qp(rng, n=24):
    A = rng.normal(size=(n, n))
    H = A @ A.T + n * np.eye(n)
    f = rng.normal(size=n) * 10.0
    return np.ascontiguousarray(H), f


class TestKktResidual:
    def test_zero_at_unconstrained_optimum(self):
        rng = np.random.default_rng(0)
        H, f = _random_box_qp(rng)
        u = np.linalg.solve(H, -f)
        assert fallback.kkt_residual_box(H, f, np.inf, u) < 1e-10

    def test_detects_wrong_sign_at_bound(self):
        H = np.eye(2)
        f = np.array([-5.0, 0.0])
        u = np.array([-1.0, 0.0])  # should sit at +1 for this f
        assert fallback.kkt_residual_box(H, f, 1.0, u) > 1.0

    def test_correctly_signed_bound_has_no_residual(self):
        H = np.eye(1)
        f = np.array([-5.0])
        u = np.array([1.0])
        assert fallback.kkt_residual_box(H, f, 1.0, u) == 0.0


class TestFista:
    def test_diagonal_solution_is_clamp(self):
        # separable case: u_i = clip(-f_i / H_ii)
        H = np.diag([1.0, 2.0, 4.0])
        f = np.array([-3.0, 1.0, 0.4])
        expected = np.clip(-f / np.diag(H), -1.0, 1.0)
        u, it = fallback.qp_box_fista(H, f, 1.0, np.zeros(3), 4.0, 1e-12, 10_000)
        assert np.allclose(u, expected, atol=1e-9)
        assert it < 10_000

    def test_meets_tolerance_on_dense_problem(self):
        rng = np.random.default_rng(1)
        H, f = _random_box_qp(rng)
        lip = float(np.linalg.eigvalsh(H)[-1])
        tol = 1e-9
        u, it = fallback.qp_box_fista(H, f, 0.5, np.zeros(len(f)), lip, tol, 50_000)
        assert fallback.kkt_residual_box(H, f, 0.5, u) <= tol

    def test_iteration_cap_respected(self):
        rng = np.random.default_rng(2)
        H, f = _random_box_qp(rng)
        lip = float(np.linalg.eigvalsh(H)[-1])
        u, it = fallback.qp_box_fista(H, f, 0.5, np.zeros(len(f)), lip, 0.0, 37)
        assert it == 37


class TestRk4:
    def test_free_motion_without_gravity_limit(self):
        # huge radius: gravity ~ 0, straight-line drift
        y = np.array([1e12, 0.0, 0.0, 10.0, -5.0, 2.0])
        out = fallback.rk4_two_body(y, 1.0, 100.0, 10)
        assert np.allclose(out[:3], y[:3] + 100.0 * y[3:], rtol=1e-9)

    def test_input_not_mutated(self):
        y = np.array([7e6, 0.0, 0.0, 0.0, 7.5e3, 0.0])
        y0 = y.copy()
        fallback.rk4_two_body(y, 3.986e14, 10.0, 10)
        assert np.array_equal(y, y0)


@needs_native
class TestBackendParity:
    def test_backend_selected(self):
        assert backend_name() in ("native", "fallback")

    def test_rk4_parity(self):
        y = np.array([6878e3, 1e5, -2e4, 12.0, 7.6e3, -5.0])
        a = fallback.rk4_two_body(y, 3.986004e14, 10.0, 10)
        b = native.rk4_two_body(y, 3.986004e14, 10.0, 10)
        assert np.allclose(a, b, rtol=1e-12, atol=1e-9)

    def test_kkt_parity(self):
        rng = np.random.default_rng(3)
        H, f = _random_box_qp(rng)
        u = np.clip(rng.normal(size=len(f)), -0.5, 0.5)
        a = fallback.kkt_residual_box(H, f, 0.5, u)
        b = native.kkt_residual_box(H, f, 0.5, u)
        assert a == pytest.approx(b, rel=1e-12, abs=1e-14)

    def test_fista_parity(self):
        rng = np.random.default_rng(4)
        H, f = _random_box_qp(rng, n=40)
        lip = float(np.linalg.eigvalsh(H)[-1])
        tol = 1e-9 * (1 + np.max(np.abs(f)))
        ua, ita = fallback.qp_box_fista(H, f, 0.3, np.zeros(40), lip, tol, 50_000)
        ub, itb = native.qp_box_fista(H, f, 0.3, np.zeros(40), lip, tol, 50_000)
        assert fallback.kkt_residual_box(H, f, 0.3, ua) <= tol
        assert native.kkt_residual_box(H, f, 0.3, ub) <= tol
        assert np.allclose(ua, ub, atol=1e-7)
