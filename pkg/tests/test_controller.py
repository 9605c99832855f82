import numpy as np
import pytest

from rvetc.controller import (
    ControllerGains,
    Region,
    etc_input,
    lyapunov_value,
    sample_level_ring,
    saturate,
    set_membership,
    sigma_select,
)


@pytest.fixture(scope="module")
def gains():
    # hand-built switched design: P positive definite on both partitions,
    # M indefinite, mild gain; good enough for the pure run-time law
    M = np.diag([1.0, -1.0, 0.5, -0.5, 0.2, -0.2])
    P0 = np.diag([2.0, 1.0, 1.5, 3.0, 2.5, 2.0])
    P1 = P0 + 0.4 * M
    K = -0.01 * np.hstack([np.eye(3), 50.0 * np.eye(3)])
    G = 0.5 * K
    return ControllerGains(K=K, M=M, P0=P0, P1=P1, G0=G, G1=G, eps=4.0, u_bar=0.2)


class TestSaturate:
    def test_componentwise_clamp(self):
        u = saturate(np.array([0.5, -0.3, 0.1]), 0.2)
        assert np.allclose(u, [0.2, -0.2, 0.1])

    def test_zero(self):
        assert np.allclose(saturate(np.zeros(3), 0.2), 0.0)

    def test_identity_inside_box(self):
        u = np.array([0.1, -0.19, 0.0])
        assert np.array_equal(saturate(u, 0.2), u)

    def test_rejects_nonpositive_bound(self):
        with pytest.raises(ValueError):
            saturate(np.zeros(3), 0.0)


class TestSigmaSelect:
    def test_positive_form_no_fire(self):
        M = np.diag([1.0, -1.0, 0, 0, 0, 0.0])
        x = np.array([2.0, 1.0, 0, 0, 0, 0])
        dec = sigma_select(x, M)
        assert dec.sigma == 0
        assert dec.quad_value == pytest.approx(3.0)
        assert not dec.boundary

    def test_negative_form_fires(self):
        M = np.diag([1.0, -1.0, 0, 0, 0, 0.0])
        dec = sigma_select(np.array([1.0, 2.0, 0, 0, 0, 0]), M)
        assert dec.sigma == 1

    def test_origin_is_boundary_no_fire(self):
        dec = sigma_select(np.zeros(6), np.diag([1.0, -1, 1, -1, 1, -1]))
        assert dec.sigma == 0
        assert dec.boundary

    def test_trigger_sign_identity_bruteforce(self):
        # (1 - 2 sigma) x'Mx >= 0 must hold for every sample
        rng = np.random.default_rng(0)
        for _ in range(20):
            A = rng.normal(size=(6, 6))
            M = 0.5 * (A + A.T)
            X = rng.normal(size=(5000, 6)) * 10 ** rng.uniform(-2, 3)
            q = np.einsum("ni,ij,nj->n", X, M, X)
            sig = (q < 0).astype(int)
            assert np.all((1 - 2 * sig) * q >= 0.0)


class TestEtcInput:
    def test_no_fire_gives_zero(self, gains):
        # pick x in the sigma=0 region
        x = np.array([10.0, 0, 0, 0, 0, 0])
        assert sigma_select(x, gains.M).sigma == 0
        cmd = etc_input(x, gains)
        assert np.array_equal(cmd.u_applied, np.zeros(3))

    def test_unsaturated_gain_passthrough(self, gains):
        x = np.array([0.0, 1.0, 0, 0, 0, 0])  # sigma = 1, small command
        cmd = etc_input(x, gains)
        assert cmd.sigma == 1
        assert np.allclose(cmd.u_applied, gains.K @ x)

    def test_sigma_commutes_with_saturation(self, gains):
        rng = np.random.default_rng(1)
        X = rng.normal(size=(100_000, 6)) * 10 ** rng.uniform(-1, 4, size=(100_000, 1))
        q = np.einsum("ni,ij,nj->n", X, gains.M, X)
        sig = (q < 0).astype(float)[:, None]
        lhs = np.clip(sig * (X @ gains.K.T), -gains.u_bar, gains.u_bar)
        rhs = sig * np.clip(X @ gains.K.T, -gains.u_bar, gains.u_bar)
        assert np.array_equal(lhs, rhs)


class TestLyapunov:
    def test_zero_at_origin(self, gains):
        assert lyapunov_value(np.zeros(6), gains) == 0.0

    def test_partition_lower_bound(self, gains):
        rng = np.random.default_rng(2)
        for _ in range(2000):
            x = rng.normal(size=6) * 10 ** rng.uniform(-1, 2)
            sig = sigma_select(x, gains.M).sigma
            lhs = lyapunov_value(x, gains)
            rhs = x @ (gains.P(sig) - (1 - 2 * sig) * gains.M) @ x
            assert lhs >= rhs - 1e-9 * max(1.0, abs(lhs))

    def test_uses_partition_matrix(self, gains):
        x = np.array([0.0, 1.0, 0, 0, 0, 0])  # sigma = 1
        assert lyapunov_value(x, gains) == pytest.approx(x @ gains.P1 @ x)


class TestSetMembership:
    def test_origin_inside_attractor(self, gains):
        assert set_membership(np.zeros(6), gains) is Region.INSIDE_ATTRACTOR

    def test_between_levels_is_basin(self, gains):
        x = np.array([1.0, 0, 0, 0, 0, 0.0])
        level = (1.0 + 1.0 / gains.eps) / 2.0
        x = x * np.sqrt(level / lyapunov_value(x, gains))
        assert set_membership(x, gains) is Region.INSIDE_BASIN

    def test_boundary_points_classified_inside(self, gains):
        rng = np.random.default_rng(3)
        for _ in range(200):
            d = rng.normal(size=6)
            x = d / np.sqrt(lyapunov_value(d, gains))  # scaling keeps sigma
            assert lyapunov_value(x, gains) == pytest.approx(1.0, rel=1e-12)
            assert set_membership(x, gains) is not Region.OUTSIDE

    def test_far_point_outside(self, gains):
        assert set_membership(1e3 * np.ones(6), gains) is Region.OUTSIDE


class TestSampling:
    def test_levels_in_range(self, gains):
        rng = np.random.default_rng(4)
        X = sample_level_ring(gains, rng, 0.25, 1.0, 500)
        V = np.array([lyapunov_value(x, gains) for x in X])
        assert np.all(V <= 1.0 + 1e-12)
        assert np.all(V >= 0.25 - 1e-12)


def test_gains_validation():
    with pytest.raises(ValueError):
        ControllerGains(K=np.zeros((3, 6)), M=np.triu(np.ones((6, 6))),
                        P0=np.eye(6), P1=np.eye(6), G0=np.zeros((3, 6)),
                        G1=np.zeros((3, 6)), eps=2.0, u_bar=0.2)
    with pytest.raises(ValueError):
        ControllerGains(K=np.zeros((3, 6)), M=np.zeros((6, 6)),
                        P0=np.eye(6), P1=np.eye(6), G0=np.zeros((3, 6)),
                        G1=np.zeros((3, 6)), eps=2.0, u_bar=-0.1)
