import numpy as np
import pytest

from rvetc.dynamics import (
    MU_EARTH,
    DegenerateStateError,
    InertialState,
    OrbitSpec,
    StateVector,
    circular_orbit_state,
    discretize,
    hcw_continuous,
    hcw_stm_closed_form,
    impulse_to_inertial,
    inertial_from_relative,
    lvlh_basis,
    propagate_two_body,
    relative_state_lvlh,
    two_body_accel,
)

N_ROUNDED = 0.0011  # rounded reference mean motion
R0 = 6878e3


@pytest.fixture(scope="module")
def orbit():
    return OrbitSpec()


def test_mean_motion_from_radius(orbit):
    assert orbit.mean_motion == pytest.approx(np.sqrt(MU_EARTH / R0**3), rel=1e-15)
    assert orbit.mean_motion == pytest.approx(1.1068e-3, rel=1e-4)


def test_mean_motion_override():
    assert OrbitSpec(n_override=N_ROUNDED).mean_motion == N_ROUNDED


def test_orbit_spec_rejects_bad_radius():
    with pytest.raises(ValueError):
        OrbitSpec(R0=0.0)
    with pytest.raises(ValueError):
        OrbitSpec(mu_grav=-1.0)


def test_state_vector_rejects_non_finite():
    with pytest.raises(ValueError):
        StateVector(np.array([1.0, np.nan, 0, 0, 0, 0]))


class TestHcwContinuous:
    def test_matrix_entries(self):
        cm = hcw_continuous(N_ROUNDED)
        assert cm.A_c[3, 0] == pytest.approx(3 * N_ROUNDED**2)   # 3.63e-6
        assert cm.A_c[3, 4] == pytest.approx(2.2e-3, rel=1e-12)
        assert cm.A_c[4, 3] == pytest.approx(-2.2e-3, rel=1e-12)
        assert cm.A_c[5, 2] == pytest.approx(-N_ROUNDED**2)

    def test_block_structure(self):
        cm = hcw_continuous(N_ROUNDED)
        assert np.array_equal(cm.A_c[:3, :3], np.zeros((3, 3)))
        assert np.array_equal(cm.A_c[:3, 3:], np.eye(3))
        assert np.array_equal(cm.B_c[:3], np.zeros((3, 3)))
        assert np.array_equal(cm.B_c[3:], np.eye(3))
        assert np.array_equal(cm.B_wc[3:, 3:], np.eye(3))
        assert np.count_nonzero(cm.B_wc) == 3

    def test_rejects_bad_mean_motion(self):
        for n in (0.0, -1e-3, np.nan, np.inf):
            with pytest.raises(ValueError):
                hcw_continuous(n)


class TestDiscretize:
    def test_zero_period_limit(self):
        cm = hcw_continuous(N_ROUNDED)
        dm = discretize(cm, 1e-9)
        assert np.allclose(dm.A, np.eye(6), atol=1e-6)
        assert np.allclose(dm.B, cm.B_c, atol=1e-6)
        assert np.allclose(dm.B_w, 0.0, atol=1e-6)

    def test_matches_closed_form_stm(self):
        dm = discretize(hcw_continuous(N_ROUNDED), 10.0)
        stm = hcw_stm_closed_form(N_ROUNDED, 10.0)
        scale = np.max(np.abs(dm.A))
        assert np.max(np.abs(dm.A - stm)) <= 1e-12 * scale

    def test_stm_agreement_across_regimes(self):
        for n in (1e-4, 1e-3, 1e-2):
            for T in (1.0, 60.0, 600.0):
                dm = discretize(hcw_continuous(n), T)
                stm = hcw_stm_closed_form(n, T)
                assert np.max(np.abs(dm.A - stm)) <= 1e-12 * np.max(np.abs(dm.A))

    def test_input_matrix_is_propagated_bc(self):
        cm = hcw_continuous(N_ROUNDED)
        dm = discretize(cm, 10.0)
        assert np.allclose(dm.B, dm.A @ cm.B_c, rtol=0, atol=1e-15)

    def test_invertible(self):
        dm = discretize(hcw_continuous(N_ROUNDED), 10.0)
        assert abs(np.linalg.det(dm.A)) > 0.5

    def test_noise_matrix_against_simpson_quadrature(self):
        # composite Simpson over the integrand exp(Ac (T - tau)) Bwc
        cm = hcw_continuous(N_ROUNDED)
        T = 10.0
        dm = discretize(cm, T)
        from scipy.linalg import expm
        panels = 10_000
        taus = np.linspace(0.0, T, panels + 1)
        weights = np.ones(panels + 1)
        weights[1:-1:2] = 4.0
        weights[2:-1:2] = 2.0
        acc = np.zeros((6, 6))
        for tau, w in zip(taus, weights):
            acc += w * expm(cm.A_c * (T - tau))
        quad = (T / panels / 3.0) * acc @ cm.B_wc
        assert np.allclose(dm.B_w.sum(axis=0), quad.sum(axis=0),
                           rtol=1e-9, atol=1e-12)

    def test_semigroup_property(self):
        cm = hcw_continuous(N_ROUNDED)
        a1 = discretize(cm, 7.0).A
        a2 = discretize(cm, 13.0).A
        a12 = discretize(cm, 20.0).A
        assert np.allclose(a1 @ a2, a12, rtol=1e-11, atol=1e-14)

    def test_rejects_bad_period(self):
        with pytest.raises(ValueError):
            discretize(hcw_continuous(N_ROUNDED), 0.0)


class TestClosedFormStm:
    def test_identity_at_zero(self):
        assert np.allclose(hcw_stm_closed_form(N_ROUNDED, 0.0), np.eye(6),
                           rtol=0, atol=1e-15)

    def test_periodic_return_of_drift_free_modes(self):
        # v_y = -2 n r_x cancels the along-track secular drift
        n = N_ROUNDED
        stm = hcw_stm_closed_form(n, 2 * np.pi / n)
        x0 = np.array([40.0, -25.0, 30.0, 0.01, -2 * n * 40.0, -0.02])
        assert np.allclose(stm @ x0, x0, rtol=1e-9, atol=1e-9)


class TestTwoBody:
    def test_acceleration_value(self):
        s = InertialState(np.array([R0, 0.0, 0.0]), np.zeros(3))
        a = two_body_accel(s, MU_EARTH)
        assert a == pytest.approx([-MU_EARTH / R0**2, 0.0, 0.0])

    def test_inverse_square_scaling(self):
        s1 = InertialState(np.array([R0, 0.0, 0.0]), np.zeros(3))
        s4 = InertialState(np.array([4 * R0, 0.0, 0.0]), np.zeros(3))
        a1 = two_body_accel(s1, MU_EARTH)
        a4 = two_body_accel(s4, MU_EARTH)
        assert np.allclose(a4 * 16.0, a1, rtol=1e-14)

    def test_antiparallel_to_radius(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            r = rng.normal(size=3) * 7e6
            a = two_body_accel(InertialState(r, np.zeros(3)), MU_EARTH)
            cosang = a @ r / (np.linalg.norm(a) * np.linalg.norm(r))
            assert cosang == pytest.approx(-1.0, abs=1e-12)

    def test_circular_orbit_period_return(self):
        orbit = OrbitSpec()
        period = 2 * np.pi / orbit.mean_motion
        s0 = circular_orbit_state(orbit, 0.0)
        s1 = propagate_two_body(s0, period, substeps=int(round(period)))
        assert np.linalg.norm(s1.r_eci - s0.r_eci) < 1e-3

    def test_rk4_observed_order(self):
        # step sizes chosen in the truncation-dominated regime
        orbit = OrbitSpec()
        period = 2 * np.pi / orbit.mean_motion
        s0 = circular_orbit_state(orbit, 0.0)
        dt = period / 8.0
        exact = circular_orbit_state(orbit, 2 * np.pi / 8.0)
        errs = []
        for substeps in (4, 8):
            s = propagate_two_body(s0, dt, substeps)
            errs.append(np.linalg.norm(s.r_eci - exact.r_eci))
        order = np.log2(errs[0] / errs[1])
        assert 3.8 <= order <= 4.2

    def test_planarity_preserved(self):
        r = np.array([R0, 0.0, 0.0])
        v = np.array([0.0, np.sqrt(MU_EARTH / R0), 0.0])
        s = propagate_two_body(InertialState(r, v), 500.0, 500)
        assert abs(s.r_eci[2]) < 1e-9
        assert abs(s.v_eci[2]) < 1e-12


class TestLvlhFrame:
    def test_axis_aligned_identity(self):
        s = InertialState(np.array([R0, 0.0, 0.0]),
                          np.array([0.0, np.sqrt(MU_EARTH / R0), 0.0]))
        assert np.allclose(lvlh_basis(s), np.eye(3), atol=1e-15)

    def test_orthonormality(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            s = InertialState(rng.normal(size=3) * 7e6, rng.normal(size=3) * 7e3)
            R = lvlh_basis(s)
            assert np.max(np.abs(R @ R.T - np.eye(3))) < 1e-14
            assert np.linalg.det(R) == pytest.approx(1.0, abs=1e-12)

    def test_orbit_normal_axis(self):
        orbit = OrbitSpec(inclination=np.deg2rad(30), raan=np.deg2rad(45))
        s = circular_orbit_state(orbit, 0.3)
        h = np.cross(s.r_eci, s.v_eci)
        assert np.allclose(lvlh_basis(s)[2], h / np.linalg.norm(h), atol=1e-14)

    def test_rejects_degenerate(self):
        with pytest.raises(DegenerateStateError):
            lvlh_basis(InertialState(np.array([R0, 0, 0.0]), np.array([1.0, 0, 0])))


class TestRelativeState:
    def test_coincident_is_zero(self):
        orbit = OrbitSpec(inclination=0.4, raan=1.0)
        t = circular_orbit_state(orbit, 0.7)
        x = relative_state_lvlh(t, t)
        assert np.allclose(x.vec, 0.0, atol=1e-12)

    def test_radial_offset_comoving(self):
        orbit = OrbitSpec()
        n = orbit.mean_motion
        t = circular_orbit_state(orbit, 0.0)
        chaser = InertialState(t.r_eci + np.array([100.0, 0, 0]), t.v_eci)
        x = relative_state_lvlh(t, chaser)
        assert np.allclose(x.r, [100.0, 0.0, 0.0], atol=1e-9)
        assert np.allclose(x.v, [0.0, -n * 100.0, 0.0], atol=1e-9)

    def test_round_trip(self):
        orbit = OrbitSpec(inclination=np.deg2rad(30), raan=np.deg2rad(45))
        rng = np.random.default_rng(2)
        for _ in range(20):
            t = circular_orbit_state(orbit, rng.uniform(0, 2 * np.pi))
            x = StateVector(np.concatenate([rng.normal(size=3) * 300,
                                            rng.normal(size=3) * 0.3]))
            chaser = inertial_from_relative(t, x)
            back = relative_state_lvlh(t, chaser)
            assert np.max(np.abs(back.vec - x.vec)) < 1e-9


class TestImpulseMapping:
    def test_zero(self):
        t = circular_orbit_state(OrbitSpec(), 0.0)
        assert np.allclose(impulse_to_inertial(t, np.zeros(3)), 0.0)

    def test_norm_preserved(self):
        orbit = OrbitSpec(inclination=0.9, raan=2.0)
        rng = np.random.default_rng(3)
        for _ in range(30):
            t = circular_orbit_state(orbit, rng.uniform(0, 2 * np.pi))
            dv = rng.normal(size=3)
            out = impulse_to_inertial(t, dv)
            assert np.linalg.norm(out) == pytest.approx(np.linalg.norm(dv), abs=1e-14)

    def test_identity_for_axis_aligned_orbit(self):
        t = InertialState(np.array([R0, 0.0, 0.0]),
                          np.array([0.0, np.sqrt(MU_EARTH / R0), 0.0]))
        dv = np.array([0.1, -0.05, 0.02])
        assert np.allclose(impulse_to_inertial(t, dv), dv, atol=1e-15)


def test_out_of_plane_decoupling():
    dm = discretize(hcw_continuous(N_ROUNDED), 10.0)
    x = np.array([0.0, 0.0, 50.0, 0.0, 0.0, -0.1])
    xp = dm.A @ x
    assert np.allclose(xp[[0, 1, 3, 4]], 0.0, atol=1e-12)
