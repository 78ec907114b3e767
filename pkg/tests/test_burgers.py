import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from eulermaxwell.burgers import (
    FlowEval,
    InitialVelocity,
    check_H0,
    distance_to_negative_axis,
    estimate_suite,
    lagrangian_cloud,
    residual_check,
)
from eulermaxwell.grid import GridSpec

SAMPLES = np.random.default_rng(0).uniform(-2, 2, size=(200, 3))


class TestInitialVelocity:
    def test_identity(self):
        v0 = InitialVelocity.identity()
        assert np.allclose(v0.v0(SAMPLES), SAMPLES)
        assert np.allclose(v0.Dv0(SAMPLES), np.eye(3))
        assert np.all(v0.D2v0(SAMPLES) == 0)

    def test_bump_admissibility(self):
        assert InitialVelocity.bump(0.1).epsilon() == pytest.approx(0.9)
        with pytest.raises(ValueError):
            InitialVelocity.bump(1.0)
        with pytest.raises(ValueError):
            InitialVelocity.bump(0.1, radius=0.0)

    def test_bump_derivatives_match_differences(self):
        v0 = InitialVelocity.bump(0.4, radius=1.3)
        y = np.array([0.3, -0.2, 0.5])
        h = 1e-5
        J = np.column_stack([(v0.v0(y + h * e) - v0.v0(y - h * e)) / (2 * h) for e in np.eye(3)])
        assert np.allclose(J, v0.Dv0(y), atol=1e-8)
        H = np.stack([(v0.Dv0(y + h * e) - v0.Dv0(y - h * e)) / (2 * h) for e in np.eye(3)], axis=-1)
        assert np.allclose(H, v0.D2v0(y), atol=1e-7)

    def test_bump_hessian_symmetric_and_compact(self):
        v0 = InitialVelocity.bump(0.3)
        D = v0.Dv0(SAMPLES)
        assert np.allclose(D, np.swapaxes(D, -1, -2), atol=1e-14)
        far = np.array([[1.5, 0.0, 0.0], [0.0, -1.1, 0.2]])
        assert np.allclose(v0.Dv0(far), np.eye(3))


class TestH0:
    def test_identity_passes(self):
        rep = check_H0(InitialVelocity.identity(), 1.0, SAMPLES)
        assert rep.passed and rep.min_distance == pytest.approx(1.0)
        assert not check_H0(InitialVelocity.identity(), 1.01, SAMPLES).passed

    def test_negative_eigenvalue_fails(self):
        v0 = InitialVelocity.affine(np.diag([-0.1, 1.0, 1.0]))
        assert not check_H0(v0, 1e-6, SAMPLES).passed

    def test_rotation_generator_fails(self):
        M = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
        # characteristic polynomial -l (l^2 + 1): roots 0 and +-i
        rep = check_H0(InitialVelocity.affine(M), 1e-3, SAMPLES)
        assert not rep.passed and rep.min_distance == pytest.approx(0.0, abs=1e-12)

    def test_distance_function(self):
        z = np.array([-2.0 + 0.5j, 3.0 + 4.0j, 0.0, -1.0])
        assert np.allclose(distance_to_negative_axis(z), [0.5, 5.0, 0.0, 0.0])

    def test_bump_margin(self):
        v0 = InitialVelocity.bump(0.1)
        assert check_H0(v0, v0.epsilon(), lagrangian_cloud(1.0, n=12)).passed


class TestFlow:
    def test_identity_inverse_exact(self):
        flow = FlowEval(InitialVelocity.identity())
        assert np.array_equal(flow.invert_flow(3.0, SAMPLES), SAMPLES / 4.0)

    def test_affine_inverse(self):
        M = np.array([[1.5, 0.2, 0.0], [0.2, 1.0, 0.1], [0.0, 0.1, 0.8]])
        c = np.array([0.1, -0.2, 0.05])
        flow = FlowEval(InitialVelocity.affine(M, c))
        t = 2.5
        y = flow.invert_flow(t, SAMPLES)
        ref = np.linalg.solve(np.eye(3) + t * M, (SAMPLES - t * c).T).T
        assert np.max(np.abs(y - ref)) <= 1e-13

    @pytest.mark.parametrize("t", [0.3, 10.0, 100.0])
    def test_bump_round_trip(self, t):
        flow = FlowEval(InitialVelocity.bump(0.1))
        y = flow.invert_flow(t, SAMPLES * (1 + t))
        assert np.max(np.abs(flow.forward_flow(t, y) - SAMPLES * (1 + t))) <= 1e-12

    @settings(max_examples=20, deadline=None)
    @given(delta=st.floats(0.0, 0.9), t=st.floats(0.0, 50.0))
    def test_round_trip_property(self, delta, t):
        flow = FlowEval(InitialVelocity.bump(delta, radius=0.8))
        x = SAMPLES[:30] * (1 + t)
        assert np.max(np.abs(flow.forward_flow(t, flow.invert_flow(t, x)) - x)) <= 1e-12 * max(1.0, 1 + t)

    def test_negative_time_rejected(self):
        with pytest.raises(ValueError):
            FlowEval(InitialVelocity.identity()).invert_flow(-1.0, SAMPLES)


class TestDerivedFields:
    def test_identity_fields(self):
        flow = FlowEval(InitialVelocity.identity())
        t = 1.7
        assert np.allclose(flow.eval_v(t, SAMPLES), SAMPLES / (1 + t))
        assert np.allclose(flow.eval_Dv(t, SAMPLES), np.eye(3) / (1 + t))
        assert np.all(np.abs(flow.eval_K(t, SAMPLES)) < 1e-15)

    def test_diagonal_affine(self):
        flow = FlowEval(InitialVelocity.affine(np.diag([2.0, 1.0, 1.0])))
        t = 0.8
        expect = np.diag([2 / (1 + 2 * t), 1 / (1 + t), 1 / (1 + t)])
        assert np.allclose(flow.eval_Dv(t, SAMPLES), expect, atol=1e-15)

    @pytest.mark.parametrize("family", ["identity", "affine", "bump"])
    def test_K_reconstructs_Dv(self, family):
        v0 = {"identity": InitialVelocity.identity(),
              "affine": InitialVelocity.affine(np.diag([1.5, 0.7, 1.2]), (0.1, 0.0, 0.0)),
              "bump": InitialVelocity.bump(0.5)}[family]
        flow = FlowEval(v0)
        t = 3.0
        x = SAMPLES * (1 + t) * 0.3
        rebuilt = np.eye(3) / (1 + t) + flow.eval_K(t, x) / (1 + t) ** 2
        assert np.max(np.abs(rebuilt - flow.eval_Dv(t, x))) <= 1e-13

    def test_D2v_matches_differences(self):
        flow = FlowEval(InitialVelocity.bump(0.3))
        t, h = 1.0, 1e-5
        x = np.array([0.4, 0.1, -0.3]) * (1 + t)
        fd = np.stack([(flow.eval_Dv(t, x + h * e) - flow.eval_Dv(t, x - h * e)) / (2 * h) for e in np.eye(3)], axis=-1)
        assert np.allclose(flow.eval_D2v(t, x), fd, atol=1e-7)


class TestResidual:
    def _orders(self, flow, t, x):
        r = [residual_check(flow, t, x, h, h) for h in (1e-2, 5e-3, 2.5e-3)]
        return np.log2(np.array(r[:-1]) / np.array(r[1:]))

    def test_identity_order(self):
        assert np.all(self._orders(FlowEval(InitialVelocity.identity()), 1.0, np.array([0.5, -0.3, 0.2])) >= 1.9)

    def test_affine_order(self):
        M = np.array([[1.5, 0.2, 0.0], [0.2, 1.0, 0.1], [0.0, 0.1, 0.8]])
        assert np.all(self._orders(FlowEval(InitialVelocity.affine(M)), 1.0, np.array([0.5, -0.3, 0.2])) >= 1.9)

    def test_bump_order(self):
        flow = FlowEval(InitialVelocity.bump(0.1))
        assert np.all(self._orders(flow, 1.0, flow.forward_flow(1.0, np.array([0.3, 0.2, -0.1]))) >= 1.9)

    def test_constant_state(self):
        flow = FlowEval(InitialVelocity.affine(np.zeros((3, 3)), (0.3, -0.1, 0.2)))
        assert residual_check(flow, 2.0, np.array([0.1, 0.2, 0.3]), 1e-3, 1e-3) <= 1e-12


class TestEstimateSuite:
    def test_identity_dv_times_t(self):
        flow = FlowEval(InitialVelocity.identity())
        rep = estimate_suite(flow, np.geomspace(1, 50, 10), GridSpec(16, 4.0, 3), window=(1, 50))
        assert np.allclose(rep.sup_Dv * (1 + rep.times), 1.0, rtol=1e-14)

    def test_bump_slopes_coarse(self):
        flow = FlowEval(InitialVelocity.bump(0.1))
        rep = estimate_suite(flow, np.geomspace(1, 50, 10), GridSpec(32, 4.0, 3), window=(1, 50))
        assert rep.slopes["sup_Dv"] <= -0.9
        assert rep.slopes["sup_D2v"] <= -2.7
        # K is O(1) on a set of radius ~ (1+t): its H^1 seminorm grows like
        # (1+t)^(1/2) in three dimensions, K/(1+t) decays like (1+t)^(-1/2)
        assert rep.slopes["K_H1"] == pytest.approx(0.5, abs=0.05)
        assert rep.slopes["Ktilde_H1"] == pytest.approx(-0.5, abs=0.05)
        rows = rep.rows()
        assert rows[0][:3] == ["t", "sup_Dv", "sup_D2v"] and len(rows) == 11

    def test_original_frame_guards_support(self):
        flow = FlowEval(InitialVelocity.bump(0.1))
        with pytest.raises(ValueError):
            estimate_suite(flow, [1.0, 10.0, 50.0], GridSpec(16, 4.0, 3), frame="original", window=(1, 50))
