import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from outctrl.errors import DimensionError, DomainError, FormatError, NotOutputControllable, TargetUnreachable
from outctrl.lti_model import LtiSystem, clip_norm, random_system
from outctrl.synthesis import (
    PANEL_WEIGHTS,
    ControlSignal,
    SteeringProblem,
    constant_control,
    grid_nodes,
    grid_weights,
    min_norm_control,
    simulate,
    verify_steering,
    zero_control,
)

SCALAR = LtiSystem([[0.0]], [[1.0]], [[1.0]])


def steering_system(seed, n=4, m=3, p=2):
    return clip_norm(random_system(n, m, p, seed, "forced_output_controllable"), 2.0)


class TestGrid:
    def test_nodes(self):
        t = grid_nodes(2.0, 9)
        assert t[0] == 0 and t[-1] == 2.0 and len(t) == 9
        assert np.all(np.diff(t) > 0)
        assert t[4] == pytest.approx(1.0)

    @pytest.mark.parametrize("count", [0, 4, 6, 8])
    def test_bad_count(self, count):
        with pytest.raises(DomainError):
            grid_nodes(1.0, count)

    def test_weights_sum(self):
        assert PANEL_WEIGHTS.sum() == pytest.approx(1.0, abs=1e-15)
        assert grid_weights(3.0, 257).sum() == pytest.approx(3.0, rel=1e-14)

    def test_rule_exact_degree_seven(self):
        t = grid_nodes(1.0, 5)
        w = grid_weights(1.0, 5)
        for k in range(8):
            assert w @ t**k == pytest.approx(1.0 / (k + 1), rel=1e-13)


class TestControlSignal:
    def test_validation(self):
        nodes = grid_nodes(1.0, 5)
        with pytest.raises(DomainError):
            ControlSignal(1.0, nodes[::-1], np.zeros(5))
        with pytest.raises(DimensionError):
            ControlSignal(1.0, nodes, np.zeros((4, 1)))
        with pytest.raises(DomainError):
            ControlSignal(1.0, nodes, np.full(5, np.nan))
        with pytest.raises(DomainError):
            ControlSignal(0.0, nodes * 0, np.zeros(5))
        with pytest.raises(FormatError):
            ControlSignal(1.0, nodes, np.zeros(5), rule="trapezoid")

    def test_interpolation_exact_for_quartic(self):
        nodes = grid_nodes(2.0, 9)
        f = lambda t: 1 + t - 2 * t**3 + 0.5 * t**4  # noqa: E731
        u = ControlSignal(2.0, nodes, f(nodes))
        t = np.linspace(0, 2, 37)
        np.testing.assert_allclose(u(t)[:, 0], f(t), atol=1e-12)

    def test_energy(self):
        assert constant_control(2.0, [0.5]).energy() == pytest.approx(0.5, rel=1e-14)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(1, 8), st.integers(1, 3), st.floats(0.1, 10.0), st.integers(0, 2**32 - 1))
    def test_json_round_trip(self, panels, m, T, seed):
        rng = np.random.default_rng(seed)
        count = 4 * panels + 1
        u = ControlSignal(T, grid_nodes(T, count), rng.standard_normal((count, m)) + 1j * rng.standard_normal((count, m)))
        back = ControlSignal.from_json(u.to_json())
        assert back.T == u.T and back.rule == u.rule
        assert back.nodes.tobytes() == u.nodes.tobytes()
        assert back.samples.tobytes() == u.samples.tobytes()

    def test_bad_json(self):
        with pytest.raises(FormatError):
            ControlSignal.from_json("[]")
        with pytest.raises(FormatError):
            ControlSignal.from_json("{")


class TestSimulate:
    def test_homogeneous(self):
        s = random_system(3, 2, 2, 1, "generic")
        x0 = np.array([1.0, -1.0, 2.0j])
        u = zero_control(1.5, 2, grid=9)
        X, Y = simulate(s, u, x0)
        for t, x in zip(u.nodes, X):
            np.testing.assert_allclose(x, scipy.linalg.expm(t * s.A) @ x0, rtol=1e-12, atol=1e-12)
        np.testing.assert_allclose(Y, X @ s.C.T)

    def test_integrator(self):
        _, Y = simulate(SCALAR, constant_control(3.0, [1.0], grid=9), [0.0])
        assert Y[-1, 0] == pytest.approx(3.0, abs=1e-14)
        np.testing.assert_allclose(Y[:, 0].real, grid_nodes(3.0, 9), atol=1e-14)

    def test_zero(self):
        X, Y = simulate(random_system(3, 1, 2, 2), zero_control(1.0, 1, grid=13), np.zeros(3))
        assert np.all(X == 0) and np.all(Y == 0)

    def test_width_mismatch(self):
        with pytest.raises(DimensionError):
            simulate(SCALAR, zero_control(1.0, 2, grid=5), [0.0])

    @pytest.mark.parametrize("seed", range(20))
    def test_constant_input_oracle(self, seed):
        rng = np.random.default_rng(seed)
        s = clip_norm(random_system(4, 2, 3, seed, ("generic", "jordan")[seed % 2]), 3.0)
        x0 = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        u0 = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        T = 1.7
        u = constant_control(T, u0)
        X, _ = simulate(s, u, x0)
        # d/dt [x; 1] = [[A, B u0], [0, 0]] [x; 1]
        M = np.zeros((5, 5), dtype=complex)
        M[:4, :4] = s.A
        M[:4, 4] = s.B @ u0
        for t, x in list(zip(u.nodes, X))[::16]:
            ref = (scipy.linalg.expm(t * M) @ np.append(x0, 1.0))[:4]
            assert np.linalg.norm(x - ref) <= 1e-9 * np.linalg.norm(ref)


class TestMinNorm:
    def test_scalar_closed_form(self):
        prob = SteeringProblem(SCALAR, [0.0], [1.0], T=2.0)
        res = min_norm_control(prob)
        np.testing.assert_allclose(res.control.samples, 0.5, atol=1e-9)
        assert res.multiplier[0] == pytest.approx(0.5)
        assert res.residual < 1e-9
        assert res.energy == pytest.approx(0.5, rel=1e-12)
        assert verify_steering(prob, res)
        assert not verify_steering(prob, res.control.scaled(2.0))

    def test_already_on_target(self):
        s = steering_system(3)
        x0 = np.arange(4.0)
        prob = SteeringProblem(s, x0, np.zeros(2))
        prob = SteeringProblem(s, x0, prob.free_output())
        res = min_norm_control(prob)
        assert np.max(np.abs(res.control.samples)) < 1e-10
        assert res.residual < 1e-10
        assert verify_steering(prob, zero_control(1.0, s.m))

    def test_refusal(self):
        s = LtiSystem(np.zeros((2, 2)), [[1.0], [1.0]], np.eye(2))
        with pytest.raises(NotOutputControllable) as info:
            min_norm_control(SteeringProblem(s, np.zeros(2), [1.0, 0.0]))
        assert info.value.verdict.witness == 0

    def test_target_unreachable(self):
        # Hautus test passes, but the reachable outputs form a line.
        s = LtiSystem(np.diag([0.0, 1.0, 2.0]), [[1.0], [0.0], [0.0]], [[1, 0, 0], [0, 1, 1]])
        with pytest.raises(TargetUnreachable) as info:
            min_norm_control(SteeringProblem(s, np.zeros(3), [0.0, 1.0]))
        assert info.value.residual > 0

    def test_dimension_errors(self):
        with pytest.raises(DimensionError):
            SteeringProblem(SCALAR, [0.0], [1.0, 2.0])
        with pytest.raises(DimensionError):
            SteeringProblem(SCALAR, [0.0, 1.0], [1.0])
        with pytest.raises(DomainError):
            SteeringProblem(SCALAR, [0.0], [1.0], T=0.0)

    @pytest.mark.parametrize("seed", range(10))
    def test_linearity(self, seed):
        rng = np.random.default_rng(seed)
        s = steering_system(seed)
        y1, y2 = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
        a, b = 1.5 - 0.5j, -2.0
        u1 = min_norm_control(SteeringProblem(s, np.zeros(4), y1)).control.samples
        u2 = min_norm_control(SteeringProblem(s, np.zeros(4), y2)).control.samples
        u = min_norm_control(SteeringProblem(s, np.zeros(4), a * y1 + b * y2)).control.samples
        expected = a * u1 + b * u2
        assert np.linalg.norm(u - expected) <= 1e-8 * np.linalg.norm(expected)

    @pytest.mark.parametrize("seed", range(5))
    def test_minimum_norm(self, seed):
        rng = np.random.default_rng(100 + seed)
        s = steering_system(seed)
        grid = 33
        prob = SteeringProblem(s, rng.standard_normal(4), rng.standard_normal(2))
        res = min_norm_control(prob, grid=grid)
        nodes = grid_nodes(1.0, grid)
        w = grid_weights(1.0, grid)
        # discrete map from node samples to y(T)
        L = np.hstack([w[k] * s.C @ scipy.linalg.expm((1.0 - t) * s.A) @ s.B for k, t in enumerate(nodes)])
        null = scipy.linalg.null_space(L)
        for _ in range(10):
            coeff = rng.standard_normal(null.shape[1]) + 1j * rng.standard_normal(null.shape[1])
            du = (null @ coeff).reshape(grid, s.m) * rng.uniform(0.01, 10)
            pert = ControlSignal(1.0, nodes, res.control.samples + du)
            _, Y = simulate(s, pert, prob.x0)
            assert np.linalg.norm(Y[-1] - prob.y_target) < 1e-8
            assert pert.energy() >= res.energy - 1e-8

    def test_grid_convergence(self):
        s = clip_norm(random_system(3, 2, 2, 9, "forced_output_controllable"), 2.0)
        prob = SteeringProblem(s, np.ones(3), np.array([1.0, -1.0]), T=3.0)
        res = [min_norm_control(prob, grid=g).residual for g in (5, 9, 17)]
        orders = np.log2(np.array(res[:-1]) / np.array(res[1:]))
        assert np.all(orders >= 4), (res, orders)

    def test_verify_rejects_wrong_horizon(self):
        prob = SteeringProblem(SCALAR, [0.0], [1.0], T=2.0)
        assert not verify_steering(prob, constant_control(1.0, [1.0]))

    def test_random_steering(self):
        rng = np.random.default_rng(5)
        for seed in range(30):
            n = int(rng.integers(1, 6))
            s = steering_system(seed, n=n, m=3, p=int(rng.integers(1, min(n, 2) + 1)))
            prob = SteeringProblem(s, rng.standard_normal(s.n), rng.standard_normal(s.p))
            res = min_norm_control(prob)
            assert verify_steering(prob, res, rtol=1e-6)
