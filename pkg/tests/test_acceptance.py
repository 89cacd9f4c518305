"""End-to-end properties of the interval observer on the worked example and
on randomized scenarios."""

import time

import numpy as np
import pytest

import minerr as me
from minerr.metrics import (
    framer_violation,
    lyapunov_trace,
    decay_rate_check,
    ultimate_bound_check,
    dominance_margins,
    intersection_frames,
)
from minerr.sim import rk4_step
from minerr.io import write_trajectory_csv, read_trajectory_csv

from conftest import SCENARIOS, A_EXAMPLE, C_EXAMPLE, G1, G2, G3


def signed_monomial(rng, n):
    """Row signs times a permutation times a positive diagonal. Mixed row
    signs flip the sign of the couplings between differently signed rows."""
    P = np.eye(n)[rng.permutation(n)]
    signs = rng.choice([-1.0, 1.0], size=n)
    return np.diag(signs) @ P @ np.diag(rng.uniform(0.5, 2.0, size=n)), signs


class TestHypotheses:
    def test_all_six_matrices(self, example):
        report = me.validate_gains(example.plant, example.gains)
        assert report.passed and report.proven
        assert report.violations() == []
        for family in ("upper", "lower"):
            for k in (1, 2, 3):
                assert report.certificates[(family, k)]

    @pytest.mark.parametrize("G, row_sums", [(G1, [-1.5, -0.2, -3.3]), (G2, [-1.5, -0.2, -2.5])])
    def test_unit_witness(self, G, row_sums):
        M = A_EXAMPLE + G @ C_EXAMPLE
        np.testing.assert_allclose(M @ np.ones(3), row_sums, atol=1e-15)
        epsilon = -np.max(M @ np.ones(3))
        assert epsilon == pytest.approx(0.2)
        assert me.Certificate(1, np.ones(3), epsilon).certifies(M)

    def test_canonical_third_certificate(self):
        cert = me.hurwitz_metzler_certificate(A_EXAMPLE + G3 @ C_EXAMPLE, gain_index=3)
        np.testing.assert_allclose(cert.v, [1.0, 2.36, 0.45], rtol=1e-12)
        assert cert.epsilon == pytest.approx(1 / 2.36)

    def test_runtime(self, example):
        elapsed = []
        for _ in range(3):
            start = time.perf_counter()
            me.validate_gains(example.plant, example.gains)
            elapsed.append(time.perf_counter() - start)
        assert min(elapsed) < 0.1


class TestWorkedExample:
    @pytest.fixture(scope="class")
    def full_run(self):
        scenario = me.load_scenario(SCENARIOS / "paper_example.json")
        return scenario, me.simulate(scenario)

    def test_framer(self, full_run):
        scenario, traj = full_run
        assert isinstance(traj.status, me.Completed)
        assert traj.times[-1] == pytest.approx(20.0)
        assert framer_violation(traj) <= 1e-6

    def test_error_oracle(self, full_run):
        scenario, traj = full_run
        errors = me.simulate_error_oracle(scenario)
        ebar, elower = traj.errors()
        assert np.max(np.abs(ebar - errors.ebar)) <= 1e-6
        assert np.max(np.abs(elower - errors.elower)) <= 1e-6

    def test_step_halving(self, full_run):
        scenario, coarse = full_run
        fine = me.simulate(scenario.with_sim(dt=scenario.sim.dt / 2, record_stride=2 * scenario.sim.record_stride))
        np.testing.assert_allclose(fine.times, coarse.times, atol=1e-12)
        for field in ("x", "xbar", "xlower"):
            assert np.max(np.abs(getattr(fine, field) - getattr(coarse, field))) <= 1e-6

    def test_csv_round_trip(self, full_run, tmp_path):
        _, traj = full_run
        path = tmp_path / "trajectory.csv"
        write_trajectory_csv(traj, path)
        back = read_trajectory_csv(path)
        for field in ("times", "x", "xbar", "xlower"):
            np.testing.assert_allclose(getattr(back, field), getattr(traj, field), rtol=1e-11)


class TestConvergence:
    def test_undisturbed_decay(self, zero_disturbance):
        scenario = zero_disturbance.with_sim(dt=5e-3, t_end=60.0)
        report = me.check_gains(scenario)
        traj = me.simulate(scenario, validate=False)

        pair = report.certificate_pair()
        for side in ("upper", "lower"):
            cert = getattr(pair, side)
            assert decay_rate_check(traj, cert, side, rtol=1e-6).passed
            weaker = me.Certificate(cert.gain_index, cert.v, cert.epsilon / 2)
            assert decay_rate_check(traj, weaker, side, rtol=1e-6).passed

        assert traj.times[-1] == pytest.approx(60.0)
        assert np.max(np.abs(traj.xbar[-1] - traj.x[-1])) <= 1e-4
        assert np.max(np.abs(traj.x[-1] - traj.xlower[-1])) <= 1e-4

    def test_lyapunov_is_monotone(self, zero_disturbance):
        scenario = zero_disturbance.with_sim(dt=5e-3, t_end=10.0)
        cert = me.check_gains(scenario).best("upper")
        V = lyapunov_trace(me.simulate(scenario, validate=False), cert)
        assert np.all(np.diff(V) <= 1e-12)


class TestUltimateBound:
    @pytest.mark.parametrize("seed", range(50))
    def test_random_scenarios(self, seed, random_scenario):
        rng = np.random.default_rng(1000 + seed)
        scenario = random_scenario(rng, phi=int(rng.integers(1, 4)), zero_start=True)
        report = me.check_gains(scenario)
        pair = report.certificate_pair()
        horizon = 20 * scenario.n / min(pair.upper.epsilon, pair.lower.epsilon)

        scenario = scenario.with_sim(dt=2e-2, t_end=horizon)
        traj = me.simulate(scenario, validate=False)
        assert isinstance(traj.status, me.Completed)

        for side in ("upper", "lower"):
            check = ultimate_bound_check(traj, getattr(pair, side), scenario.envelope, side, rtol=1e-3)
            assert check.passed, (side, check)


class TestDominance:
    @staticmethod
    def compare(scenario, force_sequential=True):
        singles = [
            scenario.with_gains(scenario.gains.single(k), name="single{}".format(k))
            for k in range(1, scenario.gains.phi + 1)
        ]
        trajectories = me.simulate_batch([scenario] + singles, validate=False, force_sequential=force_sequential)
        return trajectories[0], trajectories[1:]

    def test_worked_example(self, example):
        multi, singles = self.compare(example.with_sim(dt=2e-3, record_stride=5))
        assert min(dominance_margins(multi, singles)) >= -1e-6

        xbar_cap, xlower_cap = intersection_frames(singles)
        assert np.min(xbar_cap - multi.xbar) >= -1e-6
        assert np.min(multi.xlower - xlower_cap) >= -1e-6

    @pytest.mark.parametrize("seed", range(20))
    def test_random_scenarios(self, seed, random_scenario):
        rng = np.random.default_rng(2000 + seed)
        scenario = random_scenario(rng, phi=int(rng.integers(2, 5)), t_end=5.0, dt=5e-3)
        multi, singles = self.compare(scenario)
        assert min(dominance_margins(multi, singles)) >= -1e-6
        assert framer_violation(multi) <= 1e-6


class TestCoordinateChange:
    @pytest.mark.parametrize("seed", range(20))
    def test_random_transforms(self, seed, example):
        rng = np.random.default_rng(3000 + seed)
        base = example.with_sim(dt=1e-2, t_end=10.0)

        # draws whose transformed gains are not Metzler are skipped.
        skipped = 0
        while True:
            R, signs = signed_monomial(rng, 3)
            scenario = base.with_transform(R)
            try:
                report = me.check_gains(scenario)
            except me.ValidationFailure:
                # the couplings of A + G1 C connect all states, so mixed signs break it.
                assert len(set(signs)) == 2
                skipped += 1
                assert skipped < 50
                continue
            break

        assert len(set(signs)) == 1
        assert report.passed

        traj = me.simulate(scenario, validate=False)
        assert isinstance(traj.status, me.Completed)
        assert framer_violation(traj) <= 1e-5

    def test_identity_is_bitwise(self, example):
        scenario = example.with_sim(dt=1e-2, t_end=10.0)
        plain = me.simulate(scenario)
        identity = me.simulate(scenario.with_transform(np.eye(3)))
        for field in ("x", "xbar", "xlower", "upper_idx", "lower_idx"):
            np.testing.assert_array_equal(getattr(identity, field), getattr(plain, field))


def classic_interval_observer(scenario, L):
    """A single-gain interval observer written out directly, stepped with
    the same RK4 scheme and recording grid as Simulation."""

    plant, envelope = scenario.plant, scenario.envelope
    n, dt, stride = scenario.n, scenario.sim.dt, scenario.sim.record_stride

    def f(t, s):
        x, xb, xl = s[:n], s[n : 2 * n], s[2 * n :]
        u = plant.input(t)
        y = plant.output(x)
        A = plant.eval_A(y)
        beta = plant.eval_beta(t, y, u)

        dx = A @ x + beta + envelope.true(t)
        dxb = A @ xb + L @ (plant.C @ xb - y) + beta + envelope.upper(t)
        dxl = A @ xl + L @ (plant.C @ xl - y) + beta + envelope.lower(t)
        return np.concatenate([dx, dxb, dxl])

    s = np.concatenate([scenario.x0, scenario.xbar0, scenario.xlower0])
    samples = [s.copy()]
    for k in range(scenario.sim.steps):
        s = rk4_step(f, k * dt, s, dt)
        if (k + 1) % stride == 0:
            samples.append(s.copy())
    return np.array(samples)


class TestReduction:
    @pytest.mark.parametrize("k", [1, 2, 3])
    def test_single_gain_is_classic_observer(self, k, example):
        scenario = example.with_sim(dt=1e-2, t_end=5.0, record_stride=5)
        single = scenario.with_gains(scenario.gains.single(k))

        traj = me.simulate(single)
        expected = classic_interval_observer(single, scenario.gains.upper[k - 1])

        np.testing.assert_array_equal(traj.x, expected[:, :3])
        np.testing.assert_array_equal(traj.xbar, expected[:, 3:6])
        np.testing.assert_array_equal(traj.xlower, expected[:, 6:])
        assert np.all(traj.upper_idx == 1) and np.all(traj.lower_idx == 1)


class TestSignals:
    def test_worked_example_disturbance(self, example):
        for t in (0.0, 0.5, 3.0, 17.25):
            np.testing.assert_allclose(
                example.envelope.true(t), np.array([2 * np.cos(t), 4 * np.sin(t), -4 * np.cos(t)]) / (1 + t), rtol=1e-15, atol=1e-16
            )
            np.testing.assert_allclose(example.envelope.upper(t), np.array([2.0, 4.0, 4.0]) / (1 + t), rtol=1e-15)
            np.testing.assert_allclose(example.envelope.lower(t), -np.array([2.0, 4.0, 4.0]) / (1 + t), rtol=1e-15)
