import io
import math
from dataclasses import replace

import numpy as np
import pytest

import waymark.simulator as simmod
from ekf_reference import ekf_step
from waymark.errors import NonconvergentFilter
from waymark.geometry import CameraSpec, Point2
from waymark.instances import generate_instance
from waymark.planner import plan_placement
from waymark.simulator import (
    InfoState,
    RobotState,
    SimConfig,
    SimTrace,
    bearing_measurement,
    eif_predict,
    eif_update,
    read_trace_csv,
    simulate,
    three_sigma_report,
    write_trace_csv,
)

NOISELESS = dict(process_noise_std=(0.0, 0.0, 0.0), bearing_noise_std=0.0, perturb_initial=False)


@pytest.fixture(scope="module")
def scenario():
    inst, _, reason = generate_instance(3, n_targets=6, retry=40)
    assert reason is None
    placement = plan_placement(inst.path, inst.candidate_sites, inst.camera)
    return inst, placement


def run(scenario, **cfg):
    inst, placement = scenario
    return simulate(inst.path, placement, inst.candidate_sites, inst.camera, SimConfig(**cfg))


def random_spd(rng):
    A = rng.normal(size=(3, 3)) * np.array([0.1, 0.1, 0.05])
    return A @ A.T + np.diag([1e-3, 1e-3, 1e-4])


class TestBearing:
    def test_dead_ahead(self):
        assert bearing_measurement(RobotState(0, 0, 0), Point2(1, 0), 0.0, np.random.default_rng(0)) == 0.0

    def test_left(self):
        z = bearing_measurement(RobotState(0, 0, 0), Point2(0, 1), 0.0, np.random.default_rng(0))
        assert z == pytest.approx(math.pi / 2)

    def test_rotated_pose(self):
        # bearing pi/4 to the site, minus heading pi/4
        z = bearing_measurement(RobotState(1, 1, math.pi / 4), Point2(2, 2), 0.0, np.random.default_rng(0))
        assert z == pytest.approx(0.0, abs=1e-15)

    def test_wrapped_with_noise(self):
        rng = np.random.default_rng(1)
        zs = [bearing_measurement(RobotState(0, 0, 0), Point2(-1, 1e-9), 0.5, rng) for _ in range(200)]
        assert all(-math.pi < z <= math.pi for z in zs)

    def test_state_heading_is_wrapped(self):
        assert RobotState(0, 0, 3 * math.pi).psi == pytest.approx(math.pi)


class TestInformationFilter:
    def test_update_without_measurements(self):
        info = InfoState.from_moments([1.0, 2.0, 0.3], np.diag([0.1, 0.2, 0.05]))
        out = eif_update(info, [], [], 0.01)
        assert np.array_equal(out.matrix, info.matrix) and np.array_equal(out.vector, info.vector)

    def test_predict_standing_still(self):
        info = InfoState.from_moments([1.0, 2.0, 0.3], np.diag([0.1, 0.2, 0.05]))
        out = eif_predict(info, (0.0, 0.0), 0.05, np.zeros((3, 3)))
        np.testing.assert_allclose(out.matrix, info.matrix, rtol=1e-12)
        np.testing.assert_allclose(out.vector, info.vector, rtol=1e-12)

    def test_matches_moment_form_ekf(self):
        rng = np.random.default_rng(42)
        for _ in range(100):
            mean = np.array([*rng.uniform(0, 4, 2), rng.uniform(-math.pi, math.pi)])
            cov = random_spd(rng)
            v, omega, dt = rng.uniform(0, 0.5), rng.uniform(-2, 2), 0.05
            Q = np.diag(rng.uniform(0, 1e-4, 3))
            sites = [Point2(*rng.uniform(-2, 6, 2)) for _ in range(int(rng.integers(0, 5)))]
            zs = list(rng.uniform(-math.pi, math.pi, len(sites)))
            std = rng.uniform(0.005, 0.1)

            info = eif_update(eif_predict(InfoState.from_moments(mean, cov), (v, omega), dt, Q), zs, sites, std)
            got_mean, got_cov = info.moments()
            ref_mean, ref_cov = ekf_step(mean, cov, v, omega, dt, Q, zs, [(s.x, s.y) for s in sites], std)
            diff = got_mean - ref_mean
            diff[2] = (diff[2] + math.pi) % (2 * math.pi) - math.pi
            assert np.max(np.abs(diff)) <= 1e-9
            assert np.linalg.norm(got_cov - ref_cov) <= 1e-9

    def test_update_is_order_independent(self):
        rng = np.random.default_rng(8)
        info = InfoState.from_moments([1.0, 1.0, 0.2], random_spd(rng))
        sites = [Point2(3, 1), Point2(2.5, 2), Point2(3, -0.5)]
        zs = [0.1, 0.4, -0.3]
        a = eif_update(info, zs, sites, 0.02)
        b = eif_update(info, zs[::-1], sites[::-1], 0.02)
        np.testing.assert_allclose(a.matrix, b.matrix, rtol=1e-12)
        np.testing.assert_allclose(a.mean(), b.mean(), atol=1e-12)


class TestSimulate:
    def test_noiseless_tracks_exactly(self, scenario):
        trace = run(scenario, **NOISELESS)
        assert np.abs(trace.error).max() <= 1e-6

    def test_reaches_final_waypoint(self, scenario):
        inst, _ = scenario
        trace = run(scenario, rng_seed=2)
        end = inst.targets[-1]
        assert math.hypot(trace.true[-1, 0] - end.x, trace.true[-1, 1] - end.y) <= 0.02

    def test_deterministic(self, scenario):
        a, b = run(scenario, rng_seed=9), run(scenario, rng_seed=9)
        for field in ("time", "true", "estimate", "cov_diag", "n_visible", "n_meas"):
            assert np.array_equal(getattr(a, field), getattr(b, field))
        fa, fb = io.StringIO(), io.StringIO()
        write_trace_csv(a, fa)
        write_trace_csv(b, fb)
        assert fa.getvalue() == fb.getvalue()
        assert not np.array_equal(run(scenario, rng_seed=10).true, a.true)

    def test_record_count_and_bounds(self, scenario):
        trace = run(scenario, rng_seed=1)
        cfg = SimConfig()
        assert len(trace) == math.floor(trace.time[-1] / cfg.dt + 1e-9) + 1
        np.testing.assert_array_equal(trace.sigma3, 3 * np.sqrt(trace.cov_diag))
        assert np.all(trace.cov_diag > 0)

    def test_angles_stay_wrapped(self, scenario):
        trace = run(scenario, rng_seed=4)
        for col in (trace.true[:, 2], trace.estimate[:, 2], trace.error[:, 2]):
            assert np.all(col > -math.pi) and np.all(col <= math.pi)

    def test_edges_see_two_landmarks(self, scenario):
        trace = run(scenario, **NOISELESS)
        driving = np.linalg.norm(np.diff(trace.true[:, :2], axis=0), axis=1) > 1e-6
        assert np.all(trace.n_visible[1:][driving] >= 2)
        assert np.array_equal(trace.n_visible, trace.n_meas)

    def test_blackout_grows_then_shrinks_uncertainty(self, scenario):
        trace = run(scenario, rng_seed=5, measurement_blackout=(5.0, 10.0))
        pos = trace.cov_diag[:, 0] + trace.cov_diag[:, 1]
        dark = (trace.time >= 5.0) & (trace.time < 10.0)
        assert np.all(trace.n_meas[dark] == 0)
        assert np.all(np.diff(pos[dark]) >= 0)
        after = np.flatnonzero(trace.time >= 10.0)[:10]
        assert trace.n_visible[after[0]] >= 2
        assert pos[after].min() < pos[after[0] - 1]

    def test_nonconvergence_reported(self, scenario, monkeypatch):
        def broken(info, zs, sites, std):
            return InfoState(-np.eye(3), np.zeros(3))
        monkeypatch.setattr(simmod, "eif_update", broken)
        with pytest.raises(NonconvergentFilter) as err:
            run(scenario)
        assert err.value.step == 1

    def test_config_validation(self):
        with pytest.raises(ValueError):
            SimConfig(speed=0)
        with pytest.raises(ValueError):
            SimConfig(initial_covariance=((1, 0, 0), (0, -1, 0), (0, 0, 1)))
        with pytest.raises(ValueError):
            SimConfig(process_noise_std=(0.1, -0.1, 0.0))


class TestThreeSigma:
    def test_noiseless_full_containment(self, scenario):
        report = three_sigma_report(run(scenario, **NOISELESS))
        assert all(s.containment == 1.0 for s in report.values())

    def test_zero_covariance(self):
        n = 5
        trace = SimTrace(np.arange(n) * 0.1, np.zeros((n, 3)), np.full((n, 3), 0.01),
                         np.zeros((n, 3)), np.zeros(n, int), np.zeros(n, int))
        report = three_sigma_report(trace)
        assert all(s.containment == 0.0 for s in report.values())
        assert report["x"].max_error == pytest.approx(0.01)

    def test_default_noise_mostly_contained(self, scenario):
        report = three_sigma_report(run(scenario, rng_seed=0))
        assert all(s.containment >= 0.95 for s in report.values())


def test_csv_round_trip(scenario):
    trace = run(scenario, rng_seed=3)
    buf = io.StringIO()
    write_trace_csv(trace, buf)
    text = buf.getvalue()
    assert text.splitlines()[0] == "t,x_true,y_true,psi_true,x_est,y_est,psi_est,p_xx,p_yy,p_psipsi,err_x,err_y,err_psi,n_visible,n_meas"
    back = read_trace_csv(io.StringIO(text))
    assert len(back) == len(trace)
    np.testing.assert_allclose(back.true, trace.true, rtol=1e-8, atol=1e-12)
    np.testing.assert_array_equal(back.n_meas, trace.n_meas)


def test_circular_camera_simulation(scenario):
    inst, _ = scenario
    omni = replace(inst.camera, circular=True)
    placement = plan_placement(inst.path, inst.candidate_sites, omni)
    trace = simulate(inst.path, placement, inst.candidate_sites, omni, SimConfig(rng_seed=1))
    assert all(s.containment >= 0.9 for s in three_sigma_report(trace).values())
