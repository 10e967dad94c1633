"""Closed-loop unicycle simulation with bearing-only EIF localization.

The vehicle drives each edge at constant speed under proportional heading
control, stops at every waypoint and turns in place toward the next one.
Placed landmarks inside the camera's field of view produce noisy relative
bearings which an Extended Information Filter fuses every step.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Sequence, TextIO

import numpy as np

from .errors import NonconvergentFilter, SingularInformation, UnknownSite
from .geometry import CameraSpec, CandidateSite, PathPlan, Point2, visible_sites, wrap_angle
from .planner import Placement

# the filter never trusts a bearing more than this, even from a noiseless sensor
MIN_FILTER_BEARING_STD = 1e-3

TRACE_COLUMNS = (
    "t", "x_true", "y_true", "psi_true", "x_est", "y_est", "psi_est",
    "p_xx", "p_yy", "p_psipsi", "err_x", "err_y", "err_psi", "n_visible", "n_meas",
)


@dataclass(frozen=True)
class RobotState:
    x: float
    y: float
    psi: float

    def __post_init__(self):
        object.__setattr__(self, "psi", wrap_angle(self.psi))

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.psi])


def _default_p0():
    return ((0.05 ** 2, 0.0, 0.0), (0.0, 0.05 ** 2, 0.0), (0.0, 0.0, math.radians(2.0) ** 2))


@dataclass(frozen=True)
class SimConfig:
    """Simulation and filter settings.

    Process noise stds are per sqrt(second) on (x, y, psi); the per-step
    variance is ``std**2 * dt``.  ``measurement_blackout`` is an optional
    ``(t_start, t_end)`` window during which bearings are measured but not
    fused.
    """

    speed: float = 0.2
    dt: float = 0.05
    heading_gain: float = 3.0
    process_noise_std: tuple[float, float, float] = (0.01, 0.01, 0.005)
    bearing_noise_std: float = math.radians(1.0)
    initial_covariance: tuple[tuple[float, ...], ...] = field(default_factory=_default_p0)
    rng_seed: int = 0
    waypoint_capture_radius: float = 0.02
    turn_tolerance: float = math.radians(1.0)
    perturb_initial: bool = True
    measurement_blackout: Optional[tuple[float, float]] = None

    def __post_init__(self):
        object.__setattr__(self, "process_noise_std", tuple(float(v) for v in self.process_noise_std))
        object.__setattr__(self, "initial_covariance",
                           tuple(tuple(float(v) for v in row) for row in self.initial_covariance))
        if not (self.speed > 0 and self.dt > 0):
            raise ValueError("speed and dt must be positive")
        if self.heading_gain <= 0 or self.waypoint_capture_radius <= 0:
            raise ValueError("heading gain and capture radius must be positive")
        if len(self.process_noise_std) != 3 or min(self.process_noise_std) < 0 or self.bearing_noise_std < 0:
            raise ValueError("noise standard deviations must be three non-negative values")
        p0 = self.p0
        if p0.shape != (3, 3) or not np.allclose(p0, p0.T):
            raise ValueError("initial covariance must be a symmetric 3x3 matrix")
        try:
            np.linalg.cholesky(p0)
        except np.linalg.LinAlgError:
            raise ValueError("initial covariance must be positive definite") from None

    @property
    def p0(self) -> np.ndarray:
        return np.array(self.initial_covariance, dtype=float)

    @property
    def process_cov(self) -> np.ndarray:
        return np.diag(np.square(self.process_noise_std) * self.dt)


@dataclass
class InfoState:
    """Information-form Gaussian: ``matrix`` = P^-1, ``vector`` = P^-1 mu."""

    matrix: np.ndarray
    vector: np.ndarray

    @classmethod
    def from_moments(cls, mean, cov) -> InfoState:
        try:
            omega = np.linalg.inv(np.asarray(cov, dtype=float))
        except np.linalg.LinAlgError as exc:
            raise SingularInformation("covariance is singular") from exc
        omega = 0.5 * (omega + omega.T)
        return cls(omega, omega @ np.asarray(mean, dtype=float))

    def moments(self) -> tuple[np.ndarray, np.ndarray]:
        try:
            cov = np.linalg.inv(self.matrix)
        except np.linalg.LinAlgError as exc:
            raise SingularInformation("information matrix is singular") from exc
        cov = 0.5 * (cov + cov.T)
        mean = np.linalg.solve(self.matrix, self.vector)
        return mean, cov

    def mean(self) -> np.ndarray:
        return self.moments()[0]


def motion_model(state: np.ndarray, v: float, omega: float, dt: float) -> np.ndarray:
    x, y, psi = state
    return np.array([x + v * math.cos(psi) * dt, y + v * math.sin(psi) * dt, wrap_angle(psi + omega * dt)])


def motion_jacobian(state: np.ndarray, v: float, dt: float) -> np.ndarray:
    psi = state[2]
    return np.array([
        [1.0, 0.0, -v * math.sin(psi) * dt],
        [0.0, 1.0, v * math.cos(psi) * dt],
        [0.0, 0.0, 1.0],
    ])


def predicted_bearing(state: np.ndarray, site: Point2) -> float:
    return wrap_angle(math.atan2(site.y - state[1], site.x - state[0]) - state[2])


def bearing_jacobian(state: np.ndarray, site: Point2) -> np.ndarray:
    dx, dy = site.x - state[0], site.y - state[1]
    r2 = dx * dx + dy * dy
    return np.array([dy / r2, -dx / r2, -1.0])


def bearing_measurement(true_state: RobotState, site: Point2, noise_std: float, rng: np.random.Generator) -> float:
    """Relative bearing to ``site`` from the true pose, with Gaussian noise."""
    clean = math.atan2(site.y - true_state.y, site.x - true_state.x) - true_state.psi
    return wrap_angle(wrap_angle(clean) + rng.normal(0.0, noise_std))


def eif_predict(info: InfoState, control: tuple[float, float], dt: float, process_noise: np.ndarray) -> InfoState:
    v, omega = control
    mean, cov = info.moments()
    F = motion_jacobian(mean, v, dt)
    mean = motion_model(mean, v, omega, dt)
    cov = F @ cov @ F.T + process_noise
    return InfoState.from_moments(mean, 0.5 * (cov + cov.T))


def eif_update(info: InfoState, measurements: Sequence[float], sites: Sequence[Point2], noise_std: float) -> InfoState:
    """Fuse simultaneous bearings by adding their information contributions."""
    if len(measurements) == 0:
        return info
    if len(measurements) != len(sites):
        raise ValueError("one site per measurement required")
    r_inv = 1.0 / max(noise_std, MIN_FILTER_BEARING_STD) ** 2
    mean = info.mean()
    omega = info.matrix.copy()
    xi = info.vector.copy()
    for z, site in zip(measurements, sites):
        H = bearing_jacobian(mean, site)
        innovation = wrap_angle(z - predicted_bearing(mean, site))
        omega += r_inv * np.outer(H, H)
        xi += r_inv * H * (innovation + H @ mean)
    omega = 0.5 * (omega + omega.T)
    try:
        new_mean = np.linalg.solve(omega, xi)
    except np.linalg.LinAlgError as exc:
        raise SingularInformation("information matrix is singular after update") from exc
    new_mean[2] = wrap_angle(new_mean[2])
    return InfoState(omega, omega @ new_mean)


@dataclass
class SimTrace:
    time: np.ndarray        # (N,)
    true: np.ndarray        # (N, 3)
    estimate: np.ndarray    # (N, 3)
    cov_diag: np.ndarray    # (N, 3)
    n_visible: np.ndarray   # (N,)
    n_meas: np.ndarray      # (N,)

    def __len__(self) -> int:
        return len(self.time)

    @property
    def error(self) -> np.ndarray:
        err = self.estimate - self.true
        err[:, 2] = wrap_angle(err[:, 2])
        return err

    @property
    def sigma3(self) -> np.ndarray:
        return 3.0 * np.sqrt(self.cov_diag)

    def rows(self) -> Iterable[tuple]:
        err = self.error
        for i in range(len(self)):
            yield (self.time[i], *self.true[i], *self.estimate[i], *self.cov_diag[i], *err[i],
                   int(self.n_visible[i]), int(self.n_meas[i]))


def write_trace_csv(trace: SimTrace, fh: TextIO) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(TRACE_COLUMNS)
    for row in trace.rows():
        writer.writerow([f"{v:.9g}" if isinstance(v, float) else str(v) for v in map(_py, row)])


def read_trace_csv(fh: TextIO) -> SimTrace:
    reader = csv.reader(fh)
    header = next(reader)
    if tuple(header) != TRACE_COLUMNS:
        raise ValueError(f"unexpected trace header {header}")
    data = np.array([[float(v) for v in row] for row in reader if row], dtype=float).reshape(-1, len(TRACE_COLUMNS))
    return SimTrace(
        time=data[:, 0], true=data[:, 1:4], estimate=data[:, 4:7], cov_diag=data[:, 7:10],
        n_visible=data[:, 13].astype(int), n_meas=data[:, 14].astype(int),
    )


def _py(v):
    return v.item() if isinstance(v, np.generic) else v


def _resolve_landmarks(placement: Placement, sites: Sequence[CandidateSite]) -> list[Point2]:
    lookup = {s.id: s.position for s in sites}
    missing = [sid for sid in placement.sites if sid not in lookup]
    if missing:
        raise UnknownSite(f"placement references unknown site ids {missing}")
    return [lookup[sid] for sid in placement.sites]


def simulate(path: PathPlan, placement: Placement, sites: Sequence[CandidateSite],
             cam: CameraSpec, cfg: SimConfig) -> SimTrace:
    """Drive the path once and return the full truth/estimate trace.

    The result depends only on the inputs and ``cfg.rng_seed``.
    """
    rng = np.random.default_rng(cfg.rng_seed)
    landmarks = _resolve_landmarks(placement, sites)
    lm_x = np.array([p.x for p in landmarks])
    lm_y = np.array([p.y for p in landmarks])
    wps = path.waypoints
    Q = cfg.process_cov
    q_std = np.sqrt(np.diag(Q))

    first = wps[1]
    true = np.array([wps[0].x, wps[0].y, math.atan2(first.y - wps[0].y, first.x - wps[0].x)])
    p0 = cfg.p0
    mean0 = true.copy()
    if cfg.perturb_initial:
        mean0 = mean0 + np.linalg.cholesky(p0) @ rng.standard_normal(3)
        mean0[2] = wrap_angle(mean0[2])
    info = InfoState.from_moments(mean0, p0)

    length = sum(a.distance_to(b) for a, b in zip(wps, wps[1:]))
    max_steps = int(math.ceil((3.0 * length / cfg.speed + 20.0 * len(wps)) / cfg.dt))

    times, trues, ests, covs, nvis, nmeas = [0.0], [true.copy()], [mean0.copy()], [np.diag(p0).copy()], [0], [0]
    target, turning, step = 1, False, 0
    while target < len(wps) and step < max_steps:
        goal = wps[target]
        heading_err = wrap_angle(math.atan2(goal.y - true[1], goal.x - true[0]) - true[2])
        if turning and abs(heading_err) <= cfg.turn_tolerance:
            turning = False
        v = 0.0 if turning else cfg.speed
        omega = cfg.heading_gain * heading_err

        true = motion_model(true, v, omega, cfg.dt)
        true = true + q_std * rng.standard_normal(3)
        true[2] = wrap_angle(true[2])
        step += 1
        t = step * cfg.dt

        state = RobotState(*true)
        seen = np.flatnonzero(visible_sites(Point2(true[0], true[1]), true[2], lm_x, lm_y, cam))
        z = [bearing_measurement(state, landmarks[k], cfg.bearing_noise_std, rng) for k in seen]
        blackout = cfg.measurement_blackout
        if blackout is not None and blackout[0] <= t < blackout[1]:
            z = []

        try:
            info = eif_predict(info, (v, omega), cfg.dt, Q)
            info = eif_update(info, z, [landmarks[k] for k in seen[:len(z)]], cfg.bearing_noise_std)
            np.linalg.cholesky(info.matrix)
            mean, cov = info.moments()
        except (SingularInformation, np.linalg.LinAlgError) as exc:
            raise NonconvergentFilter(step, str(exc)) from exc

        times.append(t)
        trues.append(true.copy())
        ests.append(mean)
        covs.append(np.diag(cov).copy())
        nvis.append(len(seen))
        nmeas.append(len(z))

        if not turning and math.hypot(goal.x - true[0], goal.y - true[1]) <= cfg.waypoint_capture_radius:
            target += 1
            turning = True

    return SimTrace(
        time=np.array(times), true=np.array(trues), estimate=np.array(ests),
        cov_diag=np.array(covs), n_visible=np.array(nvis), n_meas=np.array(nmeas),
    )


@dataclass(frozen=True)
class AxisStats:
    containment: float
    max_error: float
    max_sigma: float


def three_sigma_report(trace: SimTrace) -> dict[str, AxisStats]:
    """Per-axis share of steps whose error lies inside the 3-sigma bound."""
    if len(trace) == 0:
        raise ValueError("empty trace")
    err = np.abs(trace.error)
    bound = trace.sigma3
    sigma = np.sqrt(trace.cov_diag)
    return {
        axis: AxisStats(
            containment=float(np.mean(err[:, k] <= bound[:, k])),
            max_error=float(err[:, k].max()),
            max_sigma=float(sigma[:, k].max()),
        )
        for k, axis in enumerate(("x", "y", "psi"))
    }


def monte_carlo(path: PathPlan, placement: Placement, sites: Sequence[CandidateSite], cam: CameraSpec,
                cfg: SimConfig, seeds: Iterable[int]) -> dict[int, dict[str, AxisStats]]:
    """3-sigma reports keyed by seed; each run is independent of the others."""
    return {
        seed: three_sigma_report(simulate(path, placement, sites, cam, replace(cfg, rng_seed=seed)))
        for seed in seeds
    }
