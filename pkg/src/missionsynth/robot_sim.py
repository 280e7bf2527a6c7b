"""Deterministic simulation of a two-wheel robot seen by a ceiling camera.

Orientation follows the second-order plant ``K / (s (s + D))`` driven by a
saturated voltage, integrated with explicit Euler. Forward motion is open
loop at constant speed with a constant heading drift.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from typing import Sequence

import numpy as np
from scipy.optimize import minimize_scalar

__all__ = [
    "RobotState", "PlantParams", "ActuatorCmd", "Measurement", "Simulator",
    "IllConditioned", "wrap_angle", "step_dynamics", "control_orientation", "sense",
    "identify_plant", "MM_PER_PX",
]

MM_PER_PX = 400.0 / 60.0
TWO_PI = 2.0 * math.pi


def wrap_angle(a: float) -> float:
    """Map an angle into (-pi, pi]; in-range values are returned unchanged."""
    if -math.pi < a <= math.pi:
        return a
    w = (a + math.pi) % TWO_PI - math.pi
    return math.pi if w == -math.pi else w


@dataclass(frozen=True, slots=True)
class RobotState:
    x: float = 0.0
    y: float = 0.0
    theta: float = 0.0
    omega: float = 0.0
    alert: bool = False
    t: float = 0.0


@dataclass(frozen=True)
class PlantParams:
    K: float = 5.0          # rad / (s^2 V)
    D: float = 2.0          # 1 / s
    Kp: float = 3.12        # V / rad
    v_fwd: float = 150.0    # mm / s
    drift: float = 0.02     # rad / s while moving forward
    V_max: float = 6.0
    dt: float = 0.005

    # mission-file / CLI spelling of each field
    ALIASES = {"K": "K", "D": "D", "Kp": "Kp", "vfwd": "v_fwd", "drift": "drift",
               "Vmax": "V_max", "dt": "dt"}

    def __post_init__(self):
        if self.K <= 0 or self.D <= 0:
            raise ValueError("plant gain K and damping D must be positive")
        if not 0 < self.dt <= 0.01:
            raise ValueError("integration step dt must lie in (0, 0.01] s")
        if self.Kp <= 0 or self.V_max <= 0 or self.v_fwd < 0:
            raise ValueError("Kp and V_max must be positive, v_fwd non-negative")

    def with_overrides(self, overrides) -> "PlantParams":
        kw = {}
        for key, val in dict(overrides).items():
            name = self.ALIASES.get(key, key)
            if name not in {f.name for f in fields(self)}:
                raise ValueError(f"unknown plant parameter {key!r}")
            kw[name] = float(val)
        return replace(self, **kw)

    @property
    def damping_ratio(self) -> float:
        """Closed-loop damping ratio of ``s^2 + D s + Kp K`` (stable for any Kp > 0)."""
        return self.D / (2.0 * math.sqrt(self.Kp * self.K))


@dataclass(frozen=True, slots=True)
class ActuatorCmd:
    """Low-level command for one tick.

    With ``theta_ref`` set, the orientation loop computes the voltage from the
    measured heading; otherwise ``V`` is applied directly.
    """
    theta_ref: float | None = None
    forward: bool = False
    V: float = 0.0


@dataclass(frozen=True, slots=True)
class Measurement:
    x_px: int
    y_px: int
    theta: float

    @property
    def x_mm(self) -> float:
        return self.x_px * MM_PER_PX

    @property
    def y_mm(self) -> float:
        return self.y_px * MM_PER_PX


def control_orientation(theta_ref: float, theta: float, p: PlantParams) -> float:
    v = p.Kp * wrap_angle(theta_ref - theta)
    return max(-p.V_max, min(p.V_max, v))


def step_dynamics(s: RobotState, cmd: ActuatorCmd, p: PlantParams) -> RobotState:
    """One explicit-Euler step; ``cmd.V`` is the applied voltage."""
    dt = p.dt
    V = max(-p.V_max, min(p.V_max, cmd.V))
    omega = s.omega + dt * (-p.D * s.omega + p.K * V)
    theta = s.theta + dt * s.omega
    x, y = s.x, s.y
    if cmd.forward:
        x += p.v_fwd * math.cos(s.theta) * dt
        y += p.v_fwd * math.sin(s.theta) * dt
        theta += p.drift * dt
    return RobotState(x, y, wrap_angle(theta), omega, s.alert, s.t + dt)


def _round_px(v_mm: float) -> int:
    return int(math.floor(v_mm / MM_PER_PX + 0.5))


def sense(s: RobotState, rng: np.random.Generator | None = None,
          pos_noise_px: float = 0.0, theta_noise: float = 0.0) -> Measurement:
    """Camera reading: position rounded to the nearest pixel, heading as is.

    Noise is zero-mean Gaussian and only drawn when an ``rng`` is supplied
    and the corresponding standard deviation is positive.
    """
    x, y, th = s.x, s.y, s.theta
    if rng is not None:
        if pos_noise_px > 0:
            dx, dy = rng.normal(0.0, pos_noise_px * MM_PER_PX, 2)
            x, y = x + dx, y + dy
        if theta_noise > 0:
            th = wrap_angle(th + rng.normal(0.0, theta_noise))
    return Measurement(_round_px(x), _round_px(y), th)


class Simulator:
    """Owns the robot state; ``tick`` closes the orientation loop on the
    measured heading and advances one step."""

    def __init__(self, params: PlantParams | None = None, state: RobotState | None = None,
                 seed: int | None = 0, pos_noise_px: float = 0.0, theta_noise: float = 0.0):
        self.params = params or PlantParams()
        self._state = state or RobotState()
        self.rng = np.random.default_rng(seed)
        self.pos_noise_px = pos_noise_px
        self.theta_noise = theta_noise
        self.last_V = 0.0
        self._meas = self._sense()

    def _sense(self) -> Measurement:
        return sense(self._state, self.rng, self.pos_noise_px, self.theta_noise)

    @property
    def state(self) -> RobotState:
        return self._state

    @property
    def t(self) -> float:
        return self._state.t

    def measure(self) -> Measurement:
        return self._meas

    def set_alert(self, flag: bool) -> None:
        self._state = replace(self._state, alert=bool(flag))

    def tick(self, cmd: ActuatorCmd) -> RobotState:
        V = cmd.V if cmd.theta_ref is None else control_orientation(cmd.theta_ref, self._meas.theta,
                                                                    self.params)
        self.last_V = V
        self._state = step_dynamics(self._state, ActuatorCmd(None, cmd.forward, V), self.params)
        self._meas = self._sense()
        return self._state


# -- identification -----------------------------------------------------------------

class IllConditioned(ValueError):
    pass


def _shape(n: np.ndarray, D: float, dt: float) -> np.ndarray:
    """Euler step response of the plant per unit ``K V``: ``theta_n - theta_0``."""
    a = 1.0 - D * dt
    return (n * dt - (1.0 - a ** n) / D) / D


def identify_plant(response: Sequence[tuple[float, float]], V: float,
                   D_bounds: tuple[float, float] = (1e-3, 50.0)) -> tuple[float, float]:
    """Estimate ``(K, D)`` from an open-loop constant-voltage run started at rest.

    The discretised plant gives ``theta_n = theta_0 + K V g_D(n)`` with a known
    shape ``g_D``. For fixed ``D`` this is linear in ``(theta_0, K)``; ``D`` is
    found by a bounded scalar search over the linear least-squares residual.
    Samples must be uniformly spaced in time.
    """
    data = np.asarray(response, dtype=float)
    if data.ndim != 2 or data.shape[1] != 2 or len(data) < 4:
        raise IllConditioned("need at least four (t, theta) samples")
    t, theta = data[:, 0], np.unwrap(data[:, 1])
    steps = np.diff(t)
    dt = float(steps.mean())
    if dt <= 0 or not np.allclose(steps, dt, rtol=1e-6, atol=1e-12):
        raise IllConditioned("samples are not uniformly spaced")
    if V == 0 or np.ptp(theta) == 0:
        raise IllConditioned("constant response carries no information about K and D")
    n = np.round((t - t[0]) / dt)
    hi = min(D_bounds[1], 0.999 / dt)

    def solve(D):
        A = np.column_stack([np.ones_like(n), V * _shape(n, D, dt)])
        coef, res, rank, _ = np.linalg.lstsq(A, theta, rcond=None)
        return coef, A, rank

    def residual(D):
        coef, A, _ = solve(D)
        r = theta - A @ coef
        return float(r @ r)

    grid = np.geomspace(D_bounds[0], hi, 60)
    best = int(np.argmin([residual(d) for d in grid]))
    lo_b, hi_b = grid[max(best - 1, 0)], grid[min(best + 1, len(grid) - 1)]
    D = float(minimize_scalar(residual, bounds=(lo_b, hi_b), method="bounded",
                              options={"xatol": 1e-10}).x)
    coef, A, rank = solve(D)
    if rank < 2 or np.linalg.cond(A) > 1e12:
        raise IllConditioned("regressor matrix is rank deficient")
    return float(coef[1]), D


def step_response(p: PlantParams, V: float, duration: float) -> np.ndarray:
    """Open-loop ``(t, theta)`` samples of the plant under constant voltage."""
    s = RobotState()
    cmd = ActuatorCmd(None, False, V)
    out = [(s.t, s.theta)]
    for _ in range(int(round(duration / p.dt))):
        s = step_dynamics(s, cmd, p)
        out.append((s.t, s.theta))
    return np.array(out)


__all__.append("step_response")
