"""Conventional region-based variable-speed, variable-pitch controller.

Region I      below cut-in: parked.
Region II     tip-speed-ratio tracking at lambda_opt, pitch held at theta_opt.
Region II 1/2 rotor speed held at rated_rpm until rated wind.
Region III    rated_rpm, pitch from a PID loop on the normalised power error.
              The loop regulates on the stall side of the power-pitch curve:
              lowering pitch sheds power. Feathering within the 10 degree
              pitch bound cannot hold rated power on this rotor above about
              15 m/s, while the stall-side crossing exists across the whole
              region just below theta_opt.
Region IV     at or above cut-off: parked.

Region intervals are half-open, [lower, upper).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.optimize import brentq

from .environment import PITCH_BOUNDS, RPM_BOUNDS, WIND_BOUNDS, cp_nom_for
from .turbine_model import DEFAULT_RHO, RPM_TO_RAD_S, TurbineGeometry, rotor_performance


class Region(str, Enum):
    I = "I"
    II = "II"
    II_HALF = "II1/2"
    III = "III"
    IV = "IV"


@dataclass(frozen=True)
class ControlRegions:
    cut_in: float
    rated_wind: float
    cut_off: float
    rated_rpm: float
    lambda_opt: float
    theta_opt: float
    blade_radius: float
    rated_power: float

    def __post_init__(self):
        if not self.cut_in < self.rated_wind <= self.cut_off:
            raise ValueError("need cut_in < rated_wind <= cut_off")

    def tracking_rpm(self, wind_speed: float) -> float:
        return self.lambda_opt * wind_speed / self.blade_radius / RPM_TO_RAD_S

    @property
    def sync_wind(self) -> float:
        """Wind speed at which lambda tracking reaches rated_rpm (end of Region II)."""
        u = self.rated_rpm * RPM_TO_RAD_S * self.blade_radius / self.lambda_opt
        return min(max(u, self.cut_in), self.rated_wind)


def classify_region(wind_speed: float, regions: ControlRegions) -> Region:
    if wind_speed < regions.cut_in:
        return Region.I
    if wind_speed < regions.sync_wind:
        return Region.II
    if wind_speed < regions.rated_wind:
        return Region.II_HALF
    if wind_speed < regions.cut_off:
        return Region.III
    return Region.IV


@dataclass
class PidState:
    """Positional PID with conditional-integration anti-windup.

    The output is ``bias + kp*e + ki*I + kd*de/dt`` clipped to
    [out_min, out_max]; the integral is frozen whenever the output is
    saturated and the error would push it further into the bound.
    """

    kp: float
    ki: float
    kd: float = 0.0
    integral: float = 0.0
    prev_error: float | None = None
    out_min: float = PITCH_BOUNDS[0]
    out_max: float = PITCH_BOUNDS[1]
    saturated: bool = False

    def reset(self) -> None:
        self.integral = 0.0
        self.prev_error = None
        self.saturated = False

    def update(self, error: float, dt: float, bias: float = 0.0) -> float:
        if dt <= 0:
            raise ValueError("dt must be positive")
        deriv = 0.0 if self.prev_error is None else (error - self.prev_error) / dt
        self.prev_error = error
        trial = self.integral + error * dt
        raw = bias + self.kp * error + self.ki * trial + self.kd * deriv
        if raw > self.out_max and self.ki * error > 0 or raw < self.out_min and self.ki * error < 0:
            raw = bias + self.kp * error + self.ki * self.integral + self.kd * deriv
        else:
            self.integral = trial
        out = min(max(raw, self.out_min), self.out_max)
        self.saturated = out != raw
        return out


@dataclass(frozen=True)
class ControlCommand:
    rotor_speed: float
    pitch: float
    region: Region
    shutdown: bool = False


def control_step(wind_speed: float, rotor_speed: float, pitch: float, regions: ControlRegions,
                 pid: PidState, dt: float, measured_power: float) -> ControlCommand:
    """Setpoints for the next control interval.

    ``measured_power`` is the power at the current (wind, rotor speed, pitch);
    only Region III uses it.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    region = classify_region(wind_speed, regions)
    if region in (Region.I, Region.IV):
        pid.reset()
        return ControlCommand(RPM_BOUNDS[0], PITCH_BOUNDS[1], region, shutdown=True)
    if region is Region.II:
        pid.reset()
        return ControlCommand(regions.tracking_rpm(wind_speed), regions.theta_opt, region)
    if region is Region.II_HALF:
        pid.reset()
        return ControlCommand(regions.rated_rpm, regions.theta_opt, region)
    # shortfall is positive below rated and drives pitch back up towards theta_opt
    err = (regions.rated_power - measured_power) / regions.rated_power
    theta = pid.update(err, dt, bias=regions.theta_opt)
    return ControlCommand(regions.rated_rpm, theta, region)


def schedule_power(geom: TurbineGeometry, wind_speed: float, regions: ControlRegions | None = None,
                   *, lambda_opt=None, theta_opt=None, rated_rpm=None, rho: float = DEFAULT_RHO) -> float:
    """Power below rated following the Region II / II 1/2 schedule (no pitch action)."""
    if regions is not None:
        lambda_opt, theta_opt, rated_rpm = regions.lambda_opt, regions.theta_opt, regions.rated_rpm
    rpm = min(lambda_opt * wind_speed / geom.blade_radius / RPM_TO_RAD_S, rated_rpm)
    return rotor_performance(geom, wind_speed, rpm, theta_opt, rho=rho).power


def tune_region_boundaries(geom: TurbineGeometry, *, rated_power: float | None = None,
                           cut_in: float = WIND_BOUNDS[0], cut_off: float = WIND_BOUNDS[1],
                           rated_rpm: float = RPM_BOUNDS[1], rho: float = DEFAULT_RHO) -> ControlRegions:
    """Regions from the turbine model.

    lambda_opt and theta_opt come from the location of the cp_nom grid maximum;
    rated_wind is the smallest wind speed at which the Region II / II 1/2
    schedule reaches rated power (cut_off when it never does).
    """
    rated_power = geom.rated_power if rated_power is None else rated_power
    _, (u, rpm, theta) = cp_nom_for(geom)
    lam = rpm * RPM_TO_RAD_S * geom.blade_radius / u

    def excess(w):
        return schedule_power(geom, w, lambda_opt=lam, theta_opt=theta, rated_rpm=rated_rpm, rho=rho) - rated_power

    rated_wind = cut_off
    if math.isfinite(rated_power):
        grid = np.arange(cut_in, cut_off + 1e-9, 0.25)
        vals = [excess(w) for w in grid]
        for k in range(1, len(grid)):
            if vals[k - 1] < 0.0 <= vals[k]:
                rated_wind = brentq(excess, grid[k - 1], grid[k], xtol=1e-6)
                break
    return ControlRegions(cut_in, float(rated_wind), cut_off, rated_rpm, float(lam), float(theta),
                          geom.blade_radius, float(rated_power))


def tune_pid(geom: TurbineGeometry, regions: ControlRegions, dt: float = 60.0, rho: float = DEFAULT_RHO,
             n_wind: int = 9, h: float = 0.1) -> PidState:
    """Ziegler-Nichols-style PI gains for the pitch loop at the control interval.

    Across Region III the plant is static within one interval, so with pure
    proportional action the loop rings (period two intervals) once
    kp * |dP/dtheta| / P_rated reaches 1. The ultimate gain is taken at the
    most sensitive operating point found along the rated-power pitch
    trajectory, and the classic PI rule (0.45 Ku, 0.54 Ku / Tu) applied.
    """
    worst = 0.0
    for u in np.linspace(regions.rated_wind, regions.cut_off - 1e-6, n_wind):
        th = rated_pitch(geom, regions, u, rho)
        lo, hi = max(th - h, PITCH_BOUNDS[0]), min(th + h, PITCH_BOUNDS[1])
        p_lo = rotor_performance(geom, u, regions.rated_rpm, lo, rho=rho).power
        p_hi = rotor_performance(geom, u, regions.rated_rpm, hi, rho=rho).power
        worst = max(worst, abs(p_hi - p_lo) / (hi - lo) / regions.rated_power)
    ku = 1.0 / worst
    tu = 2.0 * dt
    return PidState(kp=0.45 * ku, ki=0.54 * ku / tu, kd=0.0)


def rated_pitch(geom: TurbineGeometry, regions: ControlRegions, wind_speed: float,
                rho: float = DEFAULT_RHO) -> float:
    """Stall-side pitch at which power equals rated at rated_rpm.

    Searched between the lower pitch bound and the pitch of maximum power.
    """
    def f(th):
        return rotor_performance(geom, wind_speed, regions.rated_rpm, th, rho=rho).power - regions.rated_power
    grid = np.arange(PITCH_BOUNDS[0], PITCH_BOUNDS[1] + 1e-9, 0.5)
    lo, hi = PITCH_BOUNDS[0], float(grid[int(np.argmax([f(t) for t in grid]))])
    if f(hi) <= 0.0:
        return hi
    if f(lo) > 0.0:
        return lo
    return brentq(f, lo, hi, xtol=1e-8)
