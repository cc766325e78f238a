"""Torque-pitch control environment.

State is (wind speed, rotor speed, pitch). Five discrete actions nudge the
rotor speed by 0.5 rpm or the pitch by 1 degree, or do nothing. An action
that would leave the admissible box (including the tip-speed-ratio band)
is revoked and punished.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
from collections import OrderedDict
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path

import numpy as np

from . import acoustics as ac
from .turbine_model import RPM_TO_RAD_S, DEFAULT_RHO, TurbineGeometry, data_dir, default_turbine, rotor_performance

log = logging.getLogger(__name__)

WIND_BOUNDS = (4.0, 16.0)
RPM_BOUNDS = (6.0, 18.0)
PITCH_BOUNDS = (-5.0, 10.0)
TSR_BOUNDS = (3.0, 12.0)

RPM_STEP = 0.5
PITCH_STEP = 1.0

# controls are snapped to this many decimals so that a1/a2 and a3/a4 invert exactly
_CONTROL_DECIMALS = 9


class Action(IntEnum):
    OMEGA_UP = 0
    OMEGA_DOWN = 1
    PITCH_UP = 2
    PITCH_DOWN = 3
    HOLD = 4


N_ACTIONS = len(Action)

_DELTAS = {
    Action.OMEGA_UP: (RPM_STEP, 0.0),
    Action.OMEGA_DOWN: (-RPM_STEP, 0.0),
    Action.PITCH_UP: (0.0, PITCH_STEP),
    Action.PITCH_DOWN: (0.0, -PITCH_STEP),
    Action.HOLD: (0.0, 0.0),
}


@dataclass(frozen=True)
class EnvState:
    wind_speed: float
    rotor_speed: float
    pitch: float

    def tip_speed_ratio(self, radius: float) -> float:
        return self.rotor_speed * RPM_TO_RAD_S * radius / self.wind_speed

    def as_array(self) -> np.ndarray:
        return np.array([self.wind_speed, self.rotor_speed, self.pitch])

    def with_wind(self, wind_speed: float) -> EnvState:
        return EnvState(float(wind_speed), self.rotor_speed, self.pitch)


@dataclass(frozen=True)
class BoundaryViolation:
    attempted: EnvState


def in_bounds(state: EnvState, radius: float) -> bool:
    if not (WIND_BOUNDS[0] <= state.wind_speed <= WIND_BOUNDS[1]):
        return False
    if not (RPM_BOUNDS[0] <= state.rotor_speed <= RPM_BOUNDS[1]):
        return False
    if not (PITCH_BOUNDS[0] <= state.pitch <= PITCH_BOUNDS[1]):
        return False
    tsr = state.tip_speed_ratio(radius)
    return TSR_BOUNDS[0] <= tsr <= TSR_BOUNDS[1]


def apply_action(state: EnvState, action, radius: float) -> EnvState | BoundaryViolation:
    d_rpm, d_pitch = _DELTAS[Action(action)]
    cand = EnvState(state.wind_speed,
                    round(state.rotor_speed + d_rpm, _CONTROL_DECIMALS),
                    round(state.pitch + d_pitch, _CONTROL_DECIMALS))
    if not in_bounds(cand, radius):
        return BoundaryViolation(cand)
    return cand


# --- reward -------------------------------------------------------------------

@dataclass(frozen=True)
class RewardConfig:
    spl_threshold: float = 45.0
    delta_db: float = 5.0
    boundary_penalty: float = -3.0
    cp_nom: float = 0.45
    noise_term_enabled: bool = True

    def __post_init__(self):
        if self.delta_db <= 0:
            raise ValueError("delta_db must be positive")
        if self.boundary_penalty >= -1:
            raise ValueError("boundary_penalty must be below -1")
        if self.cp_nom <= 0:
            raise ValueError("cp_nom must be positive")


def reward(cp: float, oaspl: float, cfg: RewardConfig) -> float:
    """Power term normalised by cp_nom minus a ReLU noise penalty above the threshold."""
    r = cp / cfg.cp_nom
    if cfg.noise_term_enabled:
        r -= max((oaspl - cfg.spl_threshold) / cfg.delta_db, 0.0)
    return r


# --- wind processes ------------------------------------------------------------

def _clip_wind(u: float, counter: list) -> float:
    lo, hi = WIND_BOUNDS
    if u < lo or u > hi:
        counter[0] += 1
        log.debug("wind speed %.3f clipped to [%g, %g]", u, lo, hi)
        return float(min(max(u, lo), hi))
    return float(u)


class WindProcess:
    """Base wind source: ``reset`` then ``advance`` once per control step."""

    def __init__(self):
        self.n_clipped = 0

    def reset(self) -> float:
        raise NotImplementedError

    def advance(self) -> float:
        raise NotImplementedError

    @property
    def exhausted(self) -> bool:
        return False

    def _clip(self, u):
        box = [self.n_clipped]
        out = _clip_wind(u, box)
        self.n_clipped = box[0]
        return out


class SteadyWind(WindProcess):
    def __init__(self, speed: float):
        super().__init__()
        self.speed = self._clip(float(speed))

    def reset(self):
        return self.speed

    def advance(self):
        return self.speed


class ReplayWind(WindProcess):
    """Replays a recorded series, one sample per control step."""

    def __init__(self, speeds, dt: float = 60.0, timestamps=None):
        super().__init__()
        raw = np.asarray(speeds, dtype=float)
        if raw.size == 0:
            raise ValueError("empty wind series")
        self.speeds = np.array([self._clip(u) for u in raw])
        self.dt = float(dt)
        self.timestamps = timestamps
        self._i = 0

    def reset(self):
        self._i = 0
        return float(self.speeds[0])

    def advance(self):
        if self._i < self.speeds.size - 1:
            self._i += 1
        return float(self.speeds[self._i])

    @property
    def exhausted(self):
        return self._i >= self.speeds.size - 1

    def __len__(self):
        return int(self.speeds.size)


class SyntheticWind(WindProcess):
    """Discrete Ornstein-Uhlenbeck wind speed with its own seeded generator."""

    def __init__(self, mean: float, turbulence_intensity: float = 0.1, seed: int = 0,
                 time_constant: float = 600.0, dt: float = 60.0):
        super().__init__()
        self.mean = float(mean)
        self.ti = float(turbulence_intensity)
        self.seed = seed
        self.phi = float(np.exp(-dt / time_constant))
        self.dt = dt
        self.reset()

    def reset(self):
        self._rng = np.random.default_rng(self.seed)
        self._u = self.mean
        return self._clip(self._u)

    def advance(self):
        sigma = self.ti * self.mean
        self._u = self.mean + self.phi * (self._u - self.mean) + sigma * np.sqrt(1 - self.phi**2) * self._rng.standard_normal()
        return self._clip(self._u)


def synthetic_wind_series(n: int, mean: float, turbulence_intensity: float, seed: int,
                          time_constant: float = 600.0, dt: float = 60.0, mean_drift=None) -> np.ndarray:
    """Unclipped OU series; ``mean_drift`` optionally gives a per-sample mean."""
    rng = np.random.default_rng(seed)
    phi = np.exp(-dt / time_constant)
    means = np.full(n, float(mean)) if mean_drift is None else np.asarray(mean_drift, dtype=float)
    out = np.empty(n)
    dev = 0.0
    for i in range(n):
        dev = phi * dev + turbulence_intensity * means[i] * np.sqrt(1 - phi**2) * rng.standard_normal()
        out[i] = means[i] + dev
    return out


class WindCsvError(ValueError):
    pass


def read_wind_csv(path, bin_seconds: float = 60.0):
    """Parse ``timestamp,wind_speed_ms[,direction_deg]`` and average into fixed bins.

    Timestamps are seconds (float) or ISO-8601. Returns (bin_start_seconds, mean_speeds).
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"wind file not found: {path}")
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].lstrip().startswith("#")]
    if not rows:
        raise WindCsvError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    for col in ("timestamp", "wind_speed_ms"):
        if col not in header:
            raise WindCsvError(f"{path}: missing required column '{col}'")
    it, iu = header.index("timestamp"), header.index("wind_speed_ms")
    if len(rows) == 1:
        raise WindCsvError(f"{path}: empty file (header only)")
    times, speeds = [], []
    t0 = None
    for lineno, row in enumerate(rows[1:], start=2):
        try:
            t = _parse_time(row[it])
            u = float(row[iu])
        except (IndexError, ValueError):
            raise WindCsvError(f"{path}: malformed row at line {lineno}: {row!r}") from None
        if not np.isfinite(u):
            raise WindCsvError(f"{path}: non-finite wind speed at line {lineno}")
        if t0 is None:
            t0 = t
        times.append(t - t0)
        speeds.append(u)
    times = np.asarray(times)
    speeds = np.asarray(speeds)
    bins = np.floor(times / bin_seconds).astype(np.int64)
    uniq, inv = np.unique(bins, return_inverse=True)
    sums = np.bincount(inv, weights=speeds)
    counts = np.bincount(inv)
    return uniq * bin_seconds, sums / counts


def _parse_time(s: str) -> float:
    s = s.strip()
    try:
        return float(s)
    except ValueError:
        from datetime import datetime
        return datetime.fromisoformat(s).timestamp()


def write_wind_csv(path, speeds, dt: float = 60.0):
    with open(path, "w") as fh:
        fh.write("timestamp,wind_speed_ms\n")
        for i, u in enumerate(speeds):
            fh.write(f"{i * dt:.1f},{u:.4f}\n")


# --- cp_nom --------------------------------------------------------------------

def scan_grid(radius: float, n_wind: int = 25, n_rpm: int = 25, n_pitch: int = 13):
    """Admissible (U, rpm, pitch) triples on a regular grid over the state box."""
    us = np.linspace(*WIND_BOUNDS, n_wind)
    oms = np.linspace(*RPM_BOUNDS, n_rpm)
    ths = np.linspace(*PITCH_BOUNDS, n_pitch)
    out = []
    for u in us:
        for om in oms:
            tsr = om * RPM_TO_RAD_S * radius / u
            if not (TSR_BOUNDS[0] <= tsr <= TSR_BOUNDS[1]):
                continue
            for th in ths:
                out.append((float(u), float(om), float(th)))
    return out


def compute_cp_nom(geom: TurbineGeometry, n_wind: int = 25, n_rpm: int = 25, n_pitch: int = 13):
    """Max Cp over the admissible grid; returns (cp_nom, (U, rpm, pitch) at the max)."""
    best = (-np.inf, None)
    for u, om, th in scan_grid(geom.blade_radius, n_wind, n_rpm, n_pitch):
        cp = rotor_performance(geom, u, om, th).cp
        if cp > best[0]:
            best = (cp, (u, om, th))
    return float(best[0]), best[1]


def geometry_fingerprint(geom: TurbineGeometry) -> str:
    h = hashlib.sha256()
    h.update(repr((geom.blade_radius, geom.hub_radius, geom.n_blades)).encode())
    for s in geom.segments:
        h.update(repr((s.radial_station, s.span_width, s.chord, s.twist, s.airfoil_id)).encode())
    for k in sorted(geom.polars):
        p = geom.polars[k]
        h.update(k.encode())
        h.update(p.angles.tobytes() + p.cl.tobytes() + p.cd.tobytes())
    return h.hexdigest()[:16]


_CP_NOM_CACHE: dict[str, tuple] = {}


def cp_nom_for(geom: TurbineGeometry, cache_file: Path | None = None):
    """cp_nom and its grid location, read from the cache file beside the geometry when it matches."""
    key = geometry_fingerprint(geom)
    if key in _CP_NOM_CACHE:
        return _CP_NOM_CACHE[key]
    cache_file = Path(cache_file) if cache_file is not None else data_dir() / "cp_nom.json"
    if cache_file.is_file():
        stored = json.loads(cache_file.read_text())
        if stored.get("fingerprint") == key:
            val = (float(stored["cp_nom"]), tuple(stored["argmax"]))
            _CP_NOM_CACHE[key] = val
            return val
    val = compute_cp_nom(geom)
    _CP_NOM_CACHE[key] = val
    return val


def write_cp_nom_cache(geom: TurbineGeometry, path: Path | None = None):
    path = Path(path) if path is not None else data_dir() / "cp_nom.json"
    cp, arg = compute_cp_nom(geom)
    path.write_text(json.dumps({"fingerprint": geometry_fingerprint(geom), "cp_nom": cp,
                                "argmax": list(arg), "grid": [25, 25, 13]}, indent=2) + "\n")
    return cp


# --- the environment -------------------------------------------------------------

@dataclass(frozen=True)
class StepOutcome:
    state: EnvState
    action: int
    next_state: EnvState
    reward: float
    cp: float
    power: float
    oaspl: float
    boundary_violation: bool
    truncated: bool = False
    diagnostics: dict = field(default_factory=dict)


class TurbineEnv:
    """Turbine solver plus noise model behind a step function.

    One instance is single-threaded: it carries a results cache and an
    acoustic call counter. ``report_noise`` controls whether OASPL is computed
    for logging when the reward does not need it.
    """

    def __init__(self, geom: TurbineGeometry | None = None, reward_cfg: RewardConfig | None = None,
                 observer: ac.ObserverLocation | None = None, acoustic_cfg: ac.AcousticConfig | None = None,
                 rho: float = DEFAULT_RHO, report_noise: bool = True, cache_size: int = 200_000):
        self.geom = geom if geom is not None else default_turbine()
        if reward_cfg is None:
            reward_cfg = RewardConfig(cp_nom=cp_nom_for(self.geom)[0])
        self.reward_cfg = reward_cfg
        self.observer = observer if observer is not None else ac.ObserverLocation.ground_downwind()
        self.acoustic_cfg = acoustic_cfg if acoustic_cfg is not None else ac.AcousticConfig()
        self.rho = rho
        self.report_noise = report_noise
        self.acoustic_calls = 0
        self.unconverged_segments = 0
        self._cache: OrderedDict = OrderedDict()
        self._cache_size = cache_size

    @property
    def radius(self) -> float:
        return self.geom.blade_radius

    @property
    def needs_noise(self) -> bool:
        return self.reward_cfg.noise_term_enabled or self.report_noise

    def evaluate(self, state: EnvState, with_noise: bool | None = None):
        """(cp, power, oaspl, n_unconverged) at a state; oaspl is nan when not computed."""
        with_noise = self.needs_noise if with_noise is None else with_noise
        key = (state.wind_speed, state.rotor_speed, state.pitch, with_noise)
        hit = self._cache.get(key)
        if hit is not None:
            self._cache.move_to_end(key)
            return hit
        perf = rotor_performance(self.geom, state.wind_speed, state.rotor_speed, state.pitch, rho=self.rho)
        oaspl = float("nan")
        if with_noise:
            self.acoustic_calls += 1
            oaspl, _ = ac.turbine_spl(self.geom, perf.per_segment, state.wind_speed, state.rotor_speed,
                                      state.pitch, self.observer, self.acoustic_cfg)
        self.unconverged_segments += perf.n_unconverged
        out = (perf.cp, perf.power, oaspl, perf.n_unconverged)
        self._cache[key] = out
        if len(self._cache) > self._cache_size:
            self._cache.popitem(last=False)
        return out

    def spectrum(self, state: EnvState) -> ac.SplSpectrum:
        perf = rotor_performance(self.geom, state.wind_speed, state.rotor_speed, state.pitch, rho=self.rho)
        return ac.turbine_spl(self.geom, perf.per_segment, state.wind_speed, state.rotor_speed,
                              state.pitch, self.observer, self.acoustic_cfg)[1]

    def step(self, state: EnvState, action, wind: WindProcess) -> StepOutcome:
        """Advance wind, apply (or revoke) the action, score the next state."""
        new_wind = wind.advance()
        moved = state.with_wind(new_wind)
        cand = apply_action(moved, action, self.radius)
        violation = isinstance(cand, BoundaryViolation)
        nxt = moved if violation else cand
        cp, power, oaspl, n_bad = self.evaluate(nxt)
        if violation:
            r = self.reward_cfg.boundary_penalty
        else:
            r = reward(cp, oaspl, self.reward_cfg)
        return StepOutcome(state, int(action), nxt, float(r), cp, power, oaspl, violation,
                           truncated=wind.exhausted, diagnostics={"unconverged_segments": n_bad})

    def sample_initial_state(self, rng: np.random.Generator, wind_speed: float | None = None) -> EnvState:
        """Uniform over the box, rejected until the tip-speed ratio is admissible."""
        while True:
            u = rng.uniform(*WIND_BOUNDS) if wind_speed is None else float(wind_speed)
            om = round(rng.uniform(*RPM_BOUNDS), 6)
            th = round(rng.uniform(*PITCH_BOUNDS), 6)
            s = EnvState(float(u), om, th)
            if in_bounds(s, self.radius):
                return s

