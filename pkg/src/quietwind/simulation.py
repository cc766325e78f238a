"""Experiment orchestration shared by the command line and the demos.

Everything here is deterministic given the configuration and seed, and every
tabular file written carries a header row preceded by a comment line with the
configuration hash and seed.
"""

from __future__ import annotations

import configparser
import csv
import hashlib
import io
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import acoustics as ac
from . import agent, baseline_control as bc, energy_stats as es, qnet
from .environment import (RPM_BOUNDS, TSR_BOUNDS, EnvState, ReplayWind, RewardConfig, TurbineEnv,
                          cp_nom_for, in_bounds, read_wind_csv, reward)
from .turbine_model import DEFAULT_RHO, RPM_TO_RAD_S, TurbineGeometry, data_dir, default_turbine, load_geometry

log = logging.getLogger(__name__)

AGENTS = ("quiet", "power", "classic")


class ConfigError(ValueError):
    pass


# --- configuration ----------------------------------------------------------------------

def default_config_path() -> Path:
    return data_dir() / "default.ini"


@dataclass
class RunConfig:
    parser: configparser.ConfigParser
    source: str
    seed: int
    out: Path
    base_dir: Path = field(default_factory=Path.cwd)

    def get(self, section, key, fallback=None):
        return self.parser.get(section, key, fallback=fallback)

    def number(self, section, key, kind=float):
        raw = self.parser.get(section, key, fallback="").strip()
        if raw == "":
            return None
        try:
            return kind(raw)
        except ValueError:
            raise ConfigError(f"[{section}] {key}: expected a number, got {raw!r}"
                              f"{self._where(section, key)}") from None

    def path(self, section, key) -> Path | None:
        raw = self.parser.get(section, key, fallback="").strip()
        if not raw:
            return None
        p = Path(raw)
        return p if p.is_absolute() else self.base_dir / p

    def _where(self, section, key) -> str:
        for lineno, line in enumerate(self.source.splitlines(), start=1):
            if line.split("=")[0].strip() == key:
                return f" (line {lineno})"
        return ""

    @property
    def digest(self) -> str:
        buf = io.StringIO()
        self.parser.write(buf)
        return hashlib.sha256((buf.getvalue() + f"seed={self.seed}").encode()).hexdigest()[:16]


def load_config(path=None, *, seed: int | None = None, out=None) -> RunConfig:
    """Defaults overlaid with the user file, then command-line overrides."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    parser.read_string(default_config_path().read_text())
    source = ""
    base = Path.cwd()
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        source = path.read_text()
        try:
            parser.read_string(source, source=str(path))
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}") from None
        base = path.parent.resolve()
    cfg = RunConfig(parser, source, 0, Path("runs"), base)
    cfg.seed = seed if seed is not None else cfg.number("run", "seed", int) or 0
    cfg.out = Path(out) if out is not None else (cfg.path("run", "out") or Path("runs"))
    parser.set("run", "seed", str(cfg.seed))
    return cfg


# --- model construction --------------------------------------------------------------

def build_geometry(cfg: RunConfig) -> TurbineGeometry:
    gpath = cfg.path("run", "geometry")
    if gpath is None:
        return default_turbine()
    if not gpath.is_file():
        raise FileNotFoundError(f"geometry file not found: {gpath}")
    return load_geometry(gpath, cfg.path("run", "polar_dir"))


def build_env(cfg: RunConfig, geom: TurbineGeometry, noise_in_reward: bool = True,
              report_noise: bool = True) -> TurbineEnv:
    cp_nom = cfg.number("reward", "cp_nom")
    if cp_nom is None:
        cp_nom = cp_nom_for(geom)[0]
    rcfg = RewardConfig(spl_threshold=cfg.number("reward", "spl_threshold"),
                        delta_db=cfg.number("reward", "delta_db"),
                        boundary_penalty=cfg.number("reward", "boundary_penalty"),
                        cp_nom=cp_nom, noise_term_enabled=noise_in_reward)
    obs = ac.ObserverLocation((cfg.number("observer", "x"), cfg.number("observer", "y"),
                               cfg.number("observer", "z")))
    acfg = ac.AcousticConfig(gain_db=cfg.number("acoustics", "gain_db"),
                             turbulence_intensity=cfg.number("acoustics", "turbulence_intensity"),
                             turbulence_length_scale=cfg.number("acoustics", "turbulence_length_scale"))
    return TurbineEnv(geom, rcfg, obs, acfg, report_noise=report_noise)


def train_config(cfg: RunConfig, profile: str | None = None) -> agent.TrainConfig:
    profile = profile or cfg.get("train", "profile", "desk")
    extra = {}
    n = cfg.number("train", "env_interactions", int)
    if n is not None:
        extra["total_env_interactions"] = n
    return agent.TrainConfig.profile(
        profile,
        steps_per_iteration=cfg.number("train", "steps_per_iteration", int),
        batch_size=cfg.number("train", "batch_size", int),
        lr=cfg.number("train", "learning_rate"),
        gamma=cfg.number("train", "discount"),
        epsilon=cfg.number("train", "epsilon"),
        tau=cfg.number("train", "tau"),
        target_update_period=cfg.number("train", "target_update_period", int),
        episode_length=cfg.number("train", "episode_length", int),
        buffer_capacity=cfg.number("train", "buffer_capacity", int),
        checkpoint_every=cfg.number("train", "checkpoint_every", int) or 0,
        seed=cfg.seed,
        **extra,
    )


def build_regions(cfg: RunConfig, geom: TurbineGeometry) -> bc.ControlRegions:
    return bc.tune_region_boundaries(geom, cut_in=cfg.number("controller", "cut_in"),
                                     cut_off=cfg.number("controller", "cut_off"),
                                     rated_rpm=cfg.number("controller", "rated_rpm"))


def build_pid(cfg: RunConfig, geom: TurbineGeometry, regions: bc.ControlRegions) -> bc.PidState:
    kp, ki, kd = (cfg.number("controller", k) for k in ("kp", "ki", "kd"))
    if kp is None or ki is None:
        tuned = bc.tune_pid(geom, regions)
        kp = tuned.kp if kp is None else kp
        ki = tuned.ki if ki is None else ki
    return bc.PidState(kp=kp, ki=ki, kd=kd or 0.0)


def weights_path(out: Path, agent_name: str) -> Path:
    return Path(out) / f"{agent_name}_ddqn.qw"


# --- file output -------------------------------------------------------------------

def write_table(path, columns, rows, cfg: RunConfig, note: str = "") -> None:
    """Whitespace-free CSV with a leading comment line for provenance."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        fh.write(f"# config_hash={cfg.digest} seed={cfg.seed} version={__version__}"
                 + (f" {note}" if note else "") + "\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    v = float(v)
    return "nan" if math.isnan(v) else repr(v)


def read_table(path) -> dict[str, np.ndarray]:
    """Columns of a file written by ``write_table``.

    Numeric columns come back as float arrays, anything else (the region
    label, say) as an array of strings.
    """
    with open(path) as fh:
        rows = list(csv.reader(ln for ln in fh if not ln.startswith("#")))
    cols, body = rows[0], rows[1:]
    out = {}
    for j, name in enumerate(cols):
        raw = [r[j] for r in body]
        try:
            out[name] = np.array([float(x) for x in raw], dtype=float)
        except ValueError:
            out[name] = np.array(raw, dtype=str)
    return out


# --- training ----------------------------------------------------------------------

def run_training(cfg: RunConfig, agent_name: str, profile: str | None = None, geom=None):
    """Train the quiet or power agent; returns (TrainResult, env)."""
    if agent_name not in ("quiet", "power"):
        raise ConfigError(f"only the quiet and power agents are trained, not {agent_name!r}")
    geom = geom or build_geometry(cfg)
    noise = agent_name == "quiet"
    env = build_env(cfg, geom, noise_in_reward=noise, report_noise=noise)
    res = agent.train(agent.TurbineTask(env), train_config(cfg, profile))
    return res, env


def save_training(res: agent.TrainResult, out: Path, agent_name: str) -> Path:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    wp = weights_path(out, agent_name)
    qnet.save_weights(res.weights, wp)
    agent.write_log(res.log, out / f"{agent_name}_train_log.jsonl")
    return wp


def load_agent_weights(out: Path, agent_name: str, weights=None) -> qnet.MlpWeights:
    wp = Path(weights) if weights is not None else weights_path(out, agent_name)
    if not wp.is_file():
        raise FileNotFoundError(f"weights not found: {wp} (run `train --agent {agent_name}` first)")
    return qnet.load_weights(wp)


# --- time-domain simulation ----------------------------------------------------------

SIM_COLUMNS = ("t_s", "wind_speed", "rotor_speed", "pitch", "power", "cp", "oaspl", "reward",
               "boundary_violation", "region")


@dataclass
class SimResult:
    controller: str
    t: np.ndarray
    wind: np.ndarray
    rpm: np.ndarray
    pitch: np.ndarray
    power: np.ndarray
    cp: np.ndarray
    oaspl: np.ndarray
    reward: np.ndarray
    violation: np.ndarray
    region: list
    dt: float

    @property
    def energy_wh(self) -> float:
        return float(np.sum(self.power) * self.dt / 3600.0)

    def rows(self):
        for i in range(self.t.size):
            yield (self.t[i], self.wind[i], self.rpm[i], self.pitch[i], self.power[i], self.cp[i],
                   self.oaspl[i], self.reward[i], bool(self.violation[i]), self.region[i])


def feasible_rpm(wind_speed: float, rpm: float, radius: float) -> float:
    """Clip a rotor-speed setpoint into the box and the tip-speed-ratio band at this wind."""
    lo = max(RPM_BOUNDS[0], TSR_BOUNDS[0] * wind_speed / radius / RPM_TO_RAD_S)
    hi = min(RPM_BOUNDS[1], TSR_BOUNDS[1] * wind_speed / radius / RPM_TO_RAD_S)
    return float(min(max(rpm, lo), hi))


def initial_state(cfg: RunConfig, wind_speed: float, radius: float) -> EnvState:
    rpm = feasible_rpm(wind_speed, cfg.number("simulate", "initial_rpm"), radius)
    return EnvState(wind_speed, round(rpm, 6), cfg.number("simulate", "initial_pitch"))


def simulate_agent(weights: qnet.MlpWeights, env: TurbineEnv, wind: ReplayWind, start: EnvState,
                   name: str) -> SimResult:
    """One greedy action per wind sample; the record holds the scored next states."""
    n = len(wind) - 1
    wind.reset()
    out = agent.greedy_rollout(weights, env, n, start, wind)
    return SimResult(
        name, (np.arange(n) + 1) * wind.dt, np.array([o.next_state.wind_speed for o in out]),
        np.array([o.next_state.rotor_speed for o in out]), np.array([o.next_state.pitch for o in out]),
        np.array([o.power for o in out]), np.array([o.cp for o in out]), np.array([o.oaspl for o in out]),
        np.array([o.reward for o in out]), np.array([o.boundary_violation for o in out]),
        ["rl"] * n, wind.dt)


def simulate_classic(env: TurbineEnv, regions: bc.ControlRegions, pid: bc.PidState, wind: ReplayWind,
                     start: EnvState) -> SimResult:
    """Classic controller: measures power at the current state, commands the next interval.

    Parked intervals (Regions I and IV) produce zero power and no noise
    figure (NaN), since the parked state lies outside the admissible box.
    """
    n = len(wind) - 1
    u = wind.reset()
    pid.reset()
    state = start.with_wind(u)
    cols = {k: np.empty(n) for k in ("wind", "rpm", "pitch", "power", "cp", "oaspl", "reward")}
    regions_seen = []
    violation = np.zeros(n, dtype=bool)
    measured = env.evaluate(state)[1] if in_bounds(state, env.radius) else 0.0
    for i in range(n):
        cmd = bc.control_step(state.wind_speed, state.rotor_speed, state.pitch, regions, pid, wind.dt, measured)
        u = wind.advance()
        if cmd.shutdown:
            nxt = EnvState(u, cmd.rotor_speed, cmd.pitch)
            cp, power, oaspl, r = 0.0, 0.0, float("nan"), 0.0
        else:
            rpm = feasible_rpm(u, cmd.rotor_speed, env.radius)
            nxt = EnvState(u, rpm, cmd.pitch)
            cp, power, oaspl, _ = env.evaluate(nxt)
            r = reward(cp, oaspl, env.reward_cfg)
        for k, v in zip(("wind", "rpm", "pitch", "power", "cp", "oaspl", "reward"),
                        (u, nxt.rotor_speed, nxt.pitch, power, cp, oaspl, r)):
            cols[k][i] = v
        regions_seen.append(cmd.region.value)
        state, measured = nxt, power
    return SimResult("classic", (np.arange(n) + 1) * wind.dt, cols["wind"], cols["rpm"], cols["pitch"],
                     cols["power"], cols["cp"], cols["oaspl"], cols["reward"], violation, regions_seen, wind.dt)


def load_wind(path, bin_seconds: float = 60.0) -> ReplayWind:
    starts, speeds = read_wind_csv(path, bin_seconds)
    w = ReplayWind(speeds, dt=bin_seconds, timestamps=starts)
    if w.n_clipped:
        log.info("%s: %d of %d bins clipped to the wind-speed bounds", path, w.n_clipped, len(w))
    return w


def wind_source(cfg: RunConfig, section: str, default_name: str) -> Path:
    p = cfg.path(section, "wind_csv")
    return p if p is not None else data_dir() / default_name


class Simulator:
    """Holds the models built from one configuration; runs controllers over wind records."""

    def __init__(self, cfg: RunConfig, geom: TurbineGeometry | None = None):
        self.cfg = cfg
        self.geom = geom or build_geometry(cfg)
        self.env = build_env(cfg, self.geom)
        self._regions = None

    @property
    def regions(self) -> bc.ControlRegions:
        if self._regions is None:
            self._regions = build_regions(self.cfg, self.geom)
        return self._regions

    def run(self, controller: str, wind: ReplayWind, weights: qnet.MlpWeights | None = None) -> SimResult:
        start = initial_state(self.cfg, wind.reset(), self.geom.blade_radius)
        if controller == "classic":
            pid = build_pid(self.cfg, self.geom, self.regions)
            return simulate_classic(self.env, self.regions, pid, wind, start)
        if weights is None:
            raise ConfigError(f"controller {controller!r} needs trained weights")
        return simulate_agent(weights, self.env, wind, start, controller)


def write_sim(path, res: SimResult, cfg: RunConfig) -> None:
    write_table(path, SIM_COLUMNS, res.rows(), cfg, note=f"controller={res.controller}")


# --- Pareto ---------------------------------------------------------------------------

def parse_initial_states(text: str):
    out = []
    for chunk in text.split(";"):
        if chunk.strip():
            rpm, pitch = (float(x) for x in chunk.split())
            out.append((rpm, pitch))
    return out


def pareto_cloud(env: TurbineEnv, wind_speed: float, n: int, rng: np.random.Generator):
    """(rpm, pitch, cp, oaspl) for ``n`` uniformly sampled admissible states at one wind speed."""
    rows = []
    for _ in range(n):
        s = env.sample_initial_state(rng, wind_speed=wind_speed)
        cp, _, oaspl, _ = env.evaluate(s)
        rows.append((s.rotor_speed, s.pitch, cp, oaspl))
    return rows


def constrained_optimum(env: TurbineEnv, wind_speed: float, start=None, threshold=None):
    """Best Cp with OASPL <= threshold over a 0.5 rpm / 1 degree lattice.

    With ``start`` the lattice passes through that (rpm, pitch), i.e. it is the
    set of control settings reachable from it by the discrete actions.
    Returns (cp, rpm, pitch, oaspl).
    """
    threshold = env.reward_cfg.spl_threshold if threshold is None else threshold
    r0, t0 = start if start is not None else (RPM_BOUNDS[0], -5.0)
    rpms = r0 + 0.5 * np.arange(-40, 41)
    pitches = t0 + np.arange(-20, 21)
    best = None
    for rpm in rpms:
        for th in pitches:
            s = EnvState(wind_speed, round(float(rpm), 9), round(float(th), 9))
            if not in_bounds(s, env.radius):
                continue
            cp, _, oaspl, _ = env.evaluate(s)
            if oaspl <= threshold and (best is None or cp > best[0]):
                best = (cp, s.rotor_speed, s.pitch, oaspl)
    return best


# --- EPC and annual energy ---------------------------------------------------------------

def epc_from_sim(res: SimResult, bin_width: float = 0.5, u_range=(4.0, 16.0)) -> es.EpcTable:
    return es.build_epc_arrays(res.wind, {"cp": res.cp, "rotor_speed": res.rpm, "pitch": res.pitch,
                                          "oaspl": res.oaspl, "power": res.power}, bin_width, u_range)


def gp_from_sim(res: SimResult, seed: int = 0) -> es.GpModel:
    return es.fit_gp(res.wind, res.cp, seed=seed)


EPC_COLUMNS = ("wind_bin_center", "count") + tuple(
    f"{q}_{s}" for q in es.EPC_QUANTITIES for s in ("mean", "std"))


def epc_rows(table: es.EpcTable):
    for c, n, vals in table.rows():
        row = [c, n]
        for q in es.EPC_QUANTITIES:
            row += list(vals[q])
        yield row


def gp_curve_rows(gp: es.GpModel, u_range=(4.0, 16.0), step: float = 0.1):
    n = int(round((u_range[1] - u_range[0]) / step))
    us = u_range[0] + step * np.arange(n + 1)
    mu = gp.clamped_mean(us)
    sd = gp.std(us)
    return [(float(u), float(m), float(s)) for u, m, s in zip(us, mu, sd)]


def weibull_for(cfg: RunConfig) -> tuple[es.WeibullParams, float, float]:
    """Weibull fitted from full-record moments; returns (params, mean, std)."""
    p = cfg.path("annual", "wind_csv")
    if p is not None:
        _, speeds = read_wind_csv(p)
        mean, std = float(np.mean(speeds)), float(np.std(speeds))
    else:
        ref = es.WeibullParams(cfg.number("annual", "weibull_k"), cfg.number("annual", "weibull_c"))
        mean, std = ref.mean, ref.std
    return es.fit_weibull(mean, std), mean, std


@dataclass
class AnnualRow:
    controller: str
    energy_mwh: float
    sigma_cp: float


def annual_rows(cfg: RunConfig, sims: dict, geom: TurbineGeometry, regions: bc.ControlRegions):
    """Expected annual energy and expected Cp spread per controller.

    Instantaneous power is capped at rated for every controller: the power
    agent needs it above rated wind, and for the others it only trims GP
    smoothing overshoot.
    """
    weib, _, _ = weibull_for(cfg)
    u_range = (regions.cut_in, regions.cut_off)
    hours = cfg.number("annual", "duration_hours")
    rows = []
    for name, res in sims.items():
        if res.t.size < 100:
            raise ConfigError(f"insufficient data for {name}: {res.t.size} samples (need >= 100)")
        gp = gp_from_sim(res, cfg.seed)
        e = es.expected_annual_energy(gp, weib, duration_s=hours * 3600.0, rho=DEFAULT_RHO,
                                      area=geom.rotor_area, u_range=u_range, rated_power=regions.rated_power)
        s = es.expected_sigma(gp, weib, u_range)
        rows.append(AnnualRow(name, e / 1e6, s))
    return rows, weib


def report_json(path, payload: dict, cfg: RunConfig) -> None:
    payload = {"version": __version__, "config_hash": cfg.digest, "seed": cfg.seed, **payload}
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(type(o))
