"""User-facing smoke test of the model's invariants (``quietwind validate``)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import acoustics as ac
from . import agent, oracles, qnet
from .environment import (PITCH_BOUNDS, RPM_BOUNDS, WIND_BOUNDS, EnvState, RewardConfig, TurbineEnv,
                          SteadyWind, in_bounds, reward)
from .turbine_model import BETZ_LIMIT, RPM_TO_RAD_S, default_turbine, rotor_performance

TOY_CONFIG = agent.TrainConfig(total_env_interactions=100_000, lr=2e-3, gamma=0.8, seed=1)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def check_reward() -> CheckResult:
    cfg = RewardConfig(cp_nom=0.45)
    env = TurbineEnv(reward_cfg=cfg)
    out = env.step(EnvState(10.0, 18.0, 0.0), 0, SteadyWind(10.0))
    vals = (reward(0.45, 45.0, cfg) - 1.0, reward(0.0, 50.0, cfg) + 1.0, out.reward + 3.0)
    worst = max(abs(v) for v in vals)
    return CheckResult("reward algebra", worst <= 1e-12 and out.boundary_violation, f"max error {worst:.1e}")


def check_bem(n: int = 7) -> CheckResult:
    geom = default_turbine()
    worst_cp, worst_rel = -np.inf, 0.0
    for u in np.linspace(*WIND_BOUNDS, n):
        for rpm in np.linspace(*RPM_BOUNDS, n):
            for th in np.linspace(*PITCH_BOUNDS, n):
                if not in_bounds(EnvState(u, rpm, th), geom.blade_radius):
                    continue
                p = rotor_performance(geom, u, rpm, th)
                worst_cp = max(worst_cp, p.cp)
                ref = 0.5 * 1.225 * geom.rotor_area * p.cp * u**3
                if ref != 0.0:
                    worst_rel = max(worst_rel, abs(p.torque * rpm * RPM_TO_RAD_S - ref) / abs(ref))
    ok = worst_cp < BETZ_LIMIT and worst_rel < 1e-9
    return CheckResult("BEM Betz bound and power consistency", ok,
                       f"max Cp {worst_cp:.4f}, torque*omega vs Cp power {worst_rel:.1e}")


def check_decibels() -> CheckResult:
    two = ac.SplSpectrum(ac.BAND_CENTERS, np.full(31, 40.0))
    summed = ac.combine_uncorrelated([two, two]).levels[0]
    aw_1k = float(ac.a_weighting_db(1000.0))
    ok = abs(summed - 43.0103) < 1e-4 and abs(aw_1k) < 0.1
    return CheckResult("decibel algebra", ok, f"40+40 dB = {summed:.4f} dB, A(1 kHz) = {aw_1k:+.3f} dB")


def check_gradient(seed: int = 0) -> CheckResult:
    rng = np.random.default_rng(seed)
    w = qnet.init_weights(rng, (3, 16, 8, 5))
    for _, b in w.layers:
        b[:] = rng.normal(0.0, 0.1, b.shape)
    x = rng.uniform(-1, 1, (6, 3))
    err = oracles.gradient_check(w, x, rng.integers(0, 5, 6), rng.normal(size=6))
    return CheckResult("Q-network gradient check", err < 1e-4, f"max relative error {err:.1e}")


def check_toy_mdp() -> CheckResult:
    toy = oracles.ToyMdp()
    res = agent.train(toy, TOY_CONFIG, sizes=(toy.n_states, toy.n_actions))
    err = float(np.max(np.abs(toy.q_table(res.weights) - toy.q_star(TOY_CONFIG.gamma))))
    return CheckResult("DDQN toy-MDP oracle", err < 1e-2, f"max |Q - Q*| = {err:.2e}")


def run_checks(seed: int = 0) -> list:
    return [check_reward(), check_bem(), check_decibels(), check_gradient(seed), check_toy_mdp()]
