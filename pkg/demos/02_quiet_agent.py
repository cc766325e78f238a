"""Train the noise-aware agent at desk scale and follow it from four starts.

Uses the bundled configuration (20,000 interactions, seed 0), then rolls the
greedy policy out at a steady 10 m/s from the four published initial
conditions and compares each end point with the best Cp reachable on the
action lattice under the 45 dB A threshold. Takes a few minutes:

    python3 demos/02_quiet_agent.py [seed]
"""

import sys

from quietwind import agent
from quietwind import simulation as sim
from quietwind.environment import EnvState

cfg = sim.load_config(seed=int(sys.argv[1]) if len(sys.argv) > 1 else None)
res, env = sim.run_training(cfg, "quiet")
first, last = res.mean_q_trend()
print(f"trained {res.log[-1].env_steps} steps; mean taken-action Q {first:.3f} -> {last:.3f}")

starts = sim.parse_initial_states(cfg.get("pareto", "initial_states"))
for i, (rpm0, th0) in enumerate(starts, start=1):
    traj = agent.greedy_rollout(res.weights, env, 60, EnvState(10.0, rpm0, th0))
    end = traj[-1]
    best_cp, best_rpm, best_th, best_db = sim.constrained_optimum(env, 10.0, start=(rpm0, th0))
    print(f"case {i}: ({rpm0:5.2f} rpm, {th0:5.2f} deg) -> ({end.next_state.rotor_speed:5.2f}, "
          f"{end.next_state.pitch:5.2f})  Cp {end.cp:.3f}  {end.oaspl:5.2f} dB A   "
          f"lattice optimum ({best_rpm:5.2f}, {best_th:5.2f}) Cp {best_cp:.3f}")
