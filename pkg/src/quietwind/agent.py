"""Double deep Q-learning over the turbine environment.

The training loop is written against a small task interface so that the very
same code trains the 3-128-64-5 network on the turbine and a lookup table on
a toy MDP (see ``oracles``):

    task.n_actions, task.state_dim
    task.encode(state) -> 1-D float array
    task.reset(rng) -> initial state (also picks the episode's wind)
    task.step(state, action) -> object with .next_state, .reward, .boundary_violation
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from . import qnet
from .environment import N_ACTIONS, WIND_BOUNDS, EnvState, SteadyWind, TurbineEnv, WindProcess

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Transition:
    s: object
    a: int
    r: float
    s_next: object
    truncated: bool = False
    boundary_violation: bool = False


class ReplayBuffer:
    """Fixed-capacity ring of encoded transitions, sampled uniformly with replacement."""

    def __init__(self, capacity: int, state_dim: int, rng: np.random.Generator):
        if capacity <= 0:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.rng = rng
        self.s = np.zeros((capacity, state_dim))
        self.s_next = np.zeros((capacity, state_dim))
        self.a = np.zeros(capacity, dtype=np.int64)
        self.r = np.zeros(capacity)
        self.truncated = np.zeros(capacity, dtype=bool)
        self.violation = np.zeros(capacity, dtype=bool)
        self._next = 0
        self._size = 0

    def __len__(self):
        return self._size

    def add(self, t: Transition, encode) -> None:
        if not math.isfinite(t.r):
            raise ValueError("non-finite reward")
        i = self._next
        self.s[i] = encode(t.s)
        self.s_next[i] = encode(t.s_next)
        self.a[i] = t.a
        self.r[i] = t.r
        self.truncated[i] = t.truncated
        self.violation[i] = t.boundary_violation
        self._next = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def sample_indices(self, n: int) -> np.ndarray:
        if self._size == 0:
            raise ValueError("sampling from an empty buffer")
        return self.rng.integers(0, self._size, size=n)

    def sample(self, n: int):
        idx = self.sample_indices(n)
        return self.s[idx], self.a[idx], self.r[idx], self.s_next[idx]


@dataclass(frozen=True)
class TrainConfig:
    total_env_interactions: int = 200_000
    steps_per_iteration: int = 5
    batch_size: int = 64
    lr: float = 5e-4
    gamma: float = 0.95
    epsilon: float = 0.5
    tau: float = 0.1
    target_update_period: int = 20
    episode_length: int = 20
    buffer_capacity: int = 50_000
    seed: int = 0
    epsilon_decay: bool = False
    epsilon_final: float = 0.05
    checkpoint_every: int = 0

    def __post_init__(self):
        for name in ("total_env_interactions", "steps_per_iteration", "batch_size",
                     "target_update_period", "episode_length", "buffer_capacity"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("gamma must lie in (0, 1)")
        if not 0.0 < self.tau <= 1.0:
            raise ValueError("tau must lie in (0, 1]")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("epsilon must lie in [0, 1]")

    @classmethod
    def profile(cls, name: str, **overrides) -> TrainConfig:
        sizes = {"paper": 200_000, "desk": 20_000}
        if name not in sizes:
            raise ValueError(f"unknown profile {name!r}; expected one of {sorted(sizes)}")
        overrides.setdefault("total_env_interactions", sizes[name])
        return cls(**overrides)

    def epsilon_at(self, env_steps: int) -> float:
        if not self.epsilon_decay:
            return self.epsilon
        frac = min(env_steps / self.total_env_interactions, 1.0)
        return self.epsilon + frac * (self.epsilon_final - self.epsilon)


class TrainingDiverged(RuntimeError):
    pass


# --- policy and targets -------------------------------------------------------------

def greedy_action(q: np.ndarray) -> int:
    return int(np.argmax(q))  # first maximum, i.e. lowest index on ties


def select_action(weights: qnet.MlpWeights, s_enc, epsilon: float, rng: np.random.Generator) -> int:
    """Epsilon-greedy: uniform with probability epsilon, else argmax Q (lowest index on ties)."""
    if epsilon > 0.0 and rng.random() < epsilon:
        return int(rng.integers(weights.sizes[-1]))
    return greedy_action(qnet.forward(weights, s_enc))


def td_targets(primary: qnet.MlpWeights, target: qnet.MlpWeights, rewards, s_next, gamma: float) -> np.ndarray:
    """y = r + gamma * Q_target(s', argmax_a Q_primary(s', a)).

    Every row bootstraps: episode ends here are time limits, not terminations.
    """
    rewards = np.asarray(rewards, dtype=float)
    s_next = np.atleast_2d(np.asarray(s_next, dtype=float))
    a_star = np.argmax(qnet.forward(primary, s_next), axis=1)
    q_eval = qnet.forward(target, s_next)[np.arange(len(rewards)), a_star]
    return rewards + gamma * q_eval


soft_update = qnet.soft_update


# --- tasks ----------------------------------------------------------------------

class TurbineTask:
    """Training episodes on the turbine: a random steady wind per episode."""

    n_actions = N_ACTIONS
    state_dim = 3

    def __init__(self, env: TurbineEnv, wind_range=WIND_BOUNDS):
        self.env = env
        self.wind_range = wind_range
        self.wind: WindProcess | None = None

    @staticmethod
    def encode(state: EnvState) -> np.ndarray:
        return qnet.encode_state(state)

    def reset(self, rng: np.random.Generator) -> EnvState:
        u = float(rng.uniform(*self.wind_range))
        self.wind = SteadyWind(u)
        return self.env.sample_initial_state(rng, wind_speed=u)

    def step(self, state: EnvState, action: int):
        return self.env.step(state, action, self.wind)


# --- training --------------------------------------------------------------------

@dataclass(frozen=True)
class LogRecord:
    iteration: int
    env_steps: int
    loss: float
    mean_q: float
    epsilon: float


@dataclass
class TrainResult:
    weights: qnet.MlpWeights
    target: qnet.MlpWeights
    log: list
    config: TrainConfig

    def mean_q_trend(self, window: float = 0.1) -> tuple[float, float]:
        """Mean taken-action Q over the first and last ``window`` fraction of the log."""
        q = np.array([r.mean_q for r in self.log])
        k = max(1, int(len(q) * window))
        return float(q[:k].mean()), float(q[-k:].mean())


def write_log(records, path) -> None:
    with open(path, "w") as fh:
        for r in records:
            fh.write(json.dumps(asdict(r)) + "\n")


def read_log(path) -> list:
    with open(path) as fh:
        return [LogRecord(**json.loads(line)) for line in fh if line.strip()]


def train(task, cfg: TrainConfig, *, sizes=None, init: qnet.MlpWeights | None = None,
          checkpoint_dir=None, progress=None) -> TrainResult:
    """Double DQN with experience replay and soft target updates.

    Each iteration takes ``steps_per_iteration`` epsilon-greedy steps, then
    (once the buffer holds a full batch) one Adam step on the mean squared TD
    error. The target network is blended in every ``target_update_period``
    iterations. ``mean_q`` in the log is the primary network's Q-value of the
    actions actually taken during the iteration's environment steps.
    """
    seeds = np.random.SeedSequence(cfg.seed).spawn(3)
    rng_init, rng_act, rng_replay = (np.random.default_rng(s) for s in seeds)
    if sizes is None:
        sizes = (task.state_dim,) + qnet.ARCHITECTURE[1:-1] + (task.n_actions,)
    primary = init.copy() if init is not None else qnet.init_weights(rng_init, sizes)
    target = primary.copy()
    opt = qnet.OptimizerState.for_weights(primary, lr=cfg.lr)
    buffer = ReplayBuffer(cfg.buffer_capacity, task.state_dim, rng_replay)
    if checkpoint_dir is not None:
        checkpoint_dir = Path(checkpoint_dir)
        checkpoint_dir.mkdir(parents=True, exist_ok=True)

    records = []
    state = task.reset(rng_act)
    t_episode = 0
    env_steps = 0
    n_iter = -(-cfg.total_env_interactions // cfg.steps_per_iteration)
    for it in range(1, n_iter + 1):
        eps = cfg.epsilon_at(env_steps)
        q_taken = []
        for _ in range(cfg.steps_per_iteration):
            if env_steps >= cfg.total_env_interactions:
                break
            s_enc = task.encode(state)
            q = qnet.forward(primary, s_enc)
            if eps > 0.0 and rng_act.random() < eps:
                a = int(rng_act.integers(task.n_actions))
            else:
                a = greedy_action(q)
            q_taken.append(q[a])
            out = task.step(state, a)
            env_steps += 1
            t_episode += 1
            truncated = t_episode >= cfg.episode_length
            buffer.add(Transition(state, a, float(out.reward), out.next_state, truncated,
                                  bool(out.boundary_violation)), task.encode)
            if truncated:
                state = task.reset(rng_act)
                t_episode = 0
            else:
                state = out.next_state

        if len(buffer) < cfg.batch_size:
            continue
        s, a, r, s2 = buffer.sample(cfg.batch_size)
        y = td_targets(primary, target, r, s2, cfg.gamma)
        grads, loss = qnet.backward(primary, s, a, y)
        if not math.isfinite(loss):
            raise TrainingDiverged(f"non-finite loss at iteration {it} (env step {env_steps}); "
                                   f"max |y| = {np.max(np.abs(y)):.3g}")
        qnet.adam_step(primary, grads, opt)
        if it % cfg.target_update_period == 0:
            qnet.soft_update(primary, target, cfg.tau)
        rec = LogRecord(it, env_steps, loss, float(np.mean(q_taken)), eps)
        records.append(rec)
        if progress is not None:
            progress(rec)
        if checkpoint_dir is not None and cfg.checkpoint_every and it % cfg.checkpoint_every == 0:
            qnet.save_weights(primary, checkpoint_dir / f"checkpoint_{it:07d}.qw")
    return TrainResult(primary, target, records, cfg)


# --- evaluation ----------------------------------------------------------------------

def greedy_rollout(weights: qnet.MlpWeights, env: TurbineEnv, steps: int, initial_state: EnvState,
                   wind: WindProcess | None = None) -> list:
    """Epsilon-zero rollout; returns one StepOutcome per step.

    ``wind`` defaults to a steady wind at the initial state's speed; it is
    reset before the rollout starts.
    """
    if wind is None:
        wind = SteadyWind(initial_state.wind_speed)
    wind.reset()
    out = []
    state = initial_state
    for _ in range(steps):
        a = greedy_action(qnet.forward(weights, qnet.encode_state(state)))
        o = env.step(state, a, wind)
        out.append(o)
        state = o.next_state
    return out


def with_profile(cfg: TrainConfig, profile: str) -> TrainConfig:
    return replace(cfg, total_env_interactions=TrainConfig.profile(profile).total_env_interactions)
