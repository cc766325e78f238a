"""Independent reference computations used by the test suite and ``validate``.

* a 12-state deterministic toy MDP with an exact value-iteration Q*,
* a central-difference gradient check for the Q-network.
"""

from __future__ import annotations

from collections import namedtuple

import numpy as np

from . import qnet

ToyOutcome = namedtuple("ToyOutcome", "next_state reward boundary_violation")


class ToyMdp:
    """Twelve states on a ring, five actions: +1, -1, +3, -3, stay.

    Moves that would cross the 0/11 seam are refused with a -1 reward (the toy
    analogue of a boundary violation); otherwise the reward is a fixed
    per-state payoff of the landing state minus a small action cost.
    """

    n_states = 12
    n_actions = 5
    state_dim = 12
    _moves = (1, -1, 3, -3, 0)
    _cost = (0.05, 0.05, 0.15, 0.15, 0.0)

    def __init__(self, seed: int = 7):
        rng = np.random.default_rng(seed)
        self.payoff = np.round(rng.uniform(0.0, 1.0, self.n_states), 3)

    def transition(self, s: int, a: int):
        nxt = s + self._moves[a]
        if not 0 <= nxt < self.n_states:
            return s, -1.0, True
        return nxt, float(self.payoff[nxt] - self._cost[a]), False

    def encode(self, s: int) -> np.ndarray:
        out = np.zeros(self.n_states)
        out[s] = 1.0
        return out

    def reset(self, rng: np.random.Generator) -> int:
        return int(rng.integers(self.n_states))

    def step(self, s: int, a: int) -> ToyOutcome:
        return ToyOutcome(*self.transition(s, a))

    def q_star(self, gamma: float, tol: float = 1e-13) -> np.ndarray:
        """Q* by value iteration to machine-level tolerance."""
        q = np.zeros((self.n_states, self.n_actions))
        table = [[self.transition(s, a) for a in range(self.n_actions)] for s in range(self.n_states)]
        while True:
            v = q.max(axis=1)
            new = np.array([[r + gamma * v[n] for n, r, _ in row] for row in table])
            if np.max(np.abs(new - q)) < tol:
                return new
            q = new

    def q_table(self, weights: qnet.MlpWeights) -> np.ndarray:
        return qnet.forward(weights, np.eye(self.n_states))


def gradient_check(weights: qnet.MlpWeights, states, actions, targets, h: float = 1e-5,
                   abs_floor: float = 1e-7) -> float:
    """Max relative error between analytic and central-difference gradients.

    Each parameter's error is |g_a - g_fd| / max(|g_a|, |g_fd|, abs_floor).
    """
    grads, _ = qnet.backward(weights, states, actions, targets)
    worst = 0.0
    for p, g in zip(weights.params(), grads):
        flat = p.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + h
            lp = qnet.backward(weights, states, actions, targets)[1]
            flat[i] = old - h
            lm = qnet.backward(weights, states, actions, targets)[1]
            flat[i] = old
            fd = (lp - lm) / (2.0 * h)
            err = abs(gflat[i] - fd) / max(abs(gflat[i]), abs(fd), abs_floor)
            worst = max(worst, err)
    return worst
