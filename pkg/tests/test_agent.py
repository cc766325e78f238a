from collections import namedtuple

import numpy as np
import pytest
from scipy import stats

from quietwind import agent, qnet
from quietwind.agent import (
    ReplayBuffer,
    TrainConfig,
    TrainingDiverged,
    Transition,
    TurbineTask,
    greedy_rollout,
    read_log,
    select_action,
    td_targets,
    train,
    write_log,
)
from quietwind.environment import Action, EnvState, TurbineEnv
from quietwind.oracles import ToyMdp
from quietwind.qnet import MlpWeights
from quietwind.validation import TOY_CONFIG


def table_net(q_rows):
    """Single linear layer on one-hot inputs: the network is the table itself."""
    q = np.asarray(q_rows, dtype=float)
    return MlpWeights([(q.copy(), np.zeros(q.shape[1]))])


def bias_net(q):
    """A 3-input network that ignores its input and always outputs ``q``."""
    return MlpWeights([(np.zeros((3, 5)), np.asarray(q, dtype=float))])


# --- configuration -------------------------------------------------------------------

def test_paper_defaults():
    cfg = TrainConfig()
    assert (cfg.total_env_interactions, cfg.steps_per_iteration, cfg.batch_size) == (200_000, 5, 64)
    assert (cfg.lr, cfg.gamma, cfg.epsilon, cfg.tau) == (5e-4, 0.95, 0.5, 0.1)
    assert (cfg.target_update_period, cfg.episode_length, cfg.buffer_capacity) == (20, 20, 50_000)
    assert TrainConfig.profile("desk").total_env_interactions == 20_000
    assert cfg.epsilon_at(150_000) == 0.5


@pytest.mark.parametrize("kw", [{"gamma": 1.0}, {"gamma": 0.0}, {"tau": 0.0}, {"tau": 1.5},
                                {"epsilon": -0.1}, {"batch_size": 0}, {"lr": 0.0}])
def test_config_invariants(kw):
    with pytest.raises(ValueError):
        TrainConfig(**kw)


def test_unknown_profile():
    with pytest.raises(ValueError, match="desk"):
        TrainConfig.profile("huge")


def test_optional_epsilon_decay():
    cfg = TrainConfig(total_env_interactions=100, epsilon_decay=True, epsilon_final=0.1)
    assert cfg.epsilon_at(0) == 0.5
    assert cfg.epsilon_at(50) == pytest.approx(0.3)
    assert cfg.epsilon_at(1000) == pytest.approx(0.1)


# --- action selection -----------------------------------------------------------------

def test_greedy_selection_is_deterministic():
    w = bias_net([0.1, 0.4, 0.2, -1.0, 0.0])
    rng = np.random.default_rng(0)
    assert {select_action(w, np.zeros(3), 0.0, rng) for _ in range(50)} == {1}


def test_ties_go_to_lowest_index():
    w = bias_net([1.0, 1.0, 0.0, 0.0, 0.0])
    assert select_action(w, np.zeros(3), 0.0, np.random.default_rng(0)) == 0


def test_full_exploration_is_uniform():
    w = bias_net([5.0, 0.0, 0.0, 0.0, 0.0])
    rng = np.random.default_rng(1)
    counts = np.bincount([select_action(w, np.zeros(3), 1.0, rng) for _ in range(10_000)], minlength=5)
    freq = counts / 10_000
    assert np.all((freq >= 0.18) & (freq <= 0.22))


# --- TD targets -----------------------------------------------------------------------

def test_myopic_targets_are_rewards():
    rng = np.random.default_rng(2)
    p, t = qnet.init_weights(rng), qnet.init_weights(rng)
    r = rng.normal(size=9)
    assert np.array_equal(td_targets(p, t, r, rng.uniform(-1, 1, (9, 3)), 0.0), r)


def test_identical_networks_give_dqn_target():
    rng = np.random.default_rng(3)
    w = qnet.init_weights(rng)
    s2 = rng.uniform(-1, 1, (12, 3))
    r = rng.normal(size=12)
    expected = r + 0.95 * qnet.forward(w, s2).max(axis=1)
    assert np.allclose(td_targets(w, w.copy(), r, s2, 0.95), expected, rtol=0, atol=1e-15)


def test_two_row_hand_fixture():
    primary = table_net([[0.0, 2.0, 1.0, 0.0, 0.0],
                         [3.0, 0.0, 0.0, 0.0, 5.0]])
    target = table_net([[9.0, 0.5, 7.0, 0.0, 0.0],
                        [1.0, 2.0, 3.0, 4.0, -2.0]])
    s2 = np.eye(2)
    y = td_targets(primary, target, [1.0, -1.0], s2, 0.5)
    # row 0: primary picks a1, target values it 0.5; row 1: primary picks a4, target says -2
    assert list(y) == [1.0 + 0.5 * 0.5, -1.0 + 0.5 * -2.0]


def test_double_q_decoupling():
    # the target net's own argmax (a0) is worth far more than its value of the
    # primary's argmax (a3); the target must come from the latter
    primary = table_net([[0.0, 0.0, 0.0, 1.0, 0.0]])
    target = table_net([[100.0, 0.0, 0.0, -4.0, 0.0]])
    y = td_targets(primary, target, [0.0], np.eye(1), 0.9)
    assert y[0] == pytest.approx(-3.6, abs=1e-15)
    swapped = td_targets(target, primary, [0.0], np.eye(1), 0.9)
    assert swapped[0] == 0.0


# --- soft update ----------------------------------------------------------------------

@pytest.mark.parametrize("tau,expected", [(1.0, 1.0), (0.0, 0.0), (0.1, 0.1)])
def test_soft_update_examples(tau, expected):
    target = MlpWeights.zeros((1, 1))
    agent.soft_update(MlpWeights([(np.ones((1, 1)), np.ones(1))]), target, tau)
    assert target.layers[0][0][0, 0] == pytest.approx(expected, abs=1e-15)


# --- replay buffer ----------------------------------------------------------------------

def _encode(s):
    return np.array([float(s), 0.0, 0.0])


def test_replay_ring_overwrites_oldest():
    buf = ReplayBuffer(4, 3, np.random.default_rng(0))
    for i in range(6):
        buf.add(Transition(i, 0, float(i), i + 1), _encode)
    assert len(buf) == 4
    assert sorted(buf.r.tolist()) == [2.0, 3.0, 4.0, 5.0]


def test_replay_sampling_is_uniform():
    buf = ReplayBuffer(100, 3, np.random.default_rng(7))
    for i in range(100):
        buf.add(Transition(i, i % 5, 0.0, i), _encode)
    counts = np.bincount(buf.sample_indices(100_000), minlength=100)
    assert stats.chisquare(counts).pvalue > 0.01


def test_replay_rejects_bad_input():
    with pytest.raises(ValueError):
        ReplayBuffer(0, 3, np.random.default_rng(0))
    buf = ReplayBuffer(2, 3, np.random.default_rng(0))
    with pytest.raises(ValueError):
        buf.sample_indices(1)
    with pytest.raises(ValueError):
        buf.add(Transition(0, 0, float("nan"), 1), _encode)


# --- training loop ------------------------------------------------------------------

def test_toy_mdp_matches_value_iteration():
    toy = ToyMdp()
    res = train(toy, TOY_CONFIG, sizes=(toy.n_states, toy.n_actions))
    err = np.max(np.abs(toy.q_table(res.weights) - toy.q_star(TOY_CONFIG.gamma)))
    assert err < 1e-2


def test_learning_waits_for_a_full_batch():
    toy = ToyMdp()
    res = train(toy, TrainConfig(total_env_interactions=200, seed=0), sizes=(12, 5))
    first = res.log[0]
    assert first.iteration == 13 and first.env_steps == 65
    assert res.log[-1].env_steps == 200


def test_target_blends_every_m_iterations():
    toy = ToyMdp()
    # 19 iterations stop one short of the first blend at iteration 20
    cfg = TrainConfig(total_env_interactions=5 * 19, seed=0)
    res = train(toy, cfg, sizes=(12, 5))
    init = train(toy, TrainConfig(total_env_interactions=5, seed=0), sizes=(12, 5)).target
    assert all(np.array_equal(a, b) for a, b in zip(res.target.params(), init.params()))
    res = train(toy, TrainConfig(total_env_interactions=5 * 20, seed=0), sizes=(12, 5))
    assert not all(np.array_equal(a, b) for a, b in zip(res.target.params(), init.params()))


def test_divergence_is_reported():
    Out = namedtuple("Out", "next_state reward boundary_violation")

    class Exploding(ToyMdp):
        def step(self, s, a):
            return Out(s, 1e200, False)

    with np.errstate(over="ignore"), pytest.raises(TrainingDiverged, match="iteration"):
        train(Exploding(), TrainConfig(total_env_interactions=500, seed=0), sizes=(12, 5))


@pytest.fixture(scope="module")
def steady_task():
    return TurbineTask(TurbineEnv(), wind_range=(10.0, 10.0))


def test_turbine_training_is_bitwise_reproducible(tmp_path, steady_task):
    cfg = TrainConfig(total_env_interactions=1000, seed=5)
    runs = []
    for k in range(2):
        res = train(steady_task, cfg)
        qnet.save_weights(res.weights, tmp_path / f"w{k}.qw")
        write_log(res.log, tmp_path / f"log{k}.jsonl")
        runs.append(res)
    assert (tmp_path / "w0.qw").read_bytes() == (tmp_path / "w1.qw").read_bytes()
    assert (tmp_path / "log0.jsonl").read_bytes() == (tmp_path / "log1.jsonl").read_bytes()
    assert len(runs[0].log) == 200 - 12
    assert read_log(tmp_path / "log0.jsonl") == runs[0].log


def test_checkpoints_are_written(tmp_path):
    toy = ToyMdp()
    cfg = TrainConfig(total_env_interactions=500, seed=0, checkpoint_every=50)
    res = train(toy, cfg, sizes=(12, 5), checkpoint_dir=tmp_path / "ck")
    files = sorted(p.name for p in (tmp_path / "ck").iterdir())
    assert files == ["checkpoint_0000050.qw", "checkpoint_0000100.qw"]
    last = qnet.load_weights(tmp_path / "ck" / files[-1])
    assert all(np.array_equal(a, b) for a, b in zip(last.params(), res.weights.params()))


# --- rollouts ---------------------------------------------------------------------------

def test_empty_rollout():
    w = bias_net(np.zeros(5))
    assert greedy_rollout(w, TurbineEnv(), 0, EnvState(10.0, 12.0, 0.0)) == []


def test_rollout_of_hold_policy_stays_put():
    w = bias_net([0.0, 0.0, 0.0, 0.0, 1.0])
    start = EnvState(10.0, 12.0, 2.0)
    traj = greedy_rollout(w, TurbineEnv(), 20, start)
    assert len(traj) == 20
    assert all(o.action == Action.HOLD for o in traj)
    assert traj[-1].next_state == start
