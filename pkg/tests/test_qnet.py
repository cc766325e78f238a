import numpy as np
import pytest

from quietwind.environment import EnvState
from quietwind.oracles import gradient_check
from quietwind.qnet import (
    ARCHITECTURE,
    MlpWeights,
    OptimizerState,
    ShapeMismatch,
    adam_step,
    backward,
    encode_state,
    forward,
    init_weights,
    load_weights,
    save_weights,
    soft_update,
)


@pytest.fixture
def weights():
    return init_weights(np.random.default_rng(11))


def _batch(rng, n):
    return rng.uniform(-1.0, 1.0, (n, 3)), rng.integers(0, 5, n), rng.normal(size=n)


# --- forward ------------------------------------------------------------------------

def test_default_architecture(weights):
    assert weights.sizes == ARCHITECTURE == (3, 128, 64, 5)
    assert [w.shape for w, _ in weights.layers] == [(3, 128), (128, 64), (64, 5)]
    assert weights.is_finite()


def test_zero_network_outputs_zero():
    assert np.array_equal(forward(MlpWeights.zeros(), np.array([0.3, -0.2, 0.9])), np.zeros(5))


def test_output_head_is_linear(weights):
    x = np.array([0.1, 0.5, -0.4])
    doubled = weights.copy()
    w, b = doubled.layers[-1]
    w *= 2.0
    assert np.allclose(forward(doubled, x), 2.0 * forward(weights, x), rtol=1e-14, atol=0.0)


def test_forward_is_deterministic_and_batch_consistent(weights):
    x = np.array([[0.2, -0.7, 0.1], [0.2, -0.7, 0.1]])
    q = forward(weights, x)
    assert np.array_equal(q[0], q[1])
    assert q.shape == (2, 5)
    assert np.array_equal(forward(weights, x[0]), forward(weights, x[0]))


def test_layers_must_chain():
    with pytest.raises(ShapeMismatch):
        MlpWeights([(np.zeros((3, 4)), np.zeros(4)), (np.zeros((5, 2)), np.zeros(2))])
    with pytest.raises(ShapeMismatch):
        MlpWeights([(np.zeros((3, 4)), np.zeros(3))])


# --- backward -----------------------------------------------------------------------

def test_zero_residual_gives_zero_loss_and_gradient(weights):
    rng = np.random.default_rng(0)
    s, a, _ = _batch(rng, 8)
    y = forward(weights, s)[np.arange(8), a]
    grads, loss = backward(weights, s, a, y)
    assert loss == 0.0
    assert all(not np.any(g) for g in grads)


def test_loss_is_mean_squared_residual(weights):
    rng = np.random.default_rng(1)
    s, a, y = _batch(rng, 6)
    q = forward(weights, s)[np.arange(6), a]
    assert backward(weights, s, a, y)[1] == pytest.approx(np.mean((y - q) ** 2), rel=1e-14)


def test_only_taken_action_unit_carries_error(weights):
    rng = np.random.default_rng(2)
    s, _, y = _batch(rng, 4)
    a = np.full(4, 3)
    grads, _ = backward(weights, s, a, y)
    head_w, head_b = grads[-2], grads[-1]
    assert np.all(head_w[:, [0, 1, 2, 4]] == 0.0) and np.all(head_b[[0, 1, 2, 4]] == 0.0)
    assert np.any(head_w[:, 3])


def test_single_sample_gradient_check(weights):
    rng = np.random.default_rng(3)
    s, a, y = _batch(rng, 1)
    assert gradient_check(weights, s, a, y) < 1e-4


def test_batch_gradient_check_small_network():
    rng = np.random.default_rng(4)
    w = init_weights(rng, (3, 16, 8, 5))
    s, a, y = _batch(rng, 10)
    assert gradient_check(w, s, a, y) < 1e-4


def test_duplicating_rows_changes_nothing(weights):
    rng = np.random.default_rng(5)
    s, a, y = _batch(rng, 7)
    g1, l1 = backward(weights, s, a, y)
    g2, l2 = backward(weights, np.vstack([s, s]), np.concatenate([a, a]), np.concatenate([y, y]))
    assert l2 == pytest.approx(l1, rel=1e-14)
    for x, z in zip(g1, g2):
        assert np.allclose(x, z, rtol=1e-12, atol=1e-15)


def test_empty_batch_rejected(weights):
    with pytest.raises(ValueError):
        backward(weights, np.zeros((0, 3)), np.zeros(0, dtype=int), np.zeros(0))


# --- Adam -----------------------------------------------------------------------------

def test_zero_gradient_leaves_weights(weights):
    before = weights.copy()
    opt = OptimizerState.for_weights(weights)
    adam_step(weights, [np.zeros_like(p) for p in weights.params()], opt)
    assert opt.step == 1
    for p, q in zip(weights.params(), before.params()):
        assert np.array_equal(p, q)


def test_first_step_is_learning_rate_times_sign():
    w = MlpWeights([(np.zeros((2, 2)), np.zeros(2))])
    opt = OptimizerState.for_weights(w, lr=1e-3)
    g = [np.array([[0.5, -2.0], [1e-3, -7.0]]), np.array([3.0, -0.25])]
    adam_step(w, g, opt)
    # with zeroed moments m_hat = g and v_hat = g^2, so the step is lr*g/(|g|+eps)
    for p, gi in zip(w.params(), g):
        assert np.allclose(p, -1e-3 * gi / (np.abs(gi) + 1e-8), rtol=1e-12, atol=0.0)


def test_constant_gradient_step_tends_to_learning_rate():
    w = MlpWeights([(np.zeros((1, 1)), np.zeros(1))])
    opt = OptimizerState.for_weights(w, lr=1e-2)
    g = [np.array([[0.37]]), np.array([-4.0])]
    prev = [p.copy() for p in w.params()]
    for _ in range(500):
        adam_step(w, g, opt)
        steps = [abs(float((p - q).item())) for p, q in zip(w.params(), prev)]
        prev = [p.copy() for p in w.params()]
    for s in steps:
        assert s == pytest.approx(1e-2, rel=0.05)


def test_adam_shape_mismatch(weights):
    opt = OptimizerState.for_weights(weights)
    with pytest.raises(ShapeMismatch):
        adam_step(weights, [np.zeros(3)], opt)
    other = init_weights(np.random.default_rng(0), (3, 4, 5))
    with pytest.raises(ShapeMismatch):
        adam_step(weights, [np.zeros_like(p) for p in weights.params()], OptimizerState.for_weights(other))


def test_regression_to_random_targets():
    rng = np.random.default_rng(21)
    w = init_weights(rng)
    states = rng.uniform(-1.0, 1.0, (32, 3))
    actions = rng.integers(0, 5, 32)
    targets = rng.uniform(-1.0, 1.0, 32)
    opt = OptimizerState.for_weights(w, lr=5e-4)
    for _ in range(5000):
        grads, loss = backward(w, states, actions, targets)
        adam_step(w, grads, opt)
    assert backward(w, states, actions, targets)[1] < 1e-3


# --- soft update ---------------------------------------------------------------------

def test_soft_update_limits(weights):
    target = init_weights(np.random.default_rng(99))
    frozen = target.copy()
    soft_update(weights, target, 0.0)
    assert all(np.array_equal(a, b) for a, b in zip(target.params(), frozen.params()))
    soft_update(weights, target, 1.0)
    assert all(np.array_equal(a, b) for a, b in zip(target.params(), weights.params()))


def test_soft_update_scalar_example():
    one = MlpWeights([(np.ones((1, 1)), np.ones(1))])
    zero = MlpWeights.zeros((1, 1))
    soft_update(one, zero, 0.1)
    assert zero.layers[0][0][0, 0] == pytest.approx(0.1, abs=1e-15)


def test_soft_update_shape_mismatch(weights):
    with pytest.raises(ShapeMismatch):
        soft_update(weights, MlpWeights.zeros((3, 5)), 0.5)


# --- encoding -------------------------------------------------------------------------

@pytest.mark.parametrize("state,expected", [
    (EnvState(4.0, 6.0, -5.0), (-1.0, -1.0, -1.0)),
    (EnvState(16.0, 18.0, 10.0), (1.0, 1.0, 1.0)),
    (EnvState(10.0, 12.0, 2.5), (0.0, 0.0, 0.0)),
])
def test_encoding_corners(state, expected):
    assert np.allclose(encode_state(state), expected, atol=1e-15)


# --- persistence ----------------------------------------------------------------------

def test_save_load_is_bitwise(tmp_path, weights):
    path = tmp_path / "w.qw"
    save_weights(weights, path)
    back = load_weights(path)
    assert back.sizes == weights.sizes
    assert all(np.array_equal(a, b) for a, b in zip(back.params(), weights.params()))
    x = np.random.default_rng(0).uniform(-1, 1, (20, 3))
    assert forward(back, x).tobytes() == forward(weights, x).tobytes()
    save_weights(back, tmp_path / "again.qw")
    assert (tmp_path / "again.qw").read_bytes() == path.read_bytes()


def test_load_rejects_foreign_and_truncated_files(tmp_path, weights):
    bad = tmp_path / "bad.qw"
    bad.write_bytes(b"not a weight file")
    with pytest.raises(ValueError):
        load_weights(bad)
    path = tmp_path / "w.qw"
    save_weights(weights, path)
    (tmp_path / "long.qw").write_bytes(path.read_bytes() + b"\0" * 8)
    with pytest.raises(ValueError, match="trailing"):
        load_weights(tmp_path / "long.qw")


def test_loaded_weights_are_writable(tmp_path, weights):
    save_weights(weights, tmp_path / "w.qw")
    back = load_weights(tmp_path / "w.qw")
    back.layers[0][0][0, 0] += 1.0
    assert back.layers[0][0][0, 0] == weights.layers[0][0][0, 0] + 1.0
