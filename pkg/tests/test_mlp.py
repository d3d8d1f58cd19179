import math

import numpy as np
import pytest

from gametrace.errors import ConfigError, ShapeMismatchError
from gametrace.mlp import (
    AdamState,
    MlpConfig,
    MlpModel,
    adam_step,
    cross_entropy,
    init_params,
    mlp_backward,
    mlp_forward,
    mlp_train,
)

from oracles import adam_scalar_reference


def zero_model(input_dim=3, hidden=(4,), output_dim=2, activation="logistic"):
    cfg = MlpConfig(input_dim=input_dim, hidden_sizes=hidden, output_dim=output_dim,
                    hidden_activation=activation)
    dims = cfg.layer_dims
    weights = [np.zeros((a, b)) for a, b in zip(dims, dims[1:])]
    biases = [np.zeros(b) for b in dims[1:]]
    return MlpModel(weights=weights, biases=biases, config=cfg)


def test_zero_network_outputs_uniform_probabilities():
    model = zero_model()
    probs = mlp_forward(model, np.array([[1.0, -2.0, 3.0], [0.0, 0.0, 0.0]]))
    assert np.allclose(probs, 0.5)


def test_single_row_output_shape():
    model = zero_model()
    probs = mlp_forward(model, np.array([1.0, 2.0, 3.0]))
    assert probs.shape == (1, 2)


def test_forward_rows_sum_to_one():
    rng = np.random.default_rng(0)
    cfg = MlpConfig(input_dim=5, hidden_sizes=(7,), seed=1)
    w, b, _ = init_params(cfg)
    model = MlpModel(weights=w, biases=b, config=cfg)
    probs = mlp_forward(model, rng.normal(size=(50, 5)))
    assert np.all(np.abs(probs.sum(axis=1) - 1.0) < 1e-9)
    assert np.all(probs > 0.0) and np.all(probs < 1.0)


def test_forward_matches_hand_computed_2_2_2_network():
    cfg = MlpConfig(input_dim=2, hidden_sizes=(2,), hidden_activation="logistic")
    w1 = np.array([[0.5, -0.25], [0.75, 0.1]])
    b1 = np.array([0.1, -0.2])
    w2 = np.array([[1.0, -1.0], [0.5, 0.25]])
    b2 = np.array([0.0, 0.3])
    model = MlpModel(weights=[w1, w2], biases=[b1, b2], config=cfg)
    x1, x2 = 0.8, -0.4

    # scalar-by-scalar recomputation of the same arithmetic
    z1a = x1 * 0.5 + x2 * 0.75 + 0.1
    z1b = x1 * -0.25 + x2 * 0.1 + -0.2
    a1a = 1.0 / (1.0 + math.exp(-z1a))
    a1b = 1.0 / (1.0 + math.exp(-z1b))
    z2a = a1a * 1.0 + a1b * 0.5 + 0.0
    z2b = a1a * -1.0 + a1b * 0.25 + 0.3
    m = max(z2a, z2b)
    ea, eb = math.exp(z2a - m), math.exp(z2b - m)
    want = (ea / (ea + eb), eb / (ea + eb))

    probs = mlp_forward(model, np.array([[x1, x2]]))
    assert probs[0, 0] == pytest.approx(want[0], abs=1e-12)
    assert probs[0, 1] == pytest.approx(want[1], abs=1e-12)


def test_forward_shape_mismatch():
    model = zero_model(input_dim=3)
    with pytest.raises(ShapeMismatchError):
        mlp_forward(model, np.zeros((2, 4)))


def test_cross_entropy_perfect_predictions_near_zero():
    probs = np.array([[1.0, 0.0], [0.0, 1.0]])
    assert cross_entropy(probs, [0, 1]) == pytest.approx(0.0, abs=1e-12)


def test_cross_entropy_uniform_is_ln2():
    probs = np.full((4, 2), 0.5)
    assert cross_entropy(probs, [0, 1, 0, 1]) == pytest.approx(math.log(2.0), abs=1e-12)


def test_cross_entropy_matches_formula_oracle():
    rng = np.random.default_rng(2)
    raw = rng.random((10, 2)) + 0.05
    probs = raw / raw.sum(axis=1, keepdims=True)
    y = rng.integers(0, 2, size=10)
    want = sum(-math.log(probs[i, y[i]]) for i in range(10)) / 10
    assert cross_entropy(probs, y) == pytest.approx(want, abs=1e-12)


def test_cross_entropy_shape_mismatch():
    with pytest.raises(ShapeMismatchError):
        cross_entropy(np.full((3, 2), 0.5), [0, 1])


def test_output_bias_gradient_zero_at_symmetric_point():
    model = zero_model()
    x = np.array([[1.0, 2.0, 3.0], [-1.0, 0.5, 2.0], [0.3, 0.3, 0.3], [2.0, -2.0, 1.0]])
    y = [0, 1, 0, 1]  # balanced
    _, gb = mlp_backward(model, x, y)
    assert np.allclose(gb[-1], 0.0, atol=1e-15)


def test_duplicating_batch_rows_leaves_gradients_unchanged():
    cfg = MlpConfig(input_dim=3, hidden_sizes=(4,), seed=3)
    w, b, _ = init_params(cfg)
    model = MlpModel(weights=w, biases=b, config=cfg)
    rng = np.random.default_rng(4)
    x = rng.normal(size=(6, 3))
    y = rng.integers(0, 2, size=6)
    gw1, gb1 = mlp_backward(model, x, y)
    gw2, gb2 = mlp_backward(model, np.vstack([x, x]), np.concatenate([y, y]))
    for a, c in zip(gw1 + gb1, gw2 + gb2):
        assert np.allclose(a, c, atol=1e-12)


@pytest.mark.parametrize("activation", ["logistic", "relu"])
def test_gradient_check_central_differences(activation):
    cfg = MlpConfig(input_dim=3, hidden_sizes=(4,), output_dim=2, seed=42,
                    hidden_activation=activation)
    weights, biases, _ = init_params(cfg)
    model = MlpModel(weights=weights, biases=biases, config=cfg)
    rng = np.random.default_rng(7)
    x = rng.normal(size=(12, 3))
    y = rng.integers(0, 2, size=12)
    gw, gb = mlp_backward(model, x, y)
    analytic = gw + gb
    params = model.weights + model.biases

    h = 1e-5
    worst = 0.0
    for p, g in zip(params, analytic):
        it = np.nditer(p, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = p[idx]
            p[idx] = orig + h
            up = cross_entropy(mlp_forward(model, x), y)
            p[idx] = orig - h
            down = cross_entropy(mlp_forward(model, x), y)
            p[idx] = orig
            numeric = (up - down) / (2 * h)
            denom = max(abs(numeric), abs(g[idx]), 1e-8)
            worst = max(worst, abs(numeric - g[idx]) / denom)
    assert worst < 1e-4


def test_backward_empty_batch_rejected():
    model = zero_model()
    with pytest.raises(ShapeMismatchError):
        mlp_backward(model, np.zeros((0, 3)), [])


def test_adam_zero_gradient_keeps_parameters():
    params = [np.array([[1.0, -2.0]]), np.array([0.5])]
    grads = [np.zeros_like(p) for p in params]
    state = AdamState.zeros_like(params)
    new_params, _ = adam_step(params, grads, state, t=1, lr=0.001)
    for p, q in zip(params, new_params):
        assert np.array_equal(p, q)


def test_adam_first_step_magnitude():
    params = [np.zeros((2, 2))]
    grads = [np.ones((2, 2))]
    state = AdamState.zeros_like(params)
    new_params, _ = adam_step(params, grads, state, t=1, lr=0.001)
    # bias-corrected m_hat = v_hat = 1, so the update is -lr / (1 + eps)
    expected = -0.001 / (1.0 + 1e-8)
    assert np.allclose(new_params[0], expected, atol=1e-15)


def test_adam_trajectory_matches_scalar_reference():
    rng = np.random.default_rng(9)
    grads_seq = rng.normal(size=10).tolist()
    want = adam_scalar_reference(0.7, grads_seq, lr=0.01)

    params = [np.array([0.7])]
    state = AdamState.zeros_like(params)
    got = []
    for t, g in enumerate(grads_seq, start=1):
        params, state = adam_step(params, [np.array([g])], state, t=t, lr=0.01)
        got.append(float(params[0][0]))
    assert got == pytest.approx(want, abs=1e-14)


def test_adam_rejects_bad_t_and_shapes():
    params = [np.zeros(2)]
    state = AdamState.zeros_like(params)
    with pytest.raises(ConfigError):
        adam_step(params, [np.zeros(2)], state, t=0, lr=0.1)
    with pytest.raises(ShapeMismatchError):
        adam_step(params, [np.zeros(3)], state, t=1, lr=0.1)


def test_config_rejects_zero_epochs():
    with pytest.raises(ConfigError):
        MlpConfig(input_dim=2, epochs=0)


def test_train_is_bitwise_deterministic():
    x, y = _blobs(seed=11, n=120)
    cfg = MlpConfig(input_dim=2, hidden_sizes=(8,), epochs=12, batch_size=32, seed=5)
    a = mlp_train(cfg, (x, y))
    b = mlp_train(cfg, (x, y))
    assert a.loss_history == b.loss_history
    for wa, wb in zip(a.weights, b.weights):
        assert np.array_equal(wa, wb)


def _blobs(seed=0, n=200, gap=5.0):
    # bounded noise keeps the classes linearly separable with margin >= 1
    rng = np.random.default_rng(seed)
    half = n // 2
    x0 = rng.uniform(-2.0, 2.0, size=(half, 2)) + [-gap / 2, 0.0]
    x1 = rng.uniform(-2.0, 2.0, size=(n - half, 2)) + [gap / 2, 0.0]
    x = np.vstack([x0, x1])
    y = np.array([0] * half + [1] * (n - half))
    order = rng.permutation(n)
    return x[order], y[order]


def test_train_separates_blobs():
    x, y = _blobs(seed=21, n=240)
    cfg = MlpConfig(input_dim=2, hidden_sizes=(128,), epochs=100, learning_rate=0.001,
                    batch_size=256, seed=42)
    model = mlp_train(cfg, (x, y))
    acc = float((model.predict(x) == y).mean())
    assert acc >= 0.98
    assert len(model.loss_history) == 100
    assert all(np.isfinite(v) for v in model.loss_history)


def test_train_loss_nonincreasing_early_epochs():
    x, y = _blobs(seed=33, n=200)
    cfg = MlpConfig(input_dim=2, hidden_sizes=(16,), epochs=10, batch_size=64, seed=2)
    model = mlp_train(cfg, (x, y))
    hist = model.loss_history
    for a, b in zip(hist, hist[1:]):
        assert b <= a + 1e-3  # minibatch noise allowance


def test_train_rejects_nan_inputs_and_bad_labels():
    cfg = MlpConfig(input_dim=2, epochs=1)
    x = np.array([[1.0, np.nan]])
    with pytest.raises(ConfigError):
        mlp_train(cfg, (x, np.array([0])))
    with pytest.raises(ConfigError):
        mlp_train(cfg, (np.array([[1.0, 2.0]]), np.array([5])))
