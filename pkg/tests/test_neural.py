"""
Tests for the dense network stack: forward/backward, loss, ADAM and training
"""

import numpy as np
import pytest

from xai_chest.models.nn_models import Activation, AdamState, Dataset, Mlp, ParamGrads, TrainConfig
from xai_chest.services.neural_service import (
    adam_step,
    backward,
    evaluate_mse,
    forward,
    init_mlp,
    mse_loss,
    predict,
    stack_complex,
    train_u,
    unstack_real,
)
from xai_chest.utils.errors import DegenerateInputError, NumericError, SizeError
from xai_chest.utils.seeding import SeedStream, derive_seed

pytestmark = pytest.mark.unit

FD_STEP = 1e-6


def _zeros_model(dims, output=Activation.IDENTITY):
    return Mlp(
        layer_dims=dims,
        weights=[np.zeros((dims[l], dims[l + 1])) for l in range(len(dims) - 1)],
        biases=[np.zeros(dims[l + 1]) for l in range(len(dims) - 1)],
        output_activation=output,
    )


def _loss(model, x, t):
    return mse_loss(predict(model, x), t)[0]


def test_stack_and_unstack():
    """Test stacking keeps real then imaginary halves"""
    np.testing.assert_array_equal(stack_complex(np.array([1 + 2j])), [1.0, 2.0])
    np.testing.assert_array_equal(stack_complex(np.zeros(3, dtype=complex)), np.zeros(6))
    v = np.random.default_rng(0).standard_normal(7) + 1j * np.random.default_rng(1).standard_normal(7)
    np.testing.assert_array_equal(unstack_real(stack_complex(v)), v)
    with pytest.raises(SizeError):
        unstack_real(np.ones(3))


def test_zero_network_outputs_zero():
    """Test zero weights and biases with identity output give zeros"""
    model = _zeros_model((3, 4, 2))
    np.testing.assert_array_equal(predict(model, np.array([1.0, -2.0, 3.0])), np.zeros(2))


def test_relu_single_layer():
    """Test an identity layer with ReLU output clips negatives"""
    model = Mlp(layer_dims=(2, 2), weights=[np.eye(2)], biases=[np.zeros(2)], output_activation=Activation.RELU)
    np.testing.assert_array_equal(predict(model, np.array([-1.0, 2.0])), [0.0, 2.0])


def test_sigmoid_of_zero_is_half():
    """Test a sigmoid output with zero pre-activation is 0.5"""
    model = _zeros_model((3, 5, 4), output=Activation.SIGMOID)
    np.testing.assert_allclose(predict(model, np.ones((2, 3))), 0.5)


def test_forward_checks_width():
    """Test an input of the wrong width is rejected"""
    with pytest.raises(SizeError):
        forward(_zeros_model((3, 2)), np.ones(4))


def test_zero_upstream_gradient():
    """Test grad_output = 0 gives all-zero gradients"""
    model = init_mlp((4, 5, 2), seed=1)
    x = np.random.default_rng(2).standard_normal((3, 4))
    y, cache = forward(model, x)
    grads, input_grad = backward(model, cache, np.zeros_like(y))
    assert all(not g.any() for g in grads.weights + grads.biases)
    assert not input_grad.any()


@pytest.mark.parametrize("seed", range(24))
def test_gradients_match_finite_differences(seed):
    """Test backward against central differences on random small networks"""
    rng = np.random.default_rng(seed)
    depth = int(rng.integers(1, 4))
    dims = tuple(int(d) for d in rng.integers(1, 6, size=depth + 1))
    output = (Activation.IDENTITY, Activation.SIGMOID)[seed % 2]
    model = init_mlp(dims, seed=seed, output_activation=output)
    # nonzero biases keep ReLU pre-activations away from the kink
    model = model.from_flat(0.7 * rng.standard_normal(model.num_parameters))
    x = rng.standard_normal((3, dims[0]))
    t = rng.standard_normal((3, dims[-1]))

    y, cache = forward(model, x)
    _, grad_y = mse_loss(y, t)
    grads, input_grad = backward(model, cache, grad_y)

    theta = model.flat_parameters()
    analytic = np.concatenate([np.concatenate([w.ravel(), b]) for w, b in zip(grads.weights, grads.biases)])
    numeric = np.empty_like(theta)
    for i in range(theta.size):
        step = np.zeros_like(theta)
        step[i] = FD_STEP
        numeric[i] = (_loss(model.from_flat(theta + step), x, t) - _loss(model.from_flat(theta - step), x, t)) / (
            2 * FD_STEP
        )
    np.testing.assert_allclose(analytic, numeric, rtol=1e-5, atol=1e-6)

    numeric_x = np.empty_like(x)
    for idx in np.ndindex(x.shape):
        step = np.zeros_like(x)
        step[idx] = FD_STEP
        numeric_x[idx] = (_loss(model, x + step, t) - _loss(model, x - step, t)) / (2 * FD_STEP)
    np.testing.assert_allclose(input_grad, numeric_x, rtol=1e-5, atol=1e-6)


def test_mse_values():
    """Test MSE is zero for equal arrays and one for a unit offset"""
    t = np.arange(6.0).reshape(2, 3)
    assert mse_loss(t, t)[0] == 0.0
    assert mse_loss(t + 1, t)[0] == pytest.approx(1.0)
    with pytest.raises(SizeError):
        mse_loss(np.ones(3), np.ones(4))


def test_mse_gradient():
    """Test the MSE gradient against central differences"""
    rng = np.random.default_rng(4)
    pred, target = rng.standard_normal((2, 5)), rng.standard_normal((2, 5))
    _, grad = mse_loss(pred, target)
    for idx in np.ndindex(pred.shape):
        step = np.zeros_like(pred)
        step[idx] = FD_STEP
        numeric = (mse_loss(pred + step, target)[0] - mse_loss(pred - step, target)[0]) / (2 * FD_STEP)
        assert grad[idx] == pytest.approx(numeric, abs=1e-6)


def _grads_like(model, fill):
    return ParamGrads(
        weights=[np.full_like(w, fill) if np.isscalar(fill) else fill[0][l] for l, w in enumerate(model.weights)],
        biases=[np.full_like(b, fill) if np.isscalar(fill) else fill[1][l] for l, b in enumerate(model.biases)],
    )


def test_adam_zero_gradient_keeps_parameters():
    """Test a zero gradient leaves parameters unchanged"""
    model = init_mlp((3, 4, 2), seed=0)
    new, state = adam_step(model, AdamState.zeros_like(model), _grads_like(model, 0.0), TrainConfig())
    assert new.equals(model)
    assert state.step == 1


def test_adam_first_step_magnitude():
    """Test the first bias-corrected step is lr * g / (|g| + eps)"""
    model = init_mlp((3, 4, 2), seed=0)
    rng = np.random.default_rng(5)
    gw = [rng.standard_normal(w.shape) for w in model.weights]
    gb = [rng.standard_normal(b.shape) for b in model.biases]
    config = TrainConfig(learning_rate=0.01)
    new, _ = adam_step(model, AdamState.zeros_like(model), _grads_like(model, (gw, gb)), config)
    for old, upd, g in zip(model.weights + model.biases, new.weights + new.biases, gw + gb):
        expected = -config.learning_rate * g / (np.abs(g) + config.adam_eps)
        np.testing.assert_allclose(upd - old, expected, rtol=1e-9, atol=1e-15)


def test_adam_is_deterministic():
    """Test identical inputs give bit-identical outputs"""
    model = init_mlp((3, 4, 2), seed=0)
    grads = _grads_like(model, 0.3)
    a, sa = adam_step(model, AdamState.zeros_like(model), grads, TrainConfig())
    b, sb = adam_step(model, AdamState.zeros_like(model), grads, TrainConfig())
    assert a.equals(b)
    assert sa.step == sb.step


def test_adam_rejects_mismatched_gradients():
    """Test a gradient list of the wrong length is rejected"""
    model = init_mlp((3, 4, 2), seed=0)
    grads = ParamGrads(weights=model.weights[:1], biases=model.biases[:1])
    with pytest.raises(SizeError):
        adam_step(model, AdamState.zeros_like(model), grads, TrainConfig())


def test_init_variance_band():
    """Test He-uniform hidden layers and zero biases"""
    model = init_mlp((400, 300, 104), seed=3)
    scaled = model.weights[0].var() * 400
    assert 0.5 <= scaled <= 2.5
    assert model.weights[1].var() == pytest.approx(2.0 / (300 + 104), rel=0.1)
    assert all(not b.any() for b in model.biases)


def _linear_task(n=256):
    rng = np.random.default_rng(11)
    x = rng.random((n, 2))
    a = np.array([[0.5, -0.3], [0.2, 0.4]])
    return Dataset(inputs=x, targets=x @ a)


def test_train_u_converges_on_linear_map():
    """Test a one-hidden-layer network fits a linear map"""
    data = _linear_task()
    config = TrainConfig(learning_rate=5e-3, batch_size=32, epochs=500, seed=1)
    model, history = train_u(data, (2, 32, 2), config)
    assert len(history.losses) == 500
    assert evaluate_mse(model, data) < 1e-3


def test_train_u_zero_epochs_returns_initialization():
    """Test epochs = 0 returns the seeded initialization unchanged"""
    data = _linear_task(16)
    model, history = train_u(data, (2, 5, 2), TrainConfig(epochs=0, seed=9))
    assert history.losses == []
    assert model.equals(init_mlp((2, 5, 2), derive_seed(9, SeedStream.INIT)))


def test_train_u_is_deterministic():
    """Test the same seed gives identical weights and another seed differs"""
    data = _linear_task(64)
    config = TrainConfig(epochs=5, batch_size=16, seed=2)
    a, _ = train_u(data, (2, 6, 2), config)
    b, _ = train_u(data, (2, 6, 2), config)
    c, _ = train_u(data, (2, 6, 2), config.model_copy(update={"seed": 3}))
    assert a.equals(b)
    assert not a.equals(c)


def test_train_u_early_stop():
    """Test training stops once the loss fails to improve by min_delta"""
    data = _linear_task(32)
    _, history = train_u(data, (2, 4, 2), TrainConfig(epochs=50, patience=1, min_delta=10.0))
    assert history.stopped_early
    assert len(history.losses) == 2


def test_train_u_rejects_bad_inputs():
    """Test architecture mismatch, empty data and non-finite loss"""
    data = _linear_task(8)
    with pytest.raises(SizeError):
        train_u(data, (3, 4, 2), TrainConfig(epochs=1))
    with pytest.raises(DegenerateInputError):
        train_u(Dataset(inputs=np.zeros((0, 2)), targets=np.zeros((0, 2))), (2, 4, 2), TrainConfig(epochs=1))
    bad = Dataset(inputs=np.ones((4, 2)), targets=np.full((4, 2), np.inf))
    with pytest.raises(NumericError):
        train_u(bad, (2, 4, 2), TrainConfig(epochs=1))
