"""
Минимальный стек полносвязных сетей на numpy

Прямой и обратный проход (градиенты по параметрам и по входу), MSE,
ADAM и мини-батчевое обучение U-модели. Все функции работают и с одним
вектором, и с батчем строк.
"""

from __future__ import annotations

import logging
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import expit
from tqdm import tqdm

from xai_chest.models.nn_models import (
    Activation,
    AdamState,
    Dataset,
    ForwardCache,
    Mlp,
    ParamGrads,
    TrainConfig,
    TrainHistory,
)
from xai_chest.utils.errors import DegenerateInputError, NumericError, SizeError
from xai_chest.utils.seeding import SeedStream, derive_seed, make_rng

logger = logging.getLogger(__name__)

# objective(model, x, targets, epoch, batch_index) -> (loss, grads)
Objective = Callable[[Mlp, np.ndarray, np.ndarray, int, int], tuple[float, ParamGrads]]


def stack_complex(v: np.ndarray) -> np.ndarray:
    """[Re(v), Im(v)] по последней оси"""
    v = np.asarray(v)
    return np.concatenate([v.real, v.imag], axis=-1).astype(np.float64)


def unstack_real(x: np.ndarray) -> np.ndarray:
    """Обратная к stack_complex операция"""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] % 2:
        raise SizeError(f"cannot unstack odd length {x.shape[-1]}")
    m = x.shape[-1] // 2
    return x[..., :m] + 1j * x[..., m:]


def init_mlp(
    layer_dims: Sequence[int],
    seed: int,
    output_activation: Activation = Activation.IDENTITY,
) -> Mlp:
    """
    Инициализация весов

    He-uniform для слоёв с ReLU, Glorot-uniform для выходного слоя,
    нулевые смещения.
    """
    dims = tuple(int(d) for d in layer_dims)
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    last = len(dims) - 2
    for l in range(len(dims) - 1):
        fan_in, fan_out = dims[l], dims[l + 1]
        limit = np.sqrt(6.0 / fan_in) if l < last else np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return Mlp(
        layer_dims=dims,
        weights=weights,
        biases=biases,
        hidden_activation=Activation.RELU,
        output_activation=output_activation,
    )


def _output(z: np.ndarray, activation: Activation) -> np.ndarray:
    if activation == Activation.SIGMOID:
        return expit(z)
    if activation == Activation.RELU:
        return np.maximum(z, 0.0)
    return z


def forward(model: Mlp, x: np.ndarray) -> tuple[np.ndarray, ForwardCache]:
    """Аффинные слои с ReLU и выходной активацией; кэш хранит пре-активации"""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != model.input_dim:
        raise SizeError(f"input width {x.shape[-1]} != model input dim {model.input_dim}")
    single = x.ndim == 1
    a = x[None, :] if single else x
    pre, acts = [], [a]
    for l, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = a @ w + b
        pre.append(z)
        a = np.maximum(z, 0.0) if l < model.num_layers - 1 else _output(z, model.output_activation)
        acts.append(a)
    y = a[0] if single else a
    return y, ForwardCache(inputs=x, pre_activations=pre, activations=acts)


def predict(model: Mlp, x: np.ndarray) -> np.ndarray:
    return forward(model, x)[0]


def backward(model: Mlp, cache: ForwardCache, grad_output: np.ndarray) -> tuple[ParamGrads, np.ndarray]:
    """
    Обратный проход

    Returns:
        (градиенты по весам и смещениям, градиент по входу той же формы, что и вход)
    """
    delta = np.asarray(grad_output, dtype=np.float64)
    out = cache.activations[-1]
    single = delta.ndim == 1
    if single:
        delta = delta[None, :]
    if delta.shape != out.shape:
        raise SizeError(f"grad_output shape {delta.shape} != output shape {out.shape}")
    if model.output_activation == Activation.SIGMOID:
        delta = delta * out * (1.0 - out)
    elif model.output_activation == Activation.RELU:
        delta = delta * (cache.pre_activations[-1] > 0)

    grad_w: list[np.ndarray] = [np.empty(0)] * model.num_layers
    grad_b: list[np.ndarray] = [np.empty(0)] * model.num_layers
    for l in range(model.num_layers - 1, -1, -1):
        grad_w[l] = cache.activations[l].T @ delta
        grad_b[l] = delta.sum(axis=0)
        delta = delta @ model.weights[l].T
        if l > 0:
            delta = delta * (cache.pre_activations[l - 1] > 0)
    input_grad = delta[0] if single else delta
    return ParamGrads(weights=grad_w, biases=grad_b), input_grad


def mse_loss(pred: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    """Среднеквадратичная ошибка по всем координатам и её градиент по pred"""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise SizeError(f"pred shape {pred.shape} != target shape {target.shape}")
    diff = pred - target
    return float(np.mean(diff ** 2)), 2.0 * diff / diff.size


def adam_step(model: Mlp, state: AdamState, grads: ParamGrads, config: TrainConfig) -> tuple[Mlp, AdamState]:
    """Шаг ADAM с поправкой смещения моментов; возвращает новые объекты"""
    if len(grads.weights) != model.num_layers or len(grads.biases) != model.num_layers:
        raise SizeError("gradient layer count does not match the model")
    b1, b2, eps = config.adam_beta1, config.adam_beta2, config.adam_eps
    t = state.step + 1
    corr1 = 1.0 - b1 ** t
    corr2 = 1.0 - b2 ** t

    def update(param: np.ndarray, grad: np.ndarray, m: np.ndarray, v: np.ndarray):
        if grad.shape != param.shape:
            raise SizeError(f"gradient shape {grad.shape} != parameter shape {param.shape}")
        m_new = b1 * m + (1.0 - b1) * grad
        v_new = b2 * v + (1.0 - b2) * grad * grad
        step = config.learning_rate * (m_new / corr1) / (np.sqrt(v_new / corr2) + eps)
        return param - step, m_new, v_new

    new_w, new_b, mw, mb, vw, vb = [], [], [], [], [], []
    for l in range(model.num_layers):
        w, m, v = update(model.weights[l], grads.weights[l], state.m_weights[l], state.v_weights[l])
        new_w.append(w)
        mw.append(m)
        vw.append(v)
        b, m, v = update(model.biases[l], grads.biases[l], state.m_biases[l], state.v_biases[l])
        new_b.append(b)
        mb.append(m)
        vb.append(v)
    new_state = AdamState(m_weights=mw, m_biases=mb, v_weights=vw, v_biases=vb, step=t)
    return model.with_parameters(new_w, new_b), new_state


def mse_objective(model: Mlp, x: np.ndarray, targets: np.ndarray, epoch: int, batch_index: int):
    y, cache = forward(model, x)
    loss, grad = mse_loss(y, targets)
    grads, _ = backward(model, cache, grad)
    return loss, grads


def fit_minibatch(
    model: Mlp,
    dataset: Dataset,
    config: TrainConfig,
    objective: Objective,
    desc: str = "train",
    progress: bool = False,
) -> tuple[Mlp, TrainHistory]:
    """
    Общий цикл мини-батчевого обучения ADAM

    Перестановка строк на эпоху e берётся из потока SHUFFLE с счётчиком e.
    Ранняя остановка - если потеря эпохи не улучшилась на min_delta за
    patience эпох подряд.
    """
    history = TrainHistory()
    n = len(dataset)
    state = AdamState.zeros_like(model)
    best = np.inf
    stale = 0
    epochs = tqdm(range(config.epochs), desc=desc, disable=not progress, leave=False)
    for epoch in epochs:
        order = make_rng(config.seed, SeedStream.SHUFFLE, epoch).permutation(n)
        total = 0.0
        for batch_index, start in enumerate(range(0, n, config.batch_size)):
            rows = order[start:start + config.batch_size]
            x = dataset.inputs[rows].astype(np.float64)
            t = dataset.targets[rows].astype(np.float64)
            loss, grads = objective(model, x, t, epoch, batch_index)
            if not np.isfinite(loss):
                raise NumericError(f"{desc}: non-finite loss at epoch {epoch}, batch {batch_index}")
            model, state = adam_step(model, state, grads, config)
            total += loss * rows.size
        epoch_loss = total / n
        history.losses.append(epoch_loss)
        if progress:
            epochs.set_postfix(loss=f"{epoch_loss:.3e}")
        if config.patience is not None:
            if epoch_loss < best - config.min_delta:
                best, stale = epoch_loss, 0
            else:
                stale += 1
                if stale >= config.patience:
                    history.stopped_early = True
                    logger.info(f"{desc}: early stop after epoch {epoch + 1} (loss {epoch_loss:.4e})")
                    break
    return model, history


def train_u(
    dataset: Dataset,
    arch: Sequence[int],
    config: TrainConfig,
    progress: bool = False,
) -> tuple[Mlp, TrainHistory]:
    """
    Обучение U-модели на MSE

    Args:
        dataset: пары (вход Φ, истинный канал)
        arch: размеры слоёв (вход, скрытые..., выход)
        config: гиперпараметры; config.seed задаёт инициализацию и перемешивание

    Returns:
        (обученная модель, история потерь по эпохам)
    """
    if len(dataset) == 0:
        raise DegenerateInputError("cannot train on an empty dataset")
    arch = tuple(int(d) for d in arch)
    if arch[0] != dataset.d_in or arch[-1] != dataset.d_out:
        raise SizeError(f"architecture {arch} does not fit dataset ({dataset.d_in} -> {dataset.d_out})")
    model = init_mlp(arch, derive_seed(config.seed, SeedStream.INIT))
    model, history = fit_minibatch(model, dataset, config, mse_objective, desc="U model", progress=progress)
    if history.losses:
        logger.info(f"U model {arch}: {len(history.losses)} epochs, final MSE {history.losses[-1]:.4e}")
    return model, history


def evaluate_mse(model: Mlp, dataset: Dataset, max_rows: Optional[int] = None) -> float:
    """MSE модели на датасете (или его первых max_rows строках)"""
    rows = slice(None) if max_rows is None else slice(0, max_rows)
    pred = predict(model, dataset.inputs[rows].astype(np.float64))
    return mse_loss(pred, dataset.targets[rows].astype(np.float64))[0]
