"""
Модели нейросетевого стека: полносвязная сеть (MLP), состояние ADAM,
параметры обучения и датасет пар (оценка Φ, истинный канал)
"""

from __future__ import annotations

from enum import Enum
from typing import Any, NamedTuple, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class Activation(str, Enum):
    RELU = "relu"
    IDENTITY = "identity"
    SIGMOID = "sigmoid"


def _readonly(arrays: Any, dtype: Any = np.float64) -> list[np.ndarray]:
    out = []
    for a in arrays:
        arr = np.array(a, dtype=dtype, copy=True)
        arr.setflags(write=False)
        out.append(arr)
    return out


class Mlp(BaseModel):
    """Полносвязная сеть

    Матрица слоя l хранится как (fan_in × fan_out): для батча
    ``z = x @ W + b``. Скрытые слои - ReLU, выход - Identity (U-модель)
    или Sigmoid (N-модель).
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True, extra="forbid")

    layer_dims: tuple[int, ...]
    weights: list[Any]
    biases: list[Any]
    hidden_activation: Activation = Activation.RELU
    output_activation: Activation = Activation.IDENTITY

    @field_validator("weights", "biases", mode="before")
    @classmethod
    def _as_float(cls, v: Any) -> list[np.ndarray]:
        return _readonly(v)

    @model_validator(mode="after")
    def _check_chain(self) -> "Mlp":
        dims = self.layer_dims
        if len(dims) < 2 or any(d < 1 for d in dims):
            raise ValueError(f"layer_dims needs at least two positive sizes, got {dims}")
        if len(self.weights) != len(dims) - 1 or len(self.biases) != len(dims) - 1:
            raise ValueError("one weight matrix and one bias vector per layer are required")
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (dims[l], dims[l + 1]):
                raise ValueError(f"layer {l}: weight shape {w.shape} != {(dims[l], dims[l + 1])}")
            if b.shape != (dims[l + 1],):
                raise ValueError(f"layer {l}: bias shape {b.shape} != {(dims[l + 1],)}")
        if self.hidden_activation != Activation.RELU:
            raise ValueError("hidden layers use ReLU")
        return self

    @property
    def input_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def output_dim(self) -> int:
        return self.layer_dims[-1]

    @property
    def num_layers(self) -> int:
        return len(self.layer_dims) - 1

    @property
    def num_parameters(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def with_parameters(self, weights: list[np.ndarray], biases: list[np.ndarray]) -> "Mlp":
        """Новая сеть с той же топологией и другими параметрами"""
        return Mlp(
            layer_dims=self.layer_dims,
            weights=weights,
            biases=biases,
            hidden_activation=self.hidden_activation,
            output_activation=self.output_activation,
        )

    def flat_parameters(self) -> np.ndarray:
        """Все параметры одним вектором: W0, b0, W1, b1, ..."""
        parts = []
        for w, b in zip(self.weights, self.biases):
            parts.append(w.ravel())
            parts.append(b.ravel())
        return np.concatenate(parts)

    def from_flat(self, theta: np.ndarray) -> "Mlp":
        theta = np.asarray(theta, dtype=np.float64)
        if theta.size != self.num_parameters:
            raise ValueError(f"expected {self.num_parameters} parameters, got {theta.size}")
        weights, biases, pos = [], [], 0
        for w, b in zip(self.weights, self.biases):
            weights.append(theta[pos:pos + w.size].reshape(w.shape))
            pos += w.size
            biases.append(theta[pos:pos + b.size])
            pos += b.size
        return self.with_parameters(weights, biases)

    def equals(self, other: "Mlp") -> bool:
        """Побитовое совпадение топологии и параметров"""
        if (self.layer_dims, self.hidden_activation, self.output_activation) != (
            other.layer_dims, other.hidden_activation, other.output_activation
        ):
            return False
        return all(
            np.array_equal(a, b)
            for a, b in zip(self.weights + self.biases, other.weights + other.biases)
        )


class ForwardCache(NamedTuple):
    """Промежуточные значения прямого прохода для обратного"""
    inputs: np.ndarray
    pre_activations: list[np.ndarray]
    activations: list[np.ndarray]


class ParamGrads(NamedTuple):
    weights: list[np.ndarray]
    biases: list[np.ndarray]


class AdamState(BaseModel):
    """Моменты ADAM, повторяющие формы параметров сети"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True, extra="forbid")

    m_weights: list[Any]
    m_biases: list[Any]
    v_weights: list[Any]
    v_biases: list[Any]
    step: int = Field(default=0, ge=0)

    @classmethod
    def zeros_like(cls, model: Mlp) -> "AdamState":
        return cls(
            m_weights=[np.zeros_like(w) for w in model.weights],
            m_biases=[np.zeros_like(b) for b in model.biases],
            v_weights=[np.zeros_like(w) for w in model.weights],
            v_biases=[np.zeros_like(b) for b in model.biases],
            step=0,
        )


class TrainConfig(BaseModel):
    """Гиперпараметры обучения U и N моделей"""
    model_config = ConfigDict(frozen=True, extra="forbid", populate_by_name=True)

    learning_rate: float = Field(default=1e-3, gt=0)
    batch_size: int = Field(default=128, ge=1)
    epochs: int = Field(default=500, ge=0)
    seed: int = 0
    # вес интерпретируемости λ, используется только при обучении N
    lam: float = Field(default=0.005, ge=0, alias="lambda")
    adam_beta1: float = Field(default=0.9, ge=0, lt=1)
    adam_beta2: float = Field(default=0.999, ge=0, lt=1)
    adam_eps: float = Field(default=1e-8, gt=0)
    # ранняя остановка: None - обучать все эпохи
    patience: Optional[int] = Field(default=None, ge=1)
    min_delta: float = Field(default=0.0, ge=0)


class TrainHistory(BaseModel):
    """Потери по эпохам"""
    model_config = ConfigDict(extra="forbid")

    losses: list[float] = Field(default_factory=list)
    stopped_early: bool = False

    @property
    def final_loss(self) -> Optional[float]:
        return self.losses[-1] if self.losses else None


class Dataset(BaseModel):
    """Пары (сложенная оценка Φ, сложенный истинный канал) по OFDM-символам

    Хранится в float32, как и в кэше на диске.
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True, extra="forbid")

    inputs: Any
    targets: Any
    meta: dict[str, Any] = Field(default_factory=dict)

    @field_validator("inputs", "targets", mode="before")
    @classmethod
    def _as_float32(cls, v: Any) -> np.ndarray:
        arr = np.array(v, dtype=np.float32, copy=True)
        if arr.ndim != 2:
            raise ValueError("dataset arrays must be 2-D [n x d]")
        arr.setflags(write=False)
        return arr

    @model_validator(mode="after")
    def _check_rows(self) -> "Dataset":
        if self.inputs.shape[0] != self.targets.shape[0]:
            raise ValueError(
                f"row counts differ: inputs {self.inputs.shape[0]}, targets {self.targets.shape[0]}"
            )
        if self.targets.shape[1] % 2:
            raise ValueError("targets must hold stacked complex values (even width)")
        return self

    def __len__(self) -> int:
        return int(self.inputs.shape[0])

    @property
    def d_in(self) -> int:
        return int(self.inputs.shape[1])

    @property
    def d_out(self) -> int:
        return int(self.targets.shape[1])

    def subset(self, rows: np.ndarray) -> "Dataset":
        return Dataset(inputs=self.inputs[rows], targets=self.targets[rows], meta=dict(self.meta))
