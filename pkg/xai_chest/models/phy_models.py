"""
Модели физического уровня: созвездия, нумерология OFDM-кадра, сигнал во
временной области и модель усилителя мощности (HPA)

Все модели неизменяемые (frozen) и безопасны для использования из нескольких
потоков. Массивы numpy внутри моделей помечаются read-only.
"""

from __future__ import annotations

from enum import Enum
from typing import Any, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


def _frozen_array(value: Any, dtype: Any) -> np.ndarray:
    arr = np.array(value, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


class ModulationName(str, Enum):
    """Схемы модуляции данных"""
    QPSK = "QPSK"
    QAM16 = "QAM16"
    QAM64 = "QAM64"


class ModulationScheme(BaseModel):
    """Созвездие с кодом Грея и единичной средней мощностью

    points[i] - точка, чей кодовый вектор равен двоичной записи i (старший бит первым).
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True, extra="forbid")

    name: ModulationName
    points: Any
    bits_per_symbol: int = Field(ge=1)

    @field_validator("points", mode="before")
    @classmethod
    def _as_complex(cls, v: Any) -> np.ndarray:
        return _frozen_array(v, np.complex128)

    @model_validator(mode="after")
    def _check_size(self) -> "ModulationScheme":
        if self.points.shape != (2 ** self.bits_per_symbol,):
            raise ValueError(
                f"{self.name.value}: expected {2 ** self.bits_per_symbol} points, got {self.points.shape}"
            )
        return self

    @property
    def order(self) -> int:
        return int(self.points.size)

    @property
    def codewords(self) -> np.ndarray:
        """Матрица [order × bits_per_symbol] кодовых слов, строка i - биты точки i"""
        idx = np.arange(self.order)[:, None]
        shifts = np.arange(self.bits_per_symbol - 1, -1, -1)[None, :]
        return ((idx >> shifts) & 1).astype(np.uint8)


class FrameSpec(BaseModel):
    """Нумерология OFDM-кадра (IEEE 802.11p, 10 МГц)

    ``subcarriers`` - знаковые индексы активных поднесущих в порядке вектора длины k_on;
    ``pilot_indices`` и ``data_indices`` - позиции внутри этого вектора.
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True, extra="forbid")

    k_total: int = Field(default=64, ge=2)
    k_on: int = 52
    k_pilot: int = 4
    k_data: int = 48
    k_null: int = 12
    k_cp: int = Field(default=16, ge=0)
    n_symbols: int = Field(default=50, ge=1)
    n_preambles: int = Field(default=2, ge=1)
    subcarriers: Any
    pilot_indices: Any
    data_indices: Any
    pilot_values: Any
    sample_rate_hz: float = Field(default=10e6, gt=0)

    @field_validator("subcarriers", "pilot_indices", "data_indices", mode="before")
    @classmethod
    def _as_int(cls, v: Any) -> np.ndarray:
        return _frozen_array(v, np.int64)

    @field_validator("pilot_values", mode="before")
    @classmethod
    def _as_complex(cls, v: Any) -> np.ndarray:
        return _frozen_array(v, np.complex128)

    @model_validator(mode="after")
    def _check_layout(self) -> "FrameSpec":
        errors = []
        if self.k_on != self.k_pilot + self.k_data:
            errors.append("k_on must equal k_pilot + k_data")
        if self.k_null != self.k_total - self.k_on:
            errors.append("k_null must equal k_total - k_on")
        if self.subcarriers.shape != (self.k_on,):
            errors.append("subcarriers must list k_on indices")
        if len(set(self.pilot_indices.tolist()) & set(self.data_indices.tolist())):
            errors.append("pilot and data positions overlap")
        if self.pilot_indices.size != self.k_pilot or self.data_indices.size != self.k_data:
            errors.append("pilot/data position counts do not match k_pilot/k_data")
        if self.pilot_values.size != self.k_pilot:
            errors.append("pilot_values must have k_pilot entries")
        positions = np.concatenate([self.pilot_indices, self.data_indices])
        if positions.size and (positions.min() < 0 or positions.max() >= self.k_on):
            errors.append("pilot/data positions must lie in [0, k_on)")
        if errors:
            raise ValueError("; ".join(errors))
        return self

    @property
    def fft_bins(self) -> np.ndarray:
        """FFT-бины активных поднесущих (k mod K)"""
        return np.mod(self.subcarriers, self.k_total)

    @property
    def symbol_length(self) -> int:
        return self.k_total + self.k_cp

    @property
    def frame_symbols(self) -> int:
        """Число OFDM-символов в кадре вместе с преамбулами"""
        return self.n_preambles + self.n_symbols

    @property
    def frame_samples(self) -> int:
        return self.frame_symbols * self.symbol_length


class TimeSignal(BaseModel):
    """Комплексный сигнал во временной области"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True, extra="forbid")

    samples: Any
    sample_rate_hz: float = Field(gt=0)

    @field_validator("samples", mode="before")
    @classmethod
    def _as_complex(cls, v: Any) -> np.ndarray:
        return _frozen_array(np.ravel(v), np.complex128)

    def __len__(self) -> int:
        return int(self.samples.size)

    @property
    def mean_power(self) -> float:
        if self.samples.size == 0:
            return 0.0
        return float(np.mean(np.abs(self.samples) ** 2))


class HpaKind(str, Enum):
    LINEAR = "linear"
    RAPP = "rapp"


class HpaModel(BaseModel):
    """Модель HPA без памяти: линейная или Rapp (только AM/AM)

    ``rho`` - коэффициент Бусганга, заполняется после оценки по сигналу.
    """
    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: HpaKind = HpaKind.LINEAR
    ibo_db: float = 2.0
    smoothness: float = Field(default=3.0, gt=0)
    rho: Optional[complex] = None
