"""
Модели канала: профиль задержек/мощностей, реализация двоякоселективного
канала и частотная характеристика одного OFDM-символа
"""

from __future__ import annotations

from enum import Enum
from typing import Any

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class ChannelProfile(BaseModel):
    """Профиль многолучевого канала (tapped delay line)

    ``fading=False`` задаёт статический канал с детерминированными
    вещественными коэффициентами sqrt(p_l) - используется для AWGN-проверок.
    """
    model_config = ConfigDict(frozen=True, extra="forbid")

    name: str
    path_gains_db: tuple[float, ...]
    path_delays_ns: tuple[float, ...]
    doppler_hz: float = Field(default=0.0, ge=0.0)
    fading: bool = True

    @model_validator(mode="after")
    def _check_paths(self) -> "ChannelProfile":
        if len(self.path_gains_db) != len(self.path_delays_ns):
            raise ValueError("path_gains_db and path_delays_ns must have equal length")
        if not self.path_gains_db:
            raise ValueError("profile needs at least one path")
        delays = np.asarray(self.path_delays_ns)
        if np.any(delays < 0) or np.any(np.diff(delays) < 0):
            raise ValueError("path delays must be non-negative and non-decreasing")
        return self

    @property
    def num_taps(self) -> int:
        return len(self.path_gains_db)

    @property
    def linear_powers(self) -> np.ndarray:
        return 10.0 ** (np.asarray(self.path_gains_db, dtype=float) / 10.0)


class ChannelRealization(BaseModel):
    """Реализация канала на один кадр: коэффициенты лучей для каждого отсчёта"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True, extra="forbid")

    tap_gains: Any
    tap_delays_samples: Any
    profile: ChannelProfile
    seed: int
    isi_warning: bool = False

    @field_validator("tap_gains", mode="before")
    @classmethod
    def _as_complex_matrix(cls, v: Any) -> np.ndarray:
        arr = np.array(v, dtype=np.complex128, copy=True)
        if arr.ndim != 2:
            raise ValueError("tap_gains must be a [num_samples x num_taps] matrix")
        arr.setflags(write=False)
        return arr

    @field_validator("tap_delays_samples", mode="before")
    @classmethod
    def _as_int(cls, v: Any) -> np.ndarray:
        arr = np.array(v, dtype=np.int64, copy=True)
        arr.setflags(write=False)
        return arr

    @model_validator(mode="after")
    def _check_shapes(self) -> "ChannelRealization":
        if self.tap_gains.shape[1] != self.tap_delays_samples.size:
            raise ValueError("one delay per tap column is required")
        if np.any(self.tap_delays_samples < 0):
            raise ValueError("tap delays must be non-negative")
        return self

    @property
    def num_samples(self) -> int:
        return int(self.tap_gains.shape[0])

    @property
    def num_taps(self) -> int:
        return int(self.tap_gains.shape[1])

    @property
    def max_delay(self) -> int:
        return int(self.tap_delays_samples.max(initial=0))


class ChannelProfileName(str, Enum):
    """Профили V2V-каналов: VTV_EX - слабая частотная селективность (LFS),
    VTV_SDWW - сильная (HFS)"""
    VTV_EX = "VTV_EX"
    VTV_SDWW = "VTV_SDWW"
