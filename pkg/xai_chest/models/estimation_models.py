"""
Модели классических оценщиков канала (LS, DPA, STA, TRFI)
"""

from __future__ import annotations

from enum import Enum
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

# Оценка канала - комплексный вектор длины k_on. Последовательность
# OFDM-символов в частотной области - матрица [n_symbols × k_on].
ChannelEstimate = np.ndarray
OfdmGrid = np.ndarray


class EstimatorKind(str, Enum):
    """Классический оценщик Φ перед U-моделью"""
    DPA = "DPA"
    STA = "STA"
    TRFI = "TRFI"


class StaParams(BaseModel):
    """Коэффициенты усреднения STA: α - по времени, β - полуширина окна по частоте"""
    model_config = ConfigDict(frozen=True, extra="forbid")

    alpha: float = Field(default=2.0, ge=1.0)
    beta: int = Field(default=2, ge=0)
    # какая оценка подаётся в DPA следующего символа
    sta_track: Literal["sta", "dpa"] = "sta"


class EstimatorState(BaseModel):
    """Состояние трекера между OFDM-символами одного кадра"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True, extra="forbid")

    h_prev: ChannelEstimate
    h_sta_prev: ChannelEstimate
    y_prev: Optional[OfdmGrid] = None
    # TRFI: число символов, где надёжных поднесущих оказалось меньше четырёх
    trfi_fallbacks: int = 0

    @classmethod
    def from_preamble(cls, h_ls: ChannelEstimate) -> "EstimatorState":
        return cls(h_prev=h_ls, h_sta_prev=h_ls)

    def with_estimate(self, h: ChannelEstimate) -> "EstimatorState":
        """Подмена оценки (обратная связь от U-модели)"""
        return self.model_copy(update={"h_prev": h, "h_sta_prev": h})
