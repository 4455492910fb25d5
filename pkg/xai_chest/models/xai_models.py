"""
Модели интерпретируемости: маски шума N-модели, множества релевантных
поднесущих, результаты подбора порога γ и зонда ландшафта потерь
"""

from __future__ import annotations

from typing import Any, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

# Нижняя граница маски: не даёт log(0) в L_X
MASK_FLOOR = 1e-6
MASK_CEIL = 1.0 - 1e-12


class NoiseMask(BaseModel):
    """Веса шума b′ для сложенного входа длины 2·k_on"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True, extra="forbid")

    values: Any

    @field_validator("values", mode="before")
    @classmethod
    def _in_unit_interval(cls, v: Any) -> np.ndarray:
        arr = np.array(v, dtype=np.float64, copy=True).ravel()
        if arr.size % 2:
            raise ValueError("noise mask length must be even (real + imag halves)")
        if arr.size and (arr.min() <= 0.0 or arr.max() >= 1.0):
            raise ValueError("noise mask entries must lie strictly inside (0, 1)")
        arr.setflags(write=False)
        return arr


class AggregatedMask(BaseModel):
    """Вес шума на поднесущую: среднее по вещественной и мнимой частям"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True, extra="forbid")

    values: Any

    @field_validator("values", mode="before")
    @classmethod
    def _as_float(cls, v: Any) -> np.ndarray:
        arr = np.array(v, dtype=np.float64, copy=True).ravel()
        if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
            raise ValueError("aggregated mask entries must lie in [0, 1]")
        arr.setflags(write=False)
        return arr

    def __len__(self) -> int:
        return int(self.values.size)


class RelevanceSet(BaseModel):
    """Разбиение поднесущих по порогу γ: Ψ = {k : b[k] < γ} и дополнение"""
    model_config = ConfigDict(frozen=True, extra="forbid")

    gamma: float
    k_on: int = Field(ge=1)
    relevant: tuple[int, ...]
    irrelevant: tuple[int, ...]

    @model_validator(mode="after")
    def _check_partition(self) -> "RelevanceSet":
        rel, irr = set(self.relevant), set(self.irrelevant)
        if rel & irr:
            raise ValueError("relevant and irrelevant sets overlap")
        if rel | irr != set(range(self.k_on)):
            raise ValueError("relevance sets must cover every active subcarrier")
        if list(self.relevant) != sorted(rel) or list(self.irrelevant) != sorted(irr):
            raise ValueError("relevance index sets must be sorted")
        return self

    @classmethod
    def full(cls, k_on: int) -> "RelevanceSet":
        return cls(gamma=1.0, k_on=k_on, relevant=tuple(range(k_on)), irrelevant=())

    @classmethod
    def from_indices(cls, indices: Any, k_on: int, gamma: float = float("nan")) -> "RelevanceSet":
        rel = sorted({int(i) for i in indices})
        irr = [k for k in range(k_on) if k not in set(rel)]
        return cls(gamma=gamma, k_on=k_on, relevant=tuple(rel), irrelevant=tuple(irr))

    def complement(self) -> "RelevanceSet":
        """Ω = дополнение Ψ (обучение U на нерелевантных поднесущих)"""
        return RelevanceSet(gamma=self.gamma, k_on=self.k_on, relevant=self.irrelevant, irrelevant=self.relevant)

    def input_columns(self) -> np.ndarray:
        """Столбцы сложенного входа для Ψ: вещественные, затем мнимые части"""
        rel = np.asarray(self.relevant, dtype=np.int64)
        return np.concatenate([rel, rel + self.k_on])

    @property
    def size(self) -> int:
        return len(self.relevant)


class SweepRecord(BaseModel):
    """Строка таблицы подбора γ; ``gamma=None`` - базовая модель на всех поднесущих"""
    model_config = ConfigDict(frozen=True, extra="forbid")

    gamma: Optional[float]
    n_relevant: int
    ber_relevant: float
    ber_irrelevant: Optional[float]
    ber_full: float
    mse: float
    selected: bool = False


class SweepResult(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    records: list[SweepRecord]
    ber_full: float
    selected_gamma: Optional[float] = None
    no_improvement: bool = False

    @property
    def selected(self) -> Optional[SweepRecord]:
        for r in self.records:
            if r.selected:
                return r
        return None


class ConvexityViolation(BaseModel):
    """Тройка (a, m, b), m=(a+b)/2, с g(m) > (g(a)+g(b))/2 + tol"""
    model_config = ConfigDict(frozen=True, extra="forbid")

    a: float
    m: float
    b: float
    g_a: float
    g_m: float
    g_b: float
    excess: float


class ProbeResult(BaseModel):
    """Сужение L_U на прямую θ_U + t·v"""
    model_config = ConfigDict(frozen=True, extra="forbid")

    t: list[float]
    g: list[float]
    direction_seed: int
    tolerance: float
    violation: Optional[ConvexityViolation] = None

    @property
    def is_convex_on_grid(self) -> bool:
        return self.violation is None
