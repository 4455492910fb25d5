"""
Модели оценки канала связи: конфигурация прогона, кривая BER,
подсчёт FLOPS и гистограмма весов шума
"""

from __future__ import annotations

from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from xai_chest.models.channel_models import ChannelProfile
from xai_chest.models.estimation_models import EstimatorKind, StaParams
from xai_chest.models.nn_models import Mlp
from xai_chest.models.phy_models import FrameSpec, HpaModel, ModulationScheme
from xai_chest.models.xai_models import RelevanceSet


class LinkConfig(BaseModel):
    """Полная конфигурация сквозного прогона OFDM-линии"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True, extra="forbid")

    spec: FrameSpec
    scheme: ModulationScheme
    profile: ChannelProfile
    hpa: HpaModel = HpaModel()
    estimator: EstimatorKind = EstimatorKind.STA
    sta: StaParams = StaParams()
    model: Optional[Mlp] = None
    relevance: Optional[RelevanceSet] = None
    feedback_fnn: bool = True
    # идеальная оценка: истинный h_i вместо оценщика
    genie: bool = False
    snr_grid_db: tuple[float, ...] = (40.0,)
    n_frames: int = Field(default=200, ge=1)
    seed: int = 0

    @model_validator(mode="after")
    def _check_model_dims(self) -> "LinkConfig":
        k_on = self.spec.k_on
        if self.relevance is not None and self.relevance.k_on != k_on:
            raise ValueError("relevance set was built for a different k_on")
        if self.model is not None:
            expected_in = 2 * (self.relevance.size if self.relevance is not None else k_on)
            if self.model.input_dim != expected_in:
                raise ValueError(f"model input dim {self.model.input_dim} != {expected_in}")
            if self.model.output_dim != 2 * k_on:
                raise ValueError(f"model output dim {self.model.output_dim} != {2 * k_on}")
        return self

    @property
    def bits_per_frame(self) -> int:
        return self.spec.n_symbols * self.spec.k_data * self.scheme.bits_per_symbol


class LinkResult(BaseModel):
    """Итог прогона одной точки SNR"""
    model_config = ConfigDict(frozen=True, extra="forbid")

    snr_db: float
    bit_errors: int
    total_bits: int
    mse_sum: float = 0.0
    mse_count: int = 0
    excluded_frames: int = 0

    @property
    def ber(self) -> float:
        return self.bit_errors / self.total_bits if self.total_bits else float("nan")

    @property
    def mse_channel(self) -> float:
        return self.mse_sum / self.mse_count if self.mse_count else float("nan")

    def merge(self, other: "LinkResult") -> "LinkResult":
        return LinkResult(
            snr_db=self.snr_db,
            bit_errors=self.bit_errors + other.bit_errors,
            total_bits=self.total_bits + other.total_bits,
            mse_sum=self.mse_sum + other.mse_sum,
            mse_count=self.mse_count + other.mse_count,
            excluded_frames=self.excluded_frames + other.excluded_frames,
        )


class BerPoint(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    snr_db: float
    bit_errors: int
    total_bits: int
    ber: float
    mse_channel: float
    excluded_frames: int = 0


class BerCurve(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    points: list[BerPoint]
    config_digest: str = ""

    def ber_at(self, snr_db: float) -> float:
        for p in self.points:
            if p.snr_db == snr_db:
                return p.ber
        raise KeyError(snr_db)


class LayerFlops(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    layer: int
    fan_in: int
    fan_out: int
    multiply_adds: int
    bias_adds: int
    activation_ops: int

    @property
    def flops(self) -> int:
        return self.multiply_adds + self.bias_adds


class FlopsReport(BaseModel):
    """FLOPS одного прохода: 2·in·out + out на слой, активации отдельно"""
    model_config = ConfigDict(frozen=True, extra="forbid")

    layer_dims: tuple[int, ...]
    layers: list[LayerFlops]
    total: int
    activation_total: int


class NoiseHistogram(BaseModel):
    """Гистограмма агрегированных весов шума на [0, 1]"""
    model_config = ConfigDict(frozen=True, extra="forbid")

    edges: list[float]
    count_data: list[int]
    count_pilot: list[int]

    @property
    def total(self) -> int:
        return sum(self.count_data) + sum(self.count_pilot)
