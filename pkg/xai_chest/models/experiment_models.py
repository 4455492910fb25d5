"""
Модели конфигурации эксперимента (YAML) и манифеста запуска

Каждая секция YAML-файла валидируется своей pydantic-моделью, лишние ключи
запрещены, чтобы опечатки в конфиге не проходили молча.
"""

from __future__ import annotations

from typing import Any, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator

from xai_chest.models.channel_models import ChannelProfileName
from xai_chest.models.estimation_models import EstimatorKind
from xai_chest.models.nn_models import TrainConfig
from xai_chest.models.phy_models import HpaKind, ModulationName

_STRICT = ConfigDict(frozen=True, extra="forbid")

DESK_DATASET_FRAMES = 200
DESK_EPOCHS = 100
DESK_EVAL_FRAMES = 200


class FrameSection(BaseModel):
    model_config = _STRICT

    n_symbols: int = Field(default=50, ge=1)
    n_preambles: int = Field(default=2, ge=1)
    k_cp: int = Field(default=16, ge=0)
    sample_rate_hz: float = Field(default=10e6, gt=0)


class ChannelSection(BaseModel):
    model_config = _STRICT

    profile: ChannelProfileName = ChannelProfileName.VTV_SDWW
    doppler_hz: float = Field(default=1000.0, ge=0)


class ModulationSection(BaseModel):
    model_config = _STRICT

    scheme: ModulationName = ModulationName.QPSK


class HpaSection(BaseModel):
    model_config = _STRICT

    kind: HpaKind = HpaKind.LINEAR
    ibo_db: float = 2.0
    smoothness: float = Field(default=3.0, gt=0)


class EstimatorSection(BaseModel):
    model_config = _STRICT

    kind: EstimatorKind = EstimatorKind.STA
    alpha: float = Field(default=2.0, ge=1)
    beta: int = Field(default=2, ge=0)
    sta_track: Literal["sta", "dpa"] = "sta"


class DatasetSection(BaseModel):
    model_config = _STRICT

    n_frames: int = Field(default=2000, ge=2)
    train_fraction: float = Field(default=0.8, gt=0, lt=1)
    train_snr_db: float = 40.0


class TrainingSection(BaseModel):
    """Параметры обучения; сид берётся из иерархии master_seed"""
    model_config = ConfigDict(frozen=True, extra="forbid", populate_by_name=True)

    hidden_layers: tuple[int, ...] = (15, 15, 15)
    learning_rate: float = Field(default=1e-3, gt=0)
    batch_size: int = Field(default=128, ge=1)
    epochs: int = Field(default=500, ge=0)
    lam: float = Field(default=0.005, ge=0, alias="lambda")
    patience: Optional[int] = Field(default=None, ge=1)

    @field_validator("hidden_layers")
    @classmethod
    def _positive(cls, v: tuple[int, ...]) -> tuple[int, ...]:
        if any(h < 1 for h in v):
            raise ValueError("hidden layer sizes must be positive")
        return v

    def to_train_config(self, seed: int) -> TrainConfig:
        return TrainConfig(
            learning_rate=self.learning_rate,
            batch_size=self.batch_size,
            epochs=self.epochs,
            seed=seed,
            lam=self.lam,
            patience=self.patience,
        )


class SweepSection(BaseModel):
    model_config = _STRICT

    gammas: tuple[float, ...] = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8)
    eval_snr_db: float = 40.0

    @field_validator("gammas")
    @classmethod
    def _in_range(cls, v: tuple[float, ...]) -> tuple[float, ...]:
        if not v:
            raise ValueError("at least one threshold is required")
        if any(not 0.0 < g <= 1.0 for g in v):
            raise ValueError("thresholds must lie in (0, 1]")
        return v


class EvalSection(BaseModel):
    model_config = _STRICT

    snr_grid_db: tuple[float, ...] = (0, 5, 10, 15, 20, 25, 30, 35, 40)
    n_frames: int = Field(default=1000, ge=1)
    feedback_fnn: bool = True
    histogram_bins: int = Field(default=10, ge=2)


class ProbeSection(BaseModel):
    model_config = _STRICT

    t_min: float = -2.0
    t_max: float = 2.0
    n_points: int = Field(default=401, ge=3)
    n_directions: int = Field(default=3, ge=1)
    # строк датасета для оценки g(t); None - весь обучающий набор
    max_rows: Optional[int] = Field(default=5000, ge=1)


class SuiteSection(BaseModel):
    model_config = _STRICT

    train_snr_grid_db: tuple[float, ...] = (0, 5, 10, 15, 20, 25, 30, 35, 40)
    architectures: tuple[tuple[int, ...], ...] = ((15, 15, 15), (15, 15), (15,), (10,), (5,))
    n_seeds: int = Field(default=3, ge=1)
    # сетка λ для исследования чувствительности маски (сьют threshold)
    lambda_grid: tuple[float, ...] = (1e-4, 1e-3, 5e-3, 1e-2, 1e-1)


class PathsSection(BaseModel):
    model_config = _STRICT

    out_dir: str = "runs/default"


class ExperimentConfig(BaseModel):
    """Конфигурация эксперимента целиком"""
    model_config = _STRICT

    master_seed: int = 0
    frame: FrameSection = FrameSection()
    channel: ChannelSection = ChannelSection()
    modulation: ModulationSection = ModulationSection()
    hpa: HpaSection = HpaSection()
    estimator: EstimatorSection = EstimatorSection()
    dataset: DatasetSection = DatasetSection()
    training_u: TrainingSection = TrainingSection()
    training_n: TrainingSection = TrainingSection()
    sweep: SweepSection = SweepSection()
    eval: EvalSection = EvalSection()
    probe: ProbeSection = ProbeSection()
    suite: SuiteSection = SuiteSection()
    paths: PathsSection = PathsSection()

    def desk_scaled(self) -> "ExperimentConfig":
        """Уменьшенный масштаб для запуска на ноутбуке"""
        return self.model_copy(
            update={
                "dataset": self.dataset.model_copy(update={"n_frames": DESK_DATASET_FRAMES}),
                "training_u": self.training_u.model_copy(update={"epochs": DESK_EPOCHS}),
                "training_n": self.training_n.model_copy(update={"epochs": DESK_EPOCHS}),
                "eval": self.eval.model_copy(update={"n_frames": DESK_EVAL_FRAMES}),
            }
        )

    def with_section(self, section: str, **changes: Any) -> "ExperimentConfig":
        """Копия с изменёнными полями одной секции (используется сьютами)"""
        current = getattr(self, section)
        updated = type(current).model_validate({**current.model_dump(), **changes})
        return self.model_copy(update={section: updated})


class RunManifest(BaseModel):
    """Манифест запуска подкоманды: всё, что нужно для повторения"""
    model_config = ConfigDict(extra="forbid")

    command: str
    config_digest: str
    master_seed: int
    config: dict[str, Any]
    seeds: dict[str, int] = Field(default_factory=dict)
    versions: dict[str, str] = Field(default_factory=dict)
    started_at: str
    wall_time_s: float = 0.0
    artifacts: dict[str, str] = Field(default_factory=dict)
    summary: dict[str, Any] = Field(default_factory=dict)
