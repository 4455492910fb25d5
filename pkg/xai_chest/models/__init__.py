"""
Модели данных лаборатории xai-chest

Неизменяемые структуры, которыми обмениваются сервисы: нумерология кадра,
канал, оценки, нейросети, маски и результаты экспериментов.
"""

from xai_chest.models.phy_models import (
    FrameSpec,
    HpaKind,
    HpaModel,
    ModulationName,
    ModulationScheme,
    TimeSignal,
)

from xai_chest.models.channel_models import (
    ChannelProfile,
    ChannelProfileName,
    ChannelRealization,
)

from xai_chest.models.estimation_models import (
    EstimatorKind,
    EstimatorState,
    StaParams,
)

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

from xai_chest.models.xai_models import (
    AggregatedMask,
    ConvexityViolation,
    NoiseMask,
    ProbeResult,
    RelevanceSet,
    SweepRecord,
    SweepResult,
)

from xai_chest.models.eval_models import (
    BerCurve,
    BerPoint,
    FlopsReport,
    LayerFlops,
    LinkConfig,
    LinkResult,
    NoiseHistogram,
)

from xai_chest.models.experiment_models import (
    ExperimentConfig,
    RunManifest,
)

__all__ = [
    "FrameSpec",
    "HpaKind",
    "HpaModel",
    "ModulationName",
    "ModulationScheme",
    "TimeSignal",
    "ChannelProfile",
    "ChannelProfileName",
    "ChannelRealization",
    "EstimatorKind",
    "EstimatorState",
    "StaParams",
    "Activation",
    "AdamState",
    "Dataset",
    "ForwardCache",
    "Mlp",
    "ParamGrads",
    "TrainConfig",
    "TrainHistory",
    "AggregatedMask",
    "ConvexityViolation",
    "NoiseMask",
    "ProbeResult",
    "RelevanceSet",
    "SweepRecord",
    "SweepResult",
    "BerCurve",
    "BerPoint",
    "FlopsReport",
    "LayerFlops",
    "LinkConfig",
    "LinkResult",
    "NoiseHistogram",
    "ExperimentConfig",
    "RunManifest",
]
