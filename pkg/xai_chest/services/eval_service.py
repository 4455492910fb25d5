"""
Оценочные метрики: FLOPS полносвязной сети, гистограмма весов шума,
ранговая корреляция трендов и доверительные интервалы BER
"""

from __future__ import annotations

from typing import Sequence, Union

import numpy as np
from scipy.stats import binomtest, spearmanr

from xai_chest.models.eval_models import FlopsReport, LayerFlops, NoiseHistogram
from xai_chest.models.phy_models import FrameSpec
from xai_chest.models.xai_models import AggregatedMask
from xai_chest.utils.errors import SizeError


def count_flops(layer_dims: Sequence[int]) -> FlopsReport:
    """
    FLOPS одного прохода: на слой 2·in·out (умножение-сложение = 2) + out
    сложений смещения; операции активаций считаются отдельно
    """
    dims = tuple(int(d) for d in layer_dims)
    if len(dims) < 2:
        raise SizeError("at least input and output sizes are required")
    layers = [
        LayerFlops(
            layer=l,
            fan_in=dims[l],
            fan_out=dims[l + 1],
            multiply_adds=2 * dims[l] * dims[l + 1],
            bias_adds=dims[l + 1],
            activation_ops=dims[l + 1],
        )
        for l in range(len(dims) - 1)
    ]
    return FlopsReport(
        layer_dims=dims,
        layers=layers,
        total=sum(layer.flops for layer in layers),
        activation_total=sum(layer.activation_ops for layer in layers),
    )


def parse_dims(text: str) -> tuple[int, ...]:
    """'104,15,15,15,104' -> (104, 15, 15, 15, 104)"""
    try:
        dims = tuple(int(part) for part in text.replace(";", ",").split(",") if part.strip())
    except ValueError as e:
        raise SizeError(f"cannot parse layer dims '{text}': {e}") from e
    if len(dims) < 2 or any(d < 1 for d in dims):
        raise SizeError(f"layer dims need at least two positive sizes, got '{text}'")
    return dims


def noise_weight_histogram(
    masks: Union[np.ndarray, Sequence[AggregatedMask]],
    bins: int,
    spec: FrameSpec,
) -> NoiseHistogram:
    """Равномерные корзины на [0, 1]; пилотные и информационные поднесущие отдельно"""
    if bins < 2:
        raise SizeError("histogram needs at least two bins")
    if isinstance(masks, np.ndarray):
        table = np.atleast_2d(masks)
    else:
        table = np.stack([m.values for m in masks]) if len(masks) else np.empty((0, spec.k_on))
    if table.shape[1] != spec.k_on:
        raise SizeError(f"aggregated masks must have {spec.k_on} entries")
    edges = np.linspace(0.0, 1.0, bins + 1)
    pilot, _ = np.histogram(table[:, spec.pilot_indices].ravel(), bins=edges)
    data, _ = np.histogram(table[:, spec.data_indices].ravel(), bins=edges)
    return NoiseHistogram(
        edges=[float(e) for e in edges],
        count_data=[int(c) for c in data],
        count_pilot=[int(c) for c in pilot],
    )


def spearman_trend(x: Sequence[float], y: Sequence[float]) -> float:
    """Ранговая корреляция Спирмена (NaN, если ряд постоянный)"""
    if len(x) != len(y):
        raise SizeError("trend sequences must have equal length")
    if len(x) < 2:
        return float("nan")
    return float(spearmanr(x, y)[0])


def ber_confidence(bit_errors: int, total_bits: int, level: float = 0.95) -> tuple[float, float]:
    """Точный (Клоппер-Пирсон) интервал для BER"""
    if total_bits <= 0:
        return float("nan"), float("nan")
    ci = binomtest(int(bit_errors), int(total_bits)).proportion_ci(confidence_level=level)
    return float(ci.low), float(ci.high)


def pilot_rank_quartile(mask: AggregatedMask, spec: FrameSpec) -> int:
    """Сколько пилотов попало в нижнюю четверть весов шума"""
    order = np.argsort(mask.values, kind="stable")
    lowest = set(order[: len(mask) // 4].tolist())
    return sum(int(p) in lowest for p in spec.pilot_indices)
