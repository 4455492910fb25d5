"""
Генерация обучающих пар (оценка Φ, истинный канал) по OFDM-символам

Кадры моделируются на обучающем SNR, затем делятся на train/test целиком
по кадрам: символы одного кадра коррелированы через STA-трекинг.
"""

from __future__ import annotations

import logging
from typing import Any, Sequence

import numpy as np

from xai_chest.models.eval_models import LinkConfig
from xai_chest.models.nn_models import Dataset
from xai_chest.services.estimation_service import ls_preamble, run_conventional
from xai_chest.services.link_service import transmit_frame
from xai_chest.services.neural_service import stack_complex
from xai_chest.services.phy_service import preamble_symbol
from xai_chest.utils.parallel import run_ordered
from xai_chest.utils.seeding import SeedStream, make_rng

logger = logging.getLogger(__name__)

FRAMES_PER_CHUNK = 50


def frame_rows(config: LinkConfig, frame_index: int, snr_db: float) -> tuple[np.ndarray, np.ndarray]:
    """
    Пары одного кадра

    Returns:
        (входы [I × 2k_on] - сложенная оценка Φ, цели [I × 2k_on] - сложенный истинный канал)
    """
    spec = config.spec
    obs = transmit_frame(config, frame_index, snr_db)
    p = spec.n_preambles
    h_ls = ls_preamble(obs.rx[:p], preamble_symbol(spec))
    estimates = run_conventional(obs.rx[p:], h_ls, config.estimator, config.sta, config.scheme, spec)
    return stack_complex(estimates), stack_complex(obs.true_response[p:])


def _rows_chunk(args: tuple[LinkConfig, float, list[int]]) -> tuple[np.ndarray, np.ndarray]:
    config, snr_db, frames = args
    pairs = [frame_rows(config, f, snr_db) for f in frames]
    return np.vstack([x for x, _ in pairs]), np.vstack([t for _, t in pairs])


def split_frames(n_frames: int, train_fraction: float, seed: int) -> tuple[list[int], list[int]]:
    """Случайное разбиение индексов кадров; внутри частей - по возрастанию"""
    order = make_rng(seed, SeedStream.SPLIT).permutation(n_frames)
    n_train = int(round(train_fraction * n_frames))
    n_train = min(max(n_train, 1), n_frames - 1)
    return sorted(int(f) for f in order[:n_train]), sorted(int(f) for f in order[n_train:])


def build_dataset(
    config: LinkConfig,
    snr_db: float,
    frames: Sequence[int],
    meta: dict[str, Any],
    workers: int = 1,
    progress: bool = False,
) -> Dataset:
    frames = list(frames)
    chunks = [
        (config, float(snr_db), frames[start:start + FRAMES_PER_CHUNK])
        for start in range(0, len(frames), FRAMES_PER_CHUNK)
    ]
    parts = run_ordered(_rows_chunk, chunks, workers=workers, desc="frames", progress=progress)
    inputs = np.vstack([x for x, _ in parts])
    targets = np.vstack([t for _, t in parts])
    return Dataset(inputs=inputs, targets=targets, meta={**meta, "frames": frames})


def gen_data(
    config: LinkConfig,
    snr_db: float,
    n_frames: int,
    train_fraction: float = 0.8,
    split_seed: int = 0,
    workers: int = 1,
    progress: bool = False,
) -> tuple[Dataset, Dataset]:
    """
    Датасеты train/test на обучающем SNR

    Args:
        config: конфигурация линии (оценщик Φ, профиль, модуляция, HPA, сид)
        snr_db: обучающий SNR
        n_frames: число кадров (каждый даёт n_symbols строк)
        train_fraction: доля кадров в обучающей части
        split_seed: сид разбиения кадров

    Returns:
        (train, test)
    """
    train_frames, test_frames = split_frames(n_frames, train_fraction, split_seed)
    meta = {
        "profile": config.profile.name,
        "doppler_hz": config.profile.doppler_hz,
        "scheme": config.scheme.name.value,
        "estimator": config.estimator.value,
        "hpa": config.hpa.kind.value,
        "ibo_db": config.hpa.ibo_db,
        "snr_db": float(snr_db),
        "link_seed": config.seed,
        "split_seed": split_seed,
        "n_symbols": config.spec.n_symbols,
    }
    train = build_dataset(config, snr_db, train_frames, {**meta, "part": "train"}, workers, progress)
    test = build_dataset(config, snr_db, test_frames, {**meta, "part": "test"}, workers, progress)
    logger.info(
        f"Generated {len(train)} train / {len(test)} test rows from {n_frames} frames "
        f"({config.profile.name}, {config.scheme.name.value}, {config.estimator.value}, {snr_db:g} dB)"
    )
    return train, test
