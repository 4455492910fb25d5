"""
Сквозное моделирование OFDM-линии

Кадр: биты → созвездие → кадр с преамбулами → IFFT/CP → HPA → канал →
AWGN → FFT → оценка канала (LS, затем DPA/STA/TRFI, опционально U-модель)
→ выравнивание zero-forcing → жёсткие решения → подсчёт битовых ошибок.

Сиды кадра f выводятся из LinkConfig.seed: биты и канал зависят только от f
(одинаковы для всех точек SNR), шум - от (SNR, f).
"""

from __future__ import annotations

import logging
import math
from typing import NamedTuple, Optional

import numpy as np

from xai_chest.models.estimation_models import EstimatorState
from xai_chest.models.eval_models import BerCurve, BerPoint, LinkConfig, LinkResult
from xai_chest.models.nn_models import Mlp
from xai_chest.models.xai_models import RelevanceSet
from xai_chest.services.channel_service import (
    add_awgn,
    apply_channel,
    generate_realization,
    true_frame_response,
)
from xai_chest.services.estimation_service import conventional_step, ls_preamble
from xai_chest.services.neural_service import predict, stack_complex, unstack_real
from xai_chest.services.phy_service import (
    build_frame,
    demap_nearest,
    hpa_apply,
    map_bits,
    ofdm_demodulate,
    ofdm_modulate,
    preamble_symbol,
)
from xai_chest.utils.parallel import run_ordered
from xai_chest.utils.seeding import SeedStream, derive_seed, make_rng

logger = logging.getLogger(__name__)

FRAMES_PER_CHUNK = 25


def snr_counter(snr_db: float) -> int:
    """Целочисленный счётчик точки SNR для иерархии сидов"""
    if math.isinf(snr_db):
        return 0x7FFFFFFF
    return int(round(snr_db * 1000)) & 0xFFFFFFFF


class FrameObservation(NamedTuple):
    """Принятый кадр и всё, что о нём известно симулятору"""
    bits: np.ndarray
    rx: np.ndarray
    true_response: np.ndarray
    isi_warning: bool


class FrameOutcome(NamedTuple):
    bit_errors: int
    total_bits: int
    mse_sum: float
    mse_count: int
    excluded: bool


def transmit_frame(config: LinkConfig, frame_index: int, snr_db: float) -> FrameObservation:
    """Передача одного кадра через HPA, канал и AWGN"""
    spec, scheme = config.spec, config.scheme
    bits = make_rng(config.seed, SeedStream.BITS, frame_index).integers(
        0, 2, size=config.bits_per_frame, dtype=np.uint8
    )
    data_frame = build_frame(map_bits(bits, scheme), spec)
    preambles = np.tile(preamble_symbol(spec), (spec.n_preambles, 1))
    tx = ofdm_modulate(np.vstack([preambles, data_frame]), spec)
    tx = hpa_apply(tx, config.hpa)

    channel = generate_realization(
        config.profile,
        len(tx),
        spec.sample_rate_hz,
        derive_seed(config.seed, SeedStream.CHANNEL, frame_index),
        cp_samples=spec.k_cp,
    )
    rx = apply_channel(tx, channel)
    rx = add_awgn(
        rx,
        snr_db,
        tx.mean_power,
        derive_seed(config.seed, SeedStream.NOISE, snr_counter(snr_db), frame_index),
    )
    return FrameObservation(
        bits=bits,
        rx=ofdm_demodulate(rx, spec),
        true_response=true_frame_response(channel, spec),
        isi_warning=channel.isi_warning,
    )


def refine_estimate(model: Mlp, h_conv: np.ndarray, relevance: Optional[RelevanceSet]) -> np.ndarray:
    """Сложить оценку Φ, оставить столбцы Ψ, прогнать через U и разложить обратно"""
    x = stack_complex(h_conv)
    if relevance is not None:
        x = x[relevance.input_columns()]
    return unstack_real(predict(model, x))


def simulate_frame(
    config: LinkConfig,
    frame_index: int,
    snr_db: float,
) -> FrameOutcome:
    """Один кадр: оценка канала по символам, выравнивание и подсчёт ошибок"""
    spec, scheme = config.spec, config.scheme
    obs = transmit_frame(config, frame_index, snr_db)
    p = spec.n_preambles
    state = EstimatorState.from_preamble(ls_preamble(obs.rx[:p], preamble_symbol(spec)))
    bits_per_symbol_row = spec.k_data * scheme.bits_per_symbol

    errors = 0
    mse_sum = 0.0
    for i in range(spec.n_symbols):
        y_i = obs.rx[p + i]
        h_true = obs.true_response[p + i]
        if config.genie:
            h_hat = h_true
        else:
            h_conv, state = conventional_step(config.estimator, y_i, state, scheme, spec, config.sta)
            h_hat = h_conv
            if config.model is not None:
                h_hat = refine_estimate(config.model, h_conv, config.relevance)
                if config.feedback_fnn:
                    state = state.with_estimate(h_hat)
        # все k_on: нулевая пилотная оценка сломала бы следующий шаг DPA
        if not np.all(np.isfinite(h_hat)) or np.any(h_hat == 0):
            logger.debug(f"Frame {frame_index}: non-finite or zero estimate at symbol {i}, frame excluded")
            return FrameOutcome(0, 0, 0.0, 0, True)
        equalized = y_i[spec.data_indices] / h_hat[spec.data_indices]
        _, decided = demap_nearest(equalized, scheme)
        sent = obs.bits[i * bits_per_symbol_row:(i + 1) * bits_per_symbol_row]
        errors += int(np.count_nonzero(decided != sent))
        mse_sum += float(np.mean(np.abs(h_hat - h_true) ** 2))

    return FrameOutcome(
        bit_errors=errors,
        total_bits=config.bits_per_frame,
        mse_sum=mse_sum,
        mse_count=spec.n_symbols,
        excluded=False,
    )


def _simulate_chunk(args: tuple[LinkConfig, float, range]) -> LinkResult:
    config, snr_db, frames = args
    result = LinkResult(snr_db=snr_db, bit_errors=0, total_bits=0)
    for f in frames:
        out = simulate_frame(config, f, snr_db)
        result = result.merge(
            LinkResult(
                snr_db=snr_db,
                bit_errors=out.bit_errors,
                total_bits=out.total_bits,
                mse_sum=out.mse_sum,
                mse_count=out.mse_count,
                excluded_frames=int(out.excluded),
            )
        )
    return result


def run_link(config: LinkConfig, snr_db: float, workers: int = 1, progress: bool = False) -> LinkResult:
    """
    BER одной точки SNR по config.n_frames кадрам

    Returns:
        LinkResult: ошибки, число битов, средний MSE канала, исключённые кадры
    """
    chunks = [
        (config, float(snr_db), range(start, min(start + FRAMES_PER_CHUNK, config.n_frames)))
        for start in range(0, config.n_frames, FRAMES_PER_CHUNK)
    ]
    parts = run_ordered(_simulate_chunk, chunks, workers=workers, desc=f"SNR {snr_db:g} dB", progress=progress)
    result = LinkResult(snr_db=float(snr_db), bit_errors=0, total_bits=0)
    for part in parts:
        result = result.merge(part)
    if result.excluded_frames:
        logger.warning(f"SNR {snr_db:g} dB: {result.excluded_frames} frames excluded (non-finite estimate)")
    return result


def ber_curve(config: LinkConfig, config_digest: str = "", workers: int = 1, progress: bool = False) -> BerCurve:
    """BER по всей сетке SNR, без сглаживания"""
    points = []
    for snr_db in config.snr_grid_db:
        r = run_link(config, snr_db, workers=workers, progress=progress)
        points.append(
            BerPoint(
                snr_db=float(snr_db),
                bit_errors=r.bit_errors,
                total_bits=r.total_bits,
                ber=r.ber,
                mse_channel=r.mse_channel,
                excluded_frames=r.excluded_frames,
            )
        )
        logger.info(f"SNR {snr_db:g} dB: BER {r.ber:.4e} ({r.bit_errors}/{r.total_bits}), MSE {r.mse_channel:.3e}")
    return BerCurve(points=points, config_digest=config_digest)


def with_model(config: LinkConfig, model: Optional[Mlp], relevance: Optional[RelevanceSet]) -> LinkConfig:
    """Копия конфигурации с другой U-моделью (с проверкой размерностей)"""
    fields = {name: getattr(config, name) for name in LinkConfig.model_fields}
    fields.update(model=model, relevance=relevance)
    return LinkConfig(**fields)


class LinkEvaluator:
    """BER модели на фиксированной точке SNR; сериализуется для процессов"""

    def __init__(self, config: LinkConfig, snr_db: float) -> None:
        self.config = config
        self.snr_db = float(snr_db)

    def __call__(self, model: Mlp, relevance: Optional[RelevanceSet]) -> LinkResult:
        return run_link(with_model(self.config, model, relevance), self.snr_db)
