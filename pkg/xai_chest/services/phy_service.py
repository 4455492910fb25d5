"""
Физический уровень: отображение битов в созвездие и обратно, сборка
OFDM-кадра, модуляция IFFT/CP, демодуляция и нелинейный усилитель (Rapp)
с разложением Бусганга

Все функции чистые: результат зависит только от аргументов.
"""

from __future__ import annotations

import logging
from functools import lru_cache
from typing import Union

import numpy as np

from xai_chest.models.phy_models import (
    FrameSpec,
    HpaKind,
    HpaModel,
    ModulationName,
    ModulationScheme,
    TimeSignal,
)
from xai_chest.utils.errors import DegenerateInputError, SizeError

logger = logging.getLogger(__name__)

BITS_PER_SYMBOL = {
    ModulationName.QPSK: 2,
    ModulationName.QAM16: 4,
    ModulationName.QAM64: 6,
}

# 802.11p: активные поднесущие −26..−1, +1..+26, пилоты на ±7 и ±21
ACTIVE_SUBCARRIERS = tuple(list(range(-26, 0)) + list(range(1, 27)))
PILOT_SUBCARRIERS = (-21, -7, 7, 21)

PREAMBLE_SEED = 0x80211


def _gray_inverse(g: np.ndarray) -> np.ndarray:
    i = g.copy()
    shift = g >> 1
    while np.any(shift):
        i ^= shift
        shift >>= 1
    return i


@lru_cache(maxsize=None)
def make_scheme(name: Union[ModulationName, str]) -> ModulationScheme:
    """
    Прямоугольное QAM-созвездие с кодом Грея и единичной средней мощностью

    Старшая половина кодового слова задаёт уровень по I, младшая - по Q.
    Уровень с индексом i (от +(L−1) вниз) несёт слово Грея i ^ (i >> 1).

    Args:
        name: QPSK, QAM16 или QAM64

    Returns:
        ModulationScheme, где points[c] - точка кодового слова c
    """
    name = ModulationName(name)
    bps = BITS_PER_SYMBOL[name]
    m = bps // 2
    levels = 2 ** m
    codes = np.arange(2 ** bps)
    i_idx = _gray_inverse(codes >> m)
    q_idx = _gray_inverse(codes & (levels - 1))
    points = ((levels - 1) - 2 * i_idx) + 1j * ((levels - 1) - 2 * q_idx)
    points = points / np.sqrt(np.mean(np.abs(points) ** 2))
    return ModulationScheme(name=name, points=points, bits_per_symbol=bps)


def make_frame_spec(
    n_symbols: int = 50,
    n_preambles: int = 2,
    k_cp: int = 16,
    sample_rate_hz: float = 10e6,
) -> FrameSpec:
    """Нумерология IEEE 802.11p (K=64, K_on=52, 4 пилота +1)"""
    subcarriers = np.asarray(ACTIVE_SUBCARRIERS)
    pilot_pos = np.flatnonzero(np.isin(subcarriers, PILOT_SUBCARRIERS))
    data_pos = np.flatnonzero(~np.isin(subcarriers, PILOT_SUBCARRIERS))
    return FrameSpec(
        k_total=64,
        k_on=52,
        k_pilot=4,
        k_data=48,
        k_null=12,
        k_cp=k_cp,
        n_symbols=n_symbols,
        n_preambles=n_preambles,
        subcarriers=subcarriers,
        pilot_indices=pilot_pos,
        data_indices=data_pos,
        pilot_values=np.ones(pilot_pos.size, dtype=complex),
        sample_rate_hz=sample_rate_hz,
    )


def bpsk_points() -> np.ndarray:
    """Созвездие BPSK: бит 0 → +1, бит 1 → −1 (только для преамбулы)"""
    return np.array([1.0 + 0j, -1.0 + 0j])


@lru_cache(maxsize=8)
def _preamble(k_on: int) -> np.ndarray:
    rng = np.random.default_rng(PREAMBLE_SEED)
    values = bpsk_points()[rng.integers(0, 2, size=k_on)]
    values.setflags(write=False)
    return values


def preamble_symbol(spec: FrameSpec) -> np.ndarray:
    """Известная BPSK-преамбула ±1 на всех активных поднесущих"""
    return _preamble(spec.k_on)


def bits_to_ints(bits: np.ndarray, bits_per_symbol: int) -> np.ndarray:
    bits = np.asarray(bits, dtype=np.int64).ravel()
    if bits.size % bits_per_symbol:
        raise SizeError(f"bit count {bits.size} is not divisible by {bits_per_symbol}")
    weights = 1 << np.arange(bits_per_symbol - 1, -1, -1)
    return bits.reshape(-1, bits_per_symbol) @ weights


def ints_to_bits(ints: np.ndarray, bits_per_symbol: int) -> np.ndarray:
    ints = np.asarray(ints, dtype=np.int64).ravel()
    shifts = np.arange(bits_per_symbol - 1, -1, -1)
    return ((ints[:, None] >> shifts[None, :]) & 1).astype(np.uint8).ravel()


def map_bits(bits: np.ndarray, scheme: ModulationScheme) -> np.ndarray:
    """Группы по bits_per_symbol битов (старший первым) -> точки созвездия"""
    return scheme.points[bits_to_ints(bits, scheme.bits_per_symbol)]


def demap_nearest(symbols: np.ndarray, scheme: ModulationScheme) -> tuple[np.ndarray, np.ndarray]:
    """
    Жёсткое решение: ближайшая по Евклиду точка созвездия

    При равных расстояниях выигрывает точка с меньшим индексом.

    Returns:
        (точки решений той же формы, что и symbols; биты решений)
    """
    symbols = np.asarray(symbols, dtype=complex)
    flat = symbols.ravel()
    dist = np.abs(flat[:, None] - scheme.points[None, :]) ** 2
    idx = np.argmin(dist, axis=1)
    return scheme.points[idx].reshape(symbols.shape), ints_to_bits(idx, scheme.bits_per_symbol)


def build_frame(data: np.ndarray, spec: FrameSpec) -> np.ndarray:
    """
    Раскладка символов данных и пилотов по активным поднесущим

    Returns:
        Матрица [n_symbols × k_on]
    """
    data = np.asarray(data, dtype=complex).ravel()
    expected = spec.n_symbols * spec.k_data
    if data.size != expected:
        raise SizeError(f"frame needs {expected} data symbols, got {data.size}")
    frame = np.zeros((spec.n_symbols, spec.k_on), dtype=complex)
    frame[:, spec.pilot_indices] = spec.pilot_values
    frame[:, spec.data_indices] = data.reshape(spec.n_symbols, spec.k_data)
    return frame


def extract_data(frame: np.ndarray, spec: FrameSpec) -> np.ndarray:
    """Обратная к build_frame выборка поднесущих данных"""
    return np.asarray(frame)[..., spec.data_indices]


def ofdm_modulate(symbols: np.ndarray, spec: FrameSpec) -> TimeSignal:
    """IFFT (унитарная нормировка) и циклический префикс для каждого символа"""
    symbols = np.atleast_2d(np.asarray(symbols, dtype=complex))
    if symbols.shape[1] != spec.k_on:
        raise SizeError(f"OFDM symbols must have {spec.k_on} active values, got {symbols.shape[1]}")
    grid = np.zeros((symbols.shape[0], spec.k_total), dtype=complex)
    grid[:, spec.fft_bins] = symbols
    time = np.fft.ifft(grid, axis=1, norm="ortho")
    with_cp = np.concatenate([time[:, spec.k_total - spec.k_cp:], time], axis=1)
    return TimeSignal(samples=with_cp.ravel(), sample_rate_hz=spec.sample_rate_hz)


def ofdm_demodulate(signal: TimeSignal, spec: FrameSpec) -> np.ndarray:
    """Удаление CP, FFT и выборка активных поднесущих: [n × k_on]"""
    n = len(signal)
    if n % spec.symbol_length:
        raise SizeError(f"{n} samples do not split into OFDM symbols of {spec.symbol_length}")
    blocks = signal.samples.reshape(-1, spec.symbol_length)[:, spec.k_cp:]
    freq = np.fft.fft(blocks, axis=1, norm="ortho")
    return freq[:, spec.fft_bins]


def saturation_amplitude(mean_input_power: float, ibo_db: float) -> float:
    """A_sat = sqrt(P_in · 10^(IBO/10))"""
    return float(np.sqrt(mean_input_power * 10.0 ** (ibo_db / 10.0)))


def _rapp_gain(r: np.ndarray, p: float) -> np.ndarray:
    # (1 + r^2p)^(−1/2p), без переполнения при r ≫ 1
    gain = np.empty_like(r)
    small = r <= 1.0
    gain[small] = (1.0 + r[small] ** (2 * p)) ** (-1.0 / (2 * p))
    big = ~small
    gain[big] = (1.0 / r[big]) * (1.0 + r[big] ** (-2 * p)) ** (-1.0 / (2 * p))
    return gain


def hpa_apply(signal: TimeSignal, hpa: HpaModel) -> TimeSignal:
    """
    Усилитель мощности без памяти (только AM/AM)

    Уровень насыщения задаётся ibo_db относительно средней мощности входа.
    Линейная модель возвращает вход без изменений.
    """
    if hpa.kind == HpaKind.LINEAR:
        return signal
    power = signal.mean_power
    if power == 0.0:
        return signal
    a_sat = saturation_amplitude(power, hpa.ibo_db)
    x = signal.samples
    gain = _rapp_gain(np.abs(x) / a_sat, hpa.smoothness)
    return TimeSignal(samples=x * gain, sample_rate_hz=signal.sample_rate_hz)


def bussgang_decompose(input: TimeSignal, output: TimeSignal) -> tuple[complex, TimeSignal]:
    """
    Разложение Бусганга: output = rho·(input + distortion)

    rho = <output, input> / <input, input>, поэтому distortion ортогонально входу.
    """
    if len(input) != len(output):
        raise SizeError(f"signal lengths differ: {len(input)} vs {len(output)}")
    x, y = input.samples, output.samples
    energy = float(np.vdot(x, x).real)
    if energy == 0.0:
        raise DegenerateInputError("Bussgang decomposition needs nonzero input power")
    rho = complex(np.vdot(x, y) / energy)
    if rho == 0:
        raise DegenerateInputError("output is uncorrelated with input (rho = 0)")
    distortion = y / rho - x
    return rho, TimeSignal(samples=distortion, sample_rate_hz=input.sample_rate_hz)


def calibrate_hpa(hpa: HpaModel, signal: TimeSignal) -> HpaModel:
    """Оценивает rho по сигналу и возвращает модель с заполненным полем"""
    if hpa.kind == HpaKind.LINEAR:
        return hpa.model_copy(update={"rho": 1.0 + 0j})
    rho, _ = bussgang_decompose(signal, hpa_apply(signal, hpa))
    logger.debug(f"Bussgang gain at IBO={hpa.ibo_db} dB: |rho|={abs(rho):.4f}")
    return hpa.model_copy(update={"rho": rho})
