"""
Двоякоселективный канал: профили V2V, генерация замираний по сумме синусоид
(спектр Джейкса), прохождение сигнала через линию задержки, AWGN,
истинная частотная характеристика символа и межканальная интерференция (ICI)
"""

from __future__ import annotations

import logging
import math
from typing import Optional, Union

import numpy as np

from xai_chest.models.channel_models import ChannelProfile, ChannelProfileName, ChannelRealization
from xai_chest.models.phy_models import FrameSpec, TimeSignal
from xai_chest.utils.errors import BoundsError, DegenerateInputError, SizeError

logger = logging.getLogger(__name__)

# 8 частот Доплера: при f_d = 1 кГц соседние отстоят не меньше чем на 149 Гц,
# поэтому перекрёстные члены усредняются за 0.1 с
SINUSOIDS_PER_TAP = 8

# Средние мощности лучей [дБ] и задержки [нс] до нормировки
PROFILE_TABLE: dict[ChannelProfileName, tuple[tuple[float, ...], tuple[float, ...]]] = {
    ChannelProfileName.VTV_EX: (
        (0.0, 0.0, 0.0, -6.3, -6.3, -25.1, -25.1, -25.1, -22.7, -22.7, -22.7),
        (0.0, 1.0, 2.0, 100.0, 101.0, 200.0, 201.0, 202.0, 300.0, 301.0, 302.0),
    ),
    ChannelProfileName.VTV_SDWW: (
        (0.0, 0.0, -11.2, -11.2, -19.0, -21.9, -25.3, -25.3, -24.4, -28.0, -26.1, -26.1),
        (0.0, 1.0, 100.0, 101.0, 200.0, 300.0, 400.0, 401.0, 500.0, 600.0, 700.0, 701.0),
    ),
}


def _normalized_db(gains_db: tuple[float, ...]) -> tuple[float, ...]:
    lin = 10.0 ** (np.asarray(gains_db, dtype=float) / 10.0)
    return tuple(float(g) for g in 10.0 * np.log10(lin / lin.sum()))


def make_profile(name: Union[ChannelProfileName, str], doppler_hz: float = 1000.0) -> ChannelProfile:
    """Профиль из таблицы, мощности лучей нормированы к единичной сумме"""
    if doppler_hz < 0:
        raise ValueError("doppler_hz must be non-negative")
    name = ChannelProfileName(name)
    gains_db, delays_ns = PROFILE_TABLE[name]
    return ChannelProfile(
        name=name.value,
        path_gains_db=_normalized_db(gains_db),
        path_delays_ns=delays_ns,
        doppler_hz=doppler_hz,
    )


def static_profile(
    gains_db: tuple[float, ...] = (0.0,),
    delays_ns: tuple[float, ...] = (0.0,),
    normalize: bool = True,
    name: str = "STATIC",
) -> ChannelProfile:
    """Канал без замираний: лучи с постоянными вещественными коэффициентами sqrt(p_l)"""
    gains = _normalized_db(tuple(gains_db)) if normalize else tuple(float(g) for g in gains_db)
    return ChannelProfile(
        name=name,
        path_gains_db=gains,
        path_delays_ns=tuple(float(d) for d in delays_ns),
        doppler_hz=0.0,
        fading=False,
    )


def delays_in_samples(profile: ChannelProfile, sample_rate_hz: float) -> np.ndarray:
    """Округление задержек до ближайшего отсчёта"""
    return np.rint(np.asarray(profile.path_delays_ns) * 1e-9 * sample_rate_hz).astype(np.int64)


def arrival_angles(m: int = SINUSOIDS_PER_TAP) -> np.ndarray:
    """
    Углы прихода α_n = 2π(n + 1/4)/M, n = 0..M-1

    Сдвиг на четверть шага не даёт двум углам иметь одинаковый cos α,
    т.е. все M частот Доплера различны. При чётном M среднее
    e^{j x cos α_n} равно J0(x) с точностью до 2·J_{2M}(x).
    """
    if m < 2 or m % 2:
        raise SizeError(f"number of sinusoids must be even and >= 2, got {m}")
    return 2.0 * np.pi * (np.arange(m) + 0.25) / m


def _sos_process(
    rng: np.random.Generator,
    t: np.ndarray,
    omega_d: float,
    power: float,
    m: int = SINUSOIDS_PER_TAP,
) -> np.ndarray:
    # g(t) = sqrt(p/M) Σ exp(j(ω_d cos α_n t + φ_n)), φ_n ~ U[-π, π)
    doppler = omega_d * np.cos(arrival_angles(m))
    phi = rng.uniform(-np.pi, np.pi, size=m)
    out = np.zeros(t.size, dtype=complex)
    for n in range(m):
        out += np.exp(1j * (doppler[n] * t + phi[n]))
    return np.sqrt(power / m) * out


def generate_realization(
    profile: ChannelProfile,
    num_samples: int,
    sample_rate_hz: float,
    seed: int,
    cp_samples: Optional[int] = None,
) -> ChannelRealization:
    """
    Реализация канала на num_samples отсчётов

    Каждый луч - независимый комплексный гауссов процесс с автокорреляцией
    J0(2π f_d τ) и мощностью из профиля. Для статического профиля
    коэффициенты постоянны.

    Args:
        profile: профиль лучей
        num_samples: длина реализации в отсчётах
        sample_rate_hz: частота дискретизации
        seed: сид реализации
        cp_samples: длина CP; при задержке ≥ CP ставится флаг isi_warning

    Returns:
        ChannelRealization с матрицей [num_samples × num_taps]
    """
    if num_samples <= 0:
        raise SizeError("num_samples must be positive")
    delays = delays_in_samples(profile, sample_rate_hz)
    powers = profile.linear_powers
    if not profile.fading:
        gains = np.broadcast_to(np.sqrt(powers).astype(complex), (num_samples, powers.size))
    else:
        t = np.arange(num_samples) / sample_rate_hz
        omega_d = 2.0 * np.pi * profile.doppler_hz
        children = np.random.SeedSequence(int(seed)).spawn(powers.size)
        gains = np.empty((num_samples, powers.size), dtype=complex)
        for l, child in enumerate(children):
            gains[:, l] = _sos_process(np.random.default_rng(child), t, omega_d, float(powers[l]))

    isi = cp_samples is not None and int(delays.max()) >= cp_samples
    if isi:
        logger.warning(
            f"Profile {profile.name}: max delay {int(delays.max())} samples >= CP {cp_samples}, ISI regime"
        )
    return ChannelRealization(
        tap_gains=gains,
        tap_delays_samples=delays,
        profile=profile,
        seed=int(seed),
        isi_warning=isi,
    )


def apply_channel(tx: TimeSignal, ch: ChannelRealization) -> TimeSignal:
    """y[n] = Σ_l g_l[n]·x[n − d_l]; хвост за пределами входа отбрасывается"""
    n = len(tx)
    if ch.num_samples < n:
        raise SizeError(f"realization covers {ch.num_samples} samples, signal has {n}")
    x = tx.samples
    y = np.zeros(n, dtype=complex)
    for l, d in enumerate(ch.tap_delays_samples):
        d = int(d)
        if d >= n:
            continue
        shifted = np.zeros(n, dtype=complex)
        shifted[d:] = x[: n - d]
        y += ch.tap_gains[:n, l] * shifted
    return TimeSignal(samples=y, sample_rate_hz=tx.sample_rate_hz)


def _useful_gains(ch: ChannelRealization, symbol_index: int, spec: FrameSpec) -> np.ndarray:
    start = symbol_index * spec.symbol_length + spec.k_cp
    stop = start + spec.k_total
    if symbol_index < 0 or stop > ch.num_samples:
        raise BoundsError(
            f"symbol {symbol_index} needs samples [{start}, {stop}), realization has {ch.num_samples}"
        )
    return ch.tap_gains[start:stop]


def true_freq_response(ch: ChannelRealization, symbol_index: int, spec: FrameSpec) -> np.ndarray:
    """
    Истинный канал символа: среднее по полезным отсчётам
    h_i[k] = Σ_l mean_n(g_l[n])·exp(−j2π k d_l / K)

    Слоты считаются от начала реализации (сначала преамбулы, затем данные).
    """
    mean_gains = _useful_gains(ch, symbol_index, spec).mean(axis=0)
    phase = np.exp(-2j * np.pi * np.outer(spec.fft_bins, ch.tap_delays_samples) / spec.k_total)
    return phase @ mean_gains


def true_frame_response(ch: ChannelRealization, spec: FrameSpec) -> np.ndarray:
    """Истинный канал всех слотов кадра: [frame_symbols × k_on]"""
    return np.stack([true_freq_response(ch, i, spec) for i in range(spec.frame_symbols)])


def subcarrier_coupling(ch: ChannelRealization, symbol_index: int, spec: FrameSpec) -> np.ndarray:
    """
    Матрица связи поднесущих C[k, q] одного символа (активные бины)

    C[k, q] = (1/K)·Σ_l G_l((k − q) mod K)·exp(−j2π q d_l / K), где G_l - ДПФ
    коэффициентов луча по полезным отсчётам. Диагональ равна true_freq_response.
    """
    g = _useful_gains(ch, symbol_index, spec)
    big_g = np.fft.fft(g, axis=0)
    bins = spec.fft_bins
    lag = np.mod(bins[:, None] - bins[None, :], spec.k_total)
    phase = np.exp(-2j * np.pi * np.outer(bins, ch.tap_delays_samples) / spec.k_total)
    return np.einsum("kql,ql->kq", big_g[lag], phase) / spec.k_total


def ici_term(ch: ChannelRealization, symbol: np.ndarray, symbol_index: int, spec: FrameSpec) -> np.ndarray:
    """Доплеровская ICI: вклад внедиагональных элементов C в принятый символ"""
    symbol = np.asarray(symbol, dtype=complex)
    if symbol.shape != (spec.k_on,):
        raise SizeError(f"symbol must have {spec.k_on} values")
    coupling = subcarrier_coupling(ch, symbol_index, spec)
    np.fill_diagonal(coupling, 0.0)
    return coupling @ symbol


def add_awgn(signal: TimeSignal, snr_db: float, signal_power_ref: float, seed: int) -> TimeSignal:
    """
    Круговой комплексный гауссов шум с дисперсией ref / 10^(snr_db/10)

    snr_db = +inf означает прогон без шума.
    """
    if math.isinf(snr_db) and snr_db > 0:
        return signal
    if not signal_power_ref > 0:
        raise DegenerateInputError("signal_power_ref must be positive")
    variance = signal_power_ref / 10.0 ** (snr_db / 10.0)
    rng = np.random.default_rng(seed)
    n = len(signal)
    noise = np.sqrt(variance / 2.0) * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    return TimeSignal(samples=signal.samples + noise, sample_rate_hz=signal.sample_rate_hz)
