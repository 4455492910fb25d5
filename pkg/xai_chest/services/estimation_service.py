"""
Классические оценщики канала (стадия Φ перед U-моделью)

LS по преамбулам, DPA-трекинг с решениями по данным, STA (усреднение по
частоте и времени поверх DPA) и TRFI (проверка надёжности + кубическая
интерполяция поверх DPA). Каждый шаг - чистая функция от состояния.
"""

from __future__ import annotations

import logging
from typing import NamedTuple, Optional, Union

import numpy as np
from scipy.interpolate import CubicSpline

from xai_chest.models.estimation_models import EstimatorKind, EstimatorState, StaParams
from xai_chest.models.phy_models import FrameSpec, ModulationScheme
from xai_chest.services.phy_service import demap_nearest
from xai_chest.utils.errors import DegenerateInputError, SizeError

logger = logging.getLogger(__name__)

MIN_RELIABLE = 4


def ls_preamble(rx_preambles: np.ndarray, known_preamble: np.ndarray) -> np.ndarray:
    """LS-оценка: среднее по преамбулам от rx / known"""
    rx = np.atleast_2d(np.asarray(rx_preambles, dtype=complex))
    known = np.asarray(known_preamble, dtype=complex)
    if rx.shape[0] < 1:
        raise SizeError("at least one received preamble is required")
    if rx.shape[1] != known.size:
        raise SizeError(f"preamble length mismatch: {rx.shape[1]} vs {known.size}")
    if np.any(known == 0):
        raise DegenerateInputError("known preamble has a zero on an active subcarrier")
    return np.mean(rx / known[None, :], axis=0)


def dpa_step(
    y_i: np.ndarray,
    h_prev: np.ndarray,
    scheme: ModulationScheme,
    spec: FrameSpec,
) -> tuple[np.ndarray, np.ndarray]:
    """
    Шаг DPA: данные выравниваются по h_prev и демапятся, пилоты известны

    Returns:
        (h_dpa = y_i / d_i, d_i)
    """
    y_i = np.asarray(y_i, dtype=complex)
    h_prev = np.asarray(h_prev, dtype=complex)
    if y_i.shape != (spec.k_on,) or h_prev.shape != (spec.k_on,):
        raise SizeError(f"DPA expects vectors of length {spec.k_on}")
    if np.any(h_prev == 0):
        raise DegenerateInputError("previous channel estimate has a zero entry")
    d = np.empty(spec.k_on, dtype=complex)
    d[spec.data_indices], _ = demap_nearest(y_i[spec.data_indices] / h_prev[spec.data_indices], scheme)
    d[spec.pilot_indices] = spec.pilot_values
    return y_i / d, d


def frequency_average(h: np.ndarray, beta: int) -> np.ndarray:
    """Равновесное окно ±β по поднесущим; у краёв окно усекается и перенормируется"""
    h = np.asarray(h, dtype=complex)
    n = h.size
    acc = np.zeros(n, dtype=complex)
    count = np.zeros(n)
    for lag in range(-beta, beta + 1):
        lo, hi = max(0, -lag), min(n, n - lag)
        acc[lo:hi] += h[lo + lag:hi + lag]
        count[lo:hi] += 1
    return acc / count


def time_average(h_sta_prev: np.ndarray, h_fd: np.ndarray, alpha: float) -> np.ndarray:
    """(1 − 1/α)·h_sta_prev + (1/α)·h_fd"""
    return (1.0 - 1.0 / alpha) * np.asarray(h_sta_prev) + (1.0 / alpha) * np.asarray(h_fd)


def sta_estimate(
    y_i: np.ndarray,
    h_sta_prev: np.ndarray,
    params: StaParams,
    scheme: ModulationScheme,
    spec: FrameSpec,
    h_dpa_prev: Optional[np.ndarray] = None,
) -> np.ndarray:
    """
    STA поверх DPA

    Опорная оценка для DPA - h_dpa_prev, если задана (отдельный DPA-трек),
    иначе предыдущий выход STA.
    """
    reference = h_sta_prev if h_dpa_prev is None else h_dpa_prev
    h_dpa, _ = dpa_step(y_i, reference, scheme, spec)
    return time_average(h_sta_prev, frequency_average(h_dpa, params.beta), params.alpha)


def interpolate_unreliable(h: np.ndarray, reliable: np.ndarray, positions: np.ndarray) -> np.ndarray:
    """
    Ненадёжные поднесущие заменяются кубическим сплайном (not-a-knot)
    по надёжным; вещественная и мнимая части интерполируются отдельно
    """
    h = np.asarray(h, dtype=complex)
    reliable = np.asarray(reliable, dtype=bool)
    if int(reliable.sum()) < MIN_RELIABLE:
        raise DegenerateInputError(f"cubic interpolation needs {MIN_RELIABLE} reliable subcarriers")
    x = np.asarray(positions, dtype=float)
    out = h.copy()
    target = x[~reliable]
    if target.size:
        re = CubicSpline(x[reliable], h[reliable].real, extrapolate=True)(target)
        im = CubicSpline(x[reliable], h[reliable].imag, extrapolate=True)(target)
        out[~reliable] = re + 1j * im
    return out


class TrfiOutcome(NamedTuple):
    estimate: np.ndarray
    reliable: np.ndarray
    fell_back: bool


def trfi_step(
    y_i: np.ndarray,
    y_prev: Optional[np.ndarray],
    h_prev: np.ndarray,
    scheme: ModulationScheme,
    spec: FrameSpec,
) -> TrfiOutcome:
    """TRFI с маской надёжности и признаком отката на DPA"""
    h_dpa, _ = dpa_step(y_i, h_prev, scheme, spec)
    reliable = np.ones(spec.k_on, dtype=bool)
    if y_prev is None:
        return TrfiOutcome(h_dpa, reliable, False)
    y_prev = np.asarray(y_prev, dtype=complex)
    data = spec.data_indices
    with np.errstate(divide="ignore", invalid="ignore"):
        cand, _ = demap_nearest(y_prev[data] / h_dpa[data], scheme)
    prev, _ = demap_nearest(y_prev[data] / np.asarray(h_prev)[data], scheme)
    reliable[data] = cand == prev
    if int(reliable.sum()) < MIN_RELIABLE:
        logger.debug("TRFI: fewer than 4 reliable subcarriers, keeping DPA estimate")
        return TrfiOutcome(h_dpa, reliable, True)
    return TrfiOutcome(interpolate_unreliable(h_dpa, reliable, spec.subcarriers), reliable, False)


def trfi_estimate(
    y_i: np.ndarray,
    y_prev: Optional[np.ndarray],
    h_prev: np.ndarray,
    scheme: ModulationScheme,
    spec: FrameSpec,
) -> np.ndarray:
    return trfi_step(y_i, y_prev, h_prev, scheme, spec).estimate


def conventional_step(
    kind: Union[EstimatorKind, str],
    y_i: np.ndarray,
    state: EstimatorState,
    scheme: ModulationScheme,
    spec: FrameSpec,
    params: StaParams = StaParams(),
) -> tuple[np.ndarray, EstimatorState]:
    """
    Один OFDM-символ выбранного оценщика

    Returns:
        (оценка канала символа, новое состояние)
    """
    kind = EstimatorKind(kind)
    y_i = np.asarray(y_i, dtype=complex)
    if kind == EstimatorKind.DPA:
        h, _ = dpa_step(y_i, state.h_prev, scheme, spec)
        return h, EstimatorState(h_prev=h, h_sta_prev=h, y_prev=y_i, trfi_fallbacks=state.trfi_fallbacks)

    if kind == EstimatorKind.STA:
        reference = state.h_sta_prev if params.sta_track == "sta" else state.h_prev
        h_dpa, _ = dpa_step(y_i, reference, scheme, spec)
        h = time_average(state.h_sta_prev, frequency_average(h_dpa, params.beta), params.alpha)
        return h, EstimatorState(h_prev=h_dpa, h_sta_prev=h, y_prev=y_i, trfi_fallbacks=state.trfi_fallbacks)

    outcome = trfi_step(y_i, state.y_prev, state.h_prev, scheme, spec)
    h = outcome.estimate
    return h, EstimatorState(
        h_prev=h,
        h_sta_prev=h,
        y_prev=y_i,
        trfi_fallbacks=state.trfi_fallbacks + int(outcome.fell_back),
    )


def run_conventional(
    frame_rx: np.ndarray,
    h_ls: np.ndarray,
    kind: Union[EstimatorKind, str],
    params: StaParams,
    scheme: ModulationScheme,
    spec: FrameSpec,
) -> np.ndarray:
    """Оценки для всех символов данных кадра: [I × k_on], старт от ĥ_LS"""
    frame_rx = np.atleast_2d(np.asarray(frame_rx, dtype=complex))
    state = EstimatorState.from_preamble(np.asarray(h_ls, dtype=complex))
    estimates = np.empty_like(frame_rx)
    for i, y_i in enumerate(frame_rx):
        estimates[i], state = conventional_step(kind, y_i, state, scheme, spec, params)
    if state.trfi_fallbacks:
        logger.debug(f"TRFI fell back to DPA on {state.trfi_fallbacks} of {len(frame_rx)} symbols")
    return estimates
