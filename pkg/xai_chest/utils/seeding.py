"""
Иерархия сидов

Все случайные величины запуска выводятся из master_seed. Место розыгрыша
называет свой поток и счётчики (номер кадра, эпохи, луча) и получает
независимый 32-битный сид:

    derive_seed(master, SeedStream.CHANNEL, snr_index, frame_index)

Счётчики перемешиваются numpy.random.SeedSequence, поэтому соседние счётчики
дают несвязанные потоки, а изменение одного потока не трогает остальные
"""

from __future__ import annotations

from enum import IntEnum

import numpy as np


class SeedStream(IntEnum):
    BITS = 1
    CHANNEL = 2
    NOISE = 3
    INIT = 4
    SHUFFLE = 5
    EPSILON = 6
    PROBE = 7
    SPLIT = 8


def derive_seed(master_seed: int, stream: SeedStream, *counters: int) -> int:
    """Сид для пары (поток, счётчики)"""
    entropy = [int(master_seed) & 0xFFFFFFFF, int(stream), *(int(c) & 0xFFFFFFFF for c in counters)]
    return int(np.random.SeedSequence(entropy).generate_state(1, dtype=np.uint32)[0])


def make_rng(master_seed: int, stream: SeedStream, *counters: int) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master_seed, stream, *counters))
