"""
Параллельное выполнение независимых элементов работы

Результаты возвращаются в порядке подачи, поэтому суммы и строки CSV
не зависят от числа воркеров
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, TypeVar

from tqdm import tqdm

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def run_ordered(
    fn: Callable[[T], R],
    items: Iterable[T],
    workers: int = 1,
    desc: str = "",
    progress: bool = False,
) -> list[R]:
    """
    Применить fn к каждому элементу items; при workers > 1 fn и элементы
    должны сериализоваться pickle

    Args:
        fn: функция уровня модуля
        items: элементы работы
        workers: число процессов; 1 - выполнение в текущем процессе
        desc: подпись прогресс-бара
        progress: показывать прогресс-бар tqdm

    Returns:
        Результаты в порядке items
    """
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in tqdm(items, desc=desc, disable=not progress, leave=False)]
    logger.debug(f"{desc}: {len(items)} items on {workers} workers")
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(fn, item) for item in items]
        return [f.result() for f in tqdm(futures, desc=desc, disable=not progress, leave=False)]
