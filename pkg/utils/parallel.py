import logging
from multiprocessing import Pool
from typing import Callable, List, Sequence, TypeVar

logger = logging.getLogger(__name__)

T = TypeVar('T')
R = TypeVar('R')


def run_parallel(func: Callable[[T], R], tasks: Sequence[T], workers: int = 1) -> List[R]:
    """Применение func к задачам с сохранением порядка.

    Args:
        func: Функция уровня модуля (передаётся в дочерние процессы)
        tasks: Независимые задачи
        workers: Число процессов; 1 и меньше - последовательно в текущем процессе

    Returns:
        List: Результаты в порядке задач независимо от порядка завершения
    """
    tasks = list(tasks)
    if workers <= 1 or len(tasks) <= 1:
        return [func(task) for task in tasks]
    processes = min(workers, len(tasks))
    logger.info(f"Запуск {len(tasks)} задач в {processes} процессах")
    with Pool(processes=processes) as pool:
        return pool.map(func, tasks, chunksize=1)
