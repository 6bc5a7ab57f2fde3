import logging
from typing import Optional, Sequence

import matplotlib

matplotlib.use('Agg')
import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402

logger = logging.getLogger(__name__)

# Одинаковые идентификаторы элементов SVG при повторных прогонах
plt.rcParams['svg.hashsalt'] = 'cavity-cumulants'


def line_chart(frame: pd.DataFrame, x: str, y: str, path: str, group_by: Optional[Sequence[str]] = None,
               title: str = '', logx: bool = False, logy: bool = False) -> Optional[str]:
    """
    Простой SVG-график по столбцам таблицы

    Args:
        frame: Таблица результатов
        x: Столбец оси абсцисс
        y: Столбец оси ординат
        path: Путь к SVG
        group_by: Столбцы, по которым строятся отдельные линии
        title: Заголовок
        logx: Логарифмическая ось x
        logy: Логарифмическая ось y

    Returns:
        Optional[str]: Путь к файлу или None, если строить нечего
    """
    data = frame.dropna(subset=[x, y])
    if data.empty:
        logger.warning(f"Нет данных для графика {path}")
        return None

    plt.figure(figsize=(8, 5))
    if group_by:
        for key, group in data.groupby(list(group_by), sort=True):
            key = key if isinstance(key, tuple) else (key,)
            label = ', '.join(f"{name}={value}" for name, value in zip(group_by, key))
            plt.plot(group[x], group[y], "o-", markersize=3, label=label)
        plt.legend(fontsize=8)
    else:
        plt.plot(data[x], data[y], "o-", markersize=3)

    if logx:
        plt.xscale('log')
    if logy:
        plt.yscale('log')
    plt.title(title)
    plt.xlabel(x)
    plt.ylabel(y)
    plt.grid(True)
    plt.tight_layout()
    plt.savefig(path, format='svg', metadata={'Date': None})
    plt.close()
    logger.info(f"Записан график {path}")
    return path
