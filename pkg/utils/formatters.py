import json
import logging
import os
from typing import Any, Dict, Optional

import pandas as pd

from config import VERSION

logger = logging.getLogger(__name__)

FLOAT_FORMAT = '%.12g'


def write_csv(frame: pd.DataFrame, path: str) -> str:
    """
    Запись таблицы результатов в CSV

    Args:
        frame: Таблица с фиксированным порядком столбцов
        path: Путь к файлу

    Returns:
        str: Путь к записанному файлу
    """
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator='\n', na_rep='nan')
    logger.info(f"Записан {path} ({len(frame)} строк)")
    return path


def write_sidecar(csv_path: str, config: Dict[str, Any], wall_time: float,
                  extra: Optional[Dict[str, Any]] = None) -> str:
    """JSON-сопровождение: полная конфигурация, версия кода и время счёта"""
    payload = {'version': VERSION, 'config': config, 'wall_time_s': round(wall_time, 3)}
    if extra:
        payload.update(extra)
    path = os.path.splitext(csv_path)[0] + '.json'
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        json.dump(payload, f, indent=2, sort_keys=True, ensure_ascii=False, default=str)
        f.write('\n')
    return path


def format_inventory(order: str, l: int, breakdown: Dict[str, int], total: int) -> str:
    """
    Форматирование числа вещественных уравнений по семействам

    Args:
        order: Порядок разложения
        l: Число кластеров
        breakdown: Число слотов по семействам
        total: Полное число уравнений

    Returns:
        str: Итог в первой строке, затем разбивка
    """
    lines = [str(total), f"# {order}, L={l}"]
    width = max(len(tag) for tag in breakdown)
    for tag, count in breakdown.items():
        lines.append(f"{tag.ljust(width)}  {count}")
    return '\n'.join(lines)


def format_boundary_row(label: str, eta_ratio: float, n_sc: Optional[float], status: str) -> str:
    value = f"{n_sc:.0f}" if n_sc is not None else '-'
    return f"{label}, η/η_crit={eta_ratio:g}: N_sc={value} ({status})"
