"""Кэш стационарных решений и точек границы в SQLite.

Ключ строится по всем входным данным прогона, поэтому повторное
использование даёт те же числа, что и свежий расчёт.
"""
import hashlib
import json
import logging
from typing import Optional

import numpy as np

from config import ENABLE_RESULTS_CACHE
from database.db_manager import get_session, init_db
from database.models import BoundaryRecord, StationaryRun

logger = logging.getLogger(__name__)

_initialized = False


def _jsonable(value):
    if isinstance(value, np.ndarray):
        return [float(v).hex() for v in value.ravel()]
    if isinstance(value, (float, np.floating)):
        return float(value).hex()
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if hasattr(value, 'value'):
        return value.value
    return value


def make_key(**parts) -> str:
    """SHA-256 по каноническому JSON (числа записываются в hex без потерь)"""
    payload = json.dumps(_jsonable(parts), sort_keys=True, separators=(',', ':'))
    return hashlib.sha256(payload.encode('utf-8')).hexdigest()


def stationary_key(order, params, ensemble, seed: str, sz0_grid, integrator) -> str:
    return make_key(kind='stationary', order=order, params=params.as_dict(),
                    delta=ensemble.delta, g=ensemble.g, weight=ensemble.weight,
                    seed=seed, sz0_grid=list(sz0_grid), integrator=integrator.as_dict())


def _ensure_db() -> None:
    global _initialized
    if not _initialized:
        init_db()
        _initialized = True


def cache_enabled(requested: bool = False) -> bool:
    return requested or ENABLE_RESULTS_CACHE


def lookup_stationary(key: str) -> Optional[dict]:
    _ensure_db()
    with get_session() as session:
        row = session.query(StationaryRun).filter(StationaryRun.key == key).first()
        if row is None:
            return None
        logger.debug(f"Cache hit {key[:12]}: {row}")
        return {'abs_a_sq': row.abs_a_sq, 'sz0': row.sz0, 'outcome': row.outcome, 'final_time': row.final_time}


def store_stationary(key: str, order: str, eta: float, total_spins: float, abs_a_sq: float,
                     sz0: Optional[float], outcome: str, final_time: Optional[float]) -> None:
    _ensure_db()
    with get_session() as session:
        if session.query(StationaryRun).filter(StationaryRun.key == key).first() is not None:
            return
        session.add(StationaryRun(key=key, order=order, eta=eta, total_spins=total_spins, abs_a_sq=abs_a_sq,
                                  sz0=sz0, outcome=outcome, final_time=final_time))


def lookup_boundary(key: str) -> Optional[dict]:
    _ensure_db()
    with get_session() as session:
        row = session.query(BoundaryRecord).filter(BoundaryRecord.key == key).first()
        if row is None:
            return None
        return {'n_sc': row.n_sc, 'd12': row.d12, 'd23': row.d23, 'd13': row.d13, 'status': row.status}


def store_boundary(key: str, label: str, eta_ratio: float, n_sc: Optional[float], d12: Optional[float],
                   d23: Optional[float], d13: Optional[float], status: str) -> None:
    _ensure_db()
    with get_session() as session:
        if session.query(BoundaryRecord).filter(BoundaryRecord.key == key).first() is not None:
            return
        session.add(BoundaryRecord(key=key, label=label, eta_ratio=eta_ratio, n_sc=n_sc,
                                   d12=d12, d23=d23, d13=d13, status=status))
        logger.info(f"Точка границы {label}, ratio={eta_ratio} сохранена")


def reset() -> None:
    """Сброс флага инициализации (после смены движка в тестах)"""
    global _initialized
    _initialized = False
