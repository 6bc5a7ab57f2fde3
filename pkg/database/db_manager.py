import logging
import os
import traceback
from contextlib import contextmanager
from typing import Optional
from sqlalchemy import create_engine
from sqlalchemy.orm import sessionmaker, scoped_session

from config import DB_ENGINE
from database.models import Base, StationaryRun, BoundaryRecord

# Настройка логирования
logger = logging.getLogger(__name__)

Session = scoped_session(sessionmaker(autoflush=True))
engine = None


def configure_engine(url: str = DB_ENGINE):
    """Создание движка и привязка фабрики сессий (тесты передают sqlite:///:memory:)"""
    global engine

    if url.startswith('sqlite:///'):
        db_path = url.replace('sqlite:///', '')
        if db_path != ':memory:':
            os.makedirs(os.path.dirname(os.path.abspath(db_path)), exist_ok=True)
        engine = create_engine(
            url,
            connect_args={"check_same_thread": False},  # Для SQLite
            echo=False
        )
    else:
        engine = create_engine(url, echo=False)

    Session.remove()
    Session.configure(bind=engine)
    return engine


def init_db(url: Optional[str] = None):
    """Инициализация кэша результатов (без url используется уже настроенный движок)"""
    try:
        if url is not None or engine is None:
            configure_engine(url or DB_ENGINE)
        logger.info(f"Кэш результатов: {engine.url}")

        # Создаем все таблицы
        Base.metadata.create_all(engine)

        with get_session() as session:
            runs = session.query(StationaryRun).count()
            boundaries = session.query(BoundaryRecord).count()
            logger.info(f"В кэше {runs} стационарных решений и {boundaries} точек границы")

    except Exception as e:
        logger.error(f"Ошибка инициализации базы данных: {e}")
        logger.error(traceback.format_exc())
        raise


@contextmanager
def get_session():
    """Контекстный менеджер для работы с сессией базы данных"""
    if engine is None:
        configure_engine()
    session = Session()
    try:
        logger.debug("Открыта новая сессия базы данных")
        yield session
        session.commit()
        logger.debug("Сессия успешно закрыта с commit")
    except Exception as e:
        session.rollback()
        logger.error(f"Ошибка в сессии базы данных, выполнен rollback: {e}")
        logger.error(traceback.format_exc())
        raise
    finally:
        session.close()
        logger.debug("Сессия закрыта в блоке finally")
