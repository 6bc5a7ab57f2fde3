import os
from dotenv import load_dotenv

# Загружаем переменные окружения из .env файла
load_dotenv()

# Версия пакета, пишется в JSON-сопровождение каждого результата
VERSION = '0.3.0'

# Уровень логирования для run.py
LOG_LEVEL = os.getenv('LOG_LEVEL', 'INFO').upper()

# Пути к файлам - используем os.path для корректной работы на всех платформах
DATA_DIR = os.getenv('DATA_DIR', 'data')
CONFIGS_DIR = os.path.join(DATA_DIR, 'configs')
OUTPUT_DIR = os.getenv('OUTPUT_DIR', os.path.join(DATA_DIR, 'output'))

# Кэш стационарных решений (SQLite по умолчанию)
db_path = os.path.join(DATA_DIR, 'results_cache.db')
DB_ENGINE = os.getenv('DB_ENGINE', f'sqlite:///{db_path}')
ENABLE_RESULTS_CACHE = os.getenv('ENABLE_RESULTS_CACHE', 'False').lower() == 'true'

# Параллельные прогоны сеток (1 = последовательно)
DEFAULT_WORKERS = int(os.getenv('DEFAULT_WORKERS', '1'))

# Параметры по умолчанию для точного решения и неоднородного ансамбля
DEFAULT_PHOTON_CUTOFF = int(os.getenv('DEFAULT_PHOTON_CUTOFF', '16'))
GAUSSIAN_CLUSTERS = int(os.getenv('GAUSSIAN_CLUSTERS', '51'))
GAUSSIAN_SPAN = float(os.getenv('GAUSSIAN_SPAN', '2.0'))
ORACLE_SEED = int(os.getenv('ORACLE_SEED', '20190101'))

# Убедимся, что все необходимые директории существуют
for directory in [DATA_DIR, CONFIGS_DIR]:
    os.makedirs(directory, exist_ok=True)
