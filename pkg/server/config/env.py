import os
from pathlib import Path
from dotenv import load_dotenv

# Загрузка переменных из файла .env
BASE_DIR = Path(__file__).resolve().parent.parent.parent
env_path = os.path.join(BASE_DIR, '.env')
load_dotenv(env_path)

# Получение переменных окружения
SECRET_KEY = os.getenv('SECRET_KEY', 'eeg-policy-local-only')

DEBUG = os.getenv('DEBUG', 'False').lower() in ('1', 'true', 'yes')
LOG_LEVEL = os.getenv('LOG_LEVEL', 'INFO').upper()

# Настройки конвейера
PIPELINE_SEED = int(os.getenv('PIPELINE_SEED', '20230101'))
PIPELINE_THREADS = int(os.getenv('PIPELINE_THREADS', '1'))
PIPELINE_OUTPUT_DIR = os.getenv('PIPELINE_OUTPUT_DIR', os.path.join(BASE_DIR, 'runs'))

# Монтаж электродов: имя встроенного монтажа MNE или путь к файлу (по умолчанию standard_1005)
EEG_MONTAGE_FILE = os.getenv('EEG_MONTAGE_FILE')
