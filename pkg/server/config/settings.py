import os
from pathlib import Path
from .env import (
    SECRET_KEY, DEBUG, LOG_LEVEL, PIPELINE_SEED, PIPELINE_THREADS,
    PIPELINE_OUTPUT_DIR, EEG_MONTAGE_FILE
)

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent


# The project is a batch toolkit driven through manage.py; nothing is served.
SECRET_KEY = SECRET_KEY

DEBUG = DEBUG

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    'django.contrib.contenttypes',
    'django.contrib.auth',
    "rest_framework",
    "eeg",
    "causal",
    "sim",
    "pipeline",
]

# No database: every artifact lives on the filesystem next to its manifest.
DATABASES = {}


# Internationalization

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = False

USE_TZ = True


DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'


LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "plain": {
            "format": "%(asctime)s %(levelname)s %(name)s: %(message)s",
        },
    },
    "handlers": {
        "console": {
            "class": "logging.StreamHandler",
            "formatter": "plain",
        },
    },
    "root": {
        "handlers": ["console"],
        "level": LOG_LEVEL,
    },
}


# Runtime
PIPELINE_SEED = PIPELINE_SEED
PIPELINE_THREADS = PIPELINE_THREADS
PIPELINE_OUTPUT_DIR = PIPELINE_OUTPUT_DIR


# EEG ingestion
EEG_IO = {
    # встроенный монтаж MNE или путь к своему файлу монтажа
    "MONTAGE": EEG_MONTAGE_FILE or "standard_1005",
    "COMMON_CHANNELS_FILE": os.path.join(BASE_DIR, "eeg", "montage", "common_channels.json"),
    "SCHEMA_SUFFIX": ".schema.json",
    "DROP_INCOMPLETE_ROWS": True,
}

# Preprocessing steps 1-4 and 6-9, overridable per site with --site-config
EEG_PREPROCESS = {
    "TARGET_RATE_HZ": 250.0,
    "NOTCH_HZ": 60.0,
    "NOTCH_WIDTH_HZ": 2.0,
    "HIGH_PASS_HZ": 1.0,
    "LOW_PASS_HZ": 50.0,
    "TRANSITION_HZ": 1.0,
    "DEVIATION_Z": 5.0,
    "MIN_CORRELATION": 0.4,
    "PREDICTABILITY_CORRELATION": 0.75,
    "NOISINESS_Z": 5.0,
    "CORRELATION_WINDOW_S": 1.0,
    "NOISE_SPLIT_HZ": 40.0,
    "RANSAC_TRIALS": 50,
    "RANSAC_FRACTION": 0.25,
    "EPOCH_LENGTH_S": 2.0,
    "REJECTION_FOLDS": 5,
    "REJECTION_GRID_UV": [20.0, 40.0, 60.0, 80.0, 100.0, 125.0, 150.0, 200.0, 250.0, 300.0, 400.0, 500.0],
    "REJECTION_CHANNEL_FRACTION": 0.1,
}

# Multitaper band power
EEG_SPECTRAL = {
    "TIME_BANDWIDTH": 4.0,
    "N_TAPERS": 7,
    "BANDS": {"theta": [4.0, 7.0], "alpha": [8.0, 12.0]},
    "TOTAL_BAND": [1.0, 50.0],
    "AVERAGE": "psd",
    "OPEN_BLOCKS": [1, 4],
    "CLOSED_BLOCKS": [2, 3],
}

# Honest causal forest and nuisance forests
CAUSAL_FOREST = {
    "NUM_TREES": 2000,
    "NUISANCE_TREES": 500,
    "SUBSAMPLE_RATIO": 0.5,
    "HONESTY_RATIO": 0.5,
    "MIN_NODE_SIZE": 5,
    "MTRY": None,
    "MAX_DEPTH": None,
    "CROSS_FIT_FOLDS": 10,
    "PROPENSITY_CLIP": 0.05,
    "IMPORTANCE_MAX_DEPTH": 4,
    "TUNE_GRID": {
        "mtry": [None],
        "min_node_size": [5, 10, 20],
        "subsample_ratio": [0.5],
    },
}

# Policy learners
POLICY = {
    "DEPTH": 2,
    "SPLIT_STEP": 1,
    "Q_FOLDS": 10,
    "Q_N_LAMBDAS": 50,
    "Q_LAMBDA_RATIO": 1e-4,
    "Q_ONE_SE_RULE": False,
    "O_RESIDUALIZER": "linear",
    "O_RIDGE_PER_SUBJECT": 1e-4,
    "CV_FOLDS": 3,
}

# Synthetic benchmark. Desk-scale defaults; FULL_SCALE mirrors the published study size.
SIMULATION = {
    "TRAIN_SIZES": [200, 500],
    "N_TEST": 10000,
    "REPLICATES": 20,
    "EFFECT": "strong",
    "METHODS": ["policy_tree", "q_learning", "o_learning"],
    "FOREST": {
        "NUM_TREES": 300,
        "NUISANCE_TREES": 100,
        "CROSS_FIT_FOLDS": 5,
        "MIN_NODE_SIZE": 5,
    },
    "POLICY_SPLIT_STEP": 10,
    "FULL_SCALE": {"N_TEST": 50000, "REPLICATES": 100},
}

# End-to-end run
PIPELINE = {
    "TRAIN_FRACTION": 0.7,
    "UPSAMPLE_MINORITY": True,
    "STAGES": ["preprocess", "features", "fit_forest", "scores", "predict", "policy"],
    "MANIFEST_NAME": "manifest.json",
}
