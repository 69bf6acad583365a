"""
Django settings for obstacle_fusion project.

The project has no web surface: Django provides the settings layer, the
management-command CLI (``detect.py``), form-based config validation, signals
and the test runner.

For the full list of settings and their values, see
https://docs.djangoproject.com/en/5.2/ref/settings/
"""

from pathlib import Path
import os

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

# Only used by Django internals (signing); nothing here is served over HTTP.
SECRET_KEY = os.environ.get('OBSTACLES_SECRET_KEY', 'obstacle-fusion-offline-key')

DEBUG = os.environ.get('OBSTACLES_DEBUG', '0') == '1'

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    'obstacles.apps.ObstaclesConfig',
]

# No models: the dummy backend is enough and the test runner skips DB setup.
DATABASES = {}


# Internationalization

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = False

USE_TZ = True


# Logging

OBSTACLES_LOG_LEVEL = os.environ.get('OBSTACLES_LOG_LEVEL', 'INFO').upper()

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{asctime} {levelname} {name}: {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'verbose',
        },
    },
    'loggers': {
        'obstacles': {
            'handlers': ['console'],
            'level': OBSTACLES_LOG_LEVEL,
            'propagate': False,
        },
    },
}


# Detector

OBSTACLES_DEFAULT_SEED = int(os.environ.get('OBSTACLES_SEED', '0'))
OBSTACLES_DEFAULT_THREADS = 1

# Version tag written into every per-frame detection record.
OBSTACLES_RECORD_SCHEMA = 'obstacles.frame/1'

# Fusion distances in the config are expressed for a frame this wide.
OBSTACLES_FUSION_REFERENCE_WIDTH = 1280

OBSTACLES_DEFAULT_CONFIG = BASE_DIR / 'config' / 'default.json'

# Full 100-frame suite runs in the test-suite are opt-in.
OBSTACLES_ACCEPTANCE = os.environ.get('OBSTACLES_ACCEPTANCE', '0') == '1'
