"""
Django settings for the hslag project.

The project has no web surface: Django provides configuration, logging,
the ``hslag`` management command and the test runner.

For the full list of settings and their values, see
https://docs.djangoproject.com/en/5.2/ref/settings/
"""

import os
from dotenv import load_dotenv
from pathlib import Path

load_dotenv()

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent
PROJECT_ROOT = BASE_DIR.parent  # one level above backend

# SECURITY WARNING: keep the secret key used in production secret!
SECRET_KEY = os.getenv('DJANGO_SECRET_KEY', 'django-insecure-hslag-local-only')

DEBUG = os.getenv('DJANGO_DEBUG', 'False') == 'True'
ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    'lagrangian.apps.LagrangianConfig',
]

# no database: artifacts are plain text files written by the hslag command
DATABASES = {}


# Internationalization
# https://docs.djangoproject.com/en/5.2/topics/i18n/

LANGUAGE_CODE = "en-us"

TIME_ZONE = 'UTC'

USE_I18N = False

USE_TZ = True


# Numerical defaults for the hslag command.
# Library functions never read these; they are injected at the CLI layer.

HSLAG = {
    'LAMBDA_SAMPLES': int(os.getenv('HSLAG_LAMBDA_SAMPLES', 64)),
    'FOURIER_CAP': int(os.getenv('HSLAG_FOURIER_CAP', 15)),
    'GRID_NX': int(os.getenv('HSLAG_GRID_NX', 64)),
    'GRID_NY': int(os.getenv('HSLAG_GRID_NY', 64)),
    'TOL_TWIST': float(os.getenv('HSLAG_TOL_TWIST', 1e-10)),
    'TOL_UNITARY': float(os.getenv('HSLAG_TOL_UNITARY', 1e-8)),
    'TOL_FLAT': float(os.getenv('HSLAG_TOL_FLAT', 1e-6)),
    'BIG_CELL_CONDITION': float(os.getenv('HSLAG_BIG_CELL_CONDITION', 1e12)),
    'POLY_DEGREE': int(os.getenv('HSLAG_POLY_DEGREE', 6)),
    'OUTPUT_DIR': Path(os.getenv('HSLAG_OUTPUT_DIR', PROJECT_ROOT / 'output')),
}


# Logging
# https://docs.djangoproject.com/en/5.2/topics/logging/

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{levelname} {asctime} {name} {message}',
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
        'lagrangian': {
            'handlers': ['console'],
            'level': os.getenv('HSLAG_LOG_LEVEL', 'INFO'),
            'propagate': False,
        },
    },
}
