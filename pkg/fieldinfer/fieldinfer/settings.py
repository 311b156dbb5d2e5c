"""
Django settings for the fieldinfer project.

Every tunable is read from the environment (or a .env file) through
python-decouple; see env.example at the repository root.
"""
from pathlib import Path

import dj_database_url
from decouple import config

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

SECRET_KEY = config('SECRET_KEY', default='fieldinfer-local-only-key')
DEBUG = config('DEBUG', default=False, cast=bool)
ALLOWED_HOSTS = []

# Application definition
INSTALLED_APPS = [
    'django.contrib.contenttypes',

    # Third-party apps
    'rest_framework',
    'django_celery_results',

    # Local apps
    'apps.grid',
    'apps.kernels',
    'apps.toeplitz',
    'apps.smoother',
    'apps.hac',
    'apps.bootstrap',
    'apps.bandwidth',
    'apps.simulate',
    'apps.cli',
]

# Database
# Holds run manifests and celery task results.
DATABASES = {
    'default': dj_database_url.config(
        default=config('DATABASE_URL', default=f'sqlite:///{BASE_DIR / "db.sqlite3"}'),
        conn_max_age=600,
    )
}

LANGUAGE_CODE = 'en-us'
TIME_ZONE = 'UTC'
USE_I18N = False
USE_TZ = True

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'

# Django REST Framework Settings
# Serializers and the JSON renderer define the result file formats.
REST_FRAMEWORK = {
    'DEFAULT_RENDERER_CLASSES': [
        'rest_framework.renderers.JSONRenderer',
    ],
    'UNICODE_JSON': True,
    'STRICT_JSON': True,
}

# Numerical settings
FIELDINFER_THREADS = config('FIELDINFER_THREADS', default=1, cast=int)
FIELDINFER_DENSE_SIZE_CAP = config('FIELDINFER_DENSE_SIZE_CAP', default=2048, cast=int)
FIELDINFER_DENSE_DEFAULT_MAX = config('FIELDINFER_DENSE_DEFAULT_MAX', default=256, cast=int)
FIELDINFER_PANEL_CACHE_ENTRIES = config('FIELDINFER_PANEL_CACHE_ENTRIES', default=10_000_000, cast=int)
FIELDINFER_AR_BURN_IN = config('FIELDINFER_AR_BURN_IN', default=200, cast=int)
FIELDINFER_RECORD_RUNS = config('FIELDINFER_RECORD_RUNS', default=True, cast=bool)

# Celery Configuration
# Study simulations are celery tasks; eager mode runs them in-process.
CELERY_BROKER_URL = config('CELERY_BROKER_URL', default='redis://localhost:6379/0')
CELERY_RESULT_BACKEND = config('CELERY_RESULT_BACKEND', default='django-db')
CELERY_ACCEPT_CONTENT = ['json']
CELERY_TASK_SERIALIZER = 'json'
CELERY_RESULT_SERIALIZER = 'json'
CELERY_TIMEZONE = TIME_ZONE
CELERY_TASK_ALWAYS_EAGER = config('CELERY_TASK_ALWAYS_EAGER', default=True, cast=bool)
CELERY_TASK_EAGER_PROPAGATES = True

# Logging Configuration
# Console output goes to stderr so commands can print JSON on stdout.
FIELDINFER_LOG_LEVEL = config('FIELDINFER_LOG_LEVEL', default='INFO')
FIELDINFER_LOG_FILE = config('FIELDINFER_LOG_FILE', default='')

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{levelname} {asctime} {module} {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'verbose',
        },
    },
    'root': {
        'handlers': ['console'],
        'level': 'WARNING',
    },
    'loggers': {
        'django': {
            'handlers': ['console'],
            'level': config('DJANGO_LOG_LEVEL', default='WARNING'),
            'propagate': False,
        },
        'apps': {
            'handlers': ['console'],
            'level': FIELDINFER_LOG_LEVEL,
            'propagate': False,
        },
    },
}

if FIELDINFER_LOG_FILE:
    LOGGING['handlers']['file'] = {
        'class': 'logging.FileHandler',
        'filename': FIELDINFER_LOG_FILE,
        'formatter': 'verbose',
    }
    LOGGING['loggers']['apps']['handlers'].append('file')
