"""
Django settings for the codemix project.

Experiment defaults live in the ``CODEMIX`` dict at the bottom; secrets come
from the environment (``.env`` is loaded first).
"""

import os
from pathlib import Path
from dotenv import load_dotenv
from decouple import config

load_dotenv()

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

# SECURITY WARNING: keep the secret key used in production secret!
SECRET_KEY = config('DJANGO_SECRET_KEY', default='django-insecure-codemix-local-experiments-only')

DEBUG = config('DJANGO_DEBUG', default=True, cast=bool)

ALLOWED_HOSTS = []

# Application definition

INSTALLED_APPS = [
    'django.contrib.admin',
    'django.contrib.auth',
    'django.contrib.contenttypes',
    'django.contrib.sessions',
    'django.contrib.messages',
    'django.contrib.staticfiles',
    'corpus',
    'stats',
    'baselines',
    'encoder',
    'mtl',
    'trainer',
    'evaluation',
    'prompting',
    'experiments',
]

MIDDLEWARE = [
    'django.middleware.security.SecurityMiddleware',
    'django.contrib.sessions.middleware.SessionMiddleware',
    'django.middleware.common.CommonMiddleware',
    'django.middleware.csrf.CsrfViewMiddleware',
    'django.contrib.auth.middleware.AuthenticationMiddleware',
    'django.contrib.messages.middleware.MessageMiddleware',
    'django.middleware.clickjacking.XFrameOptionsMiddleware',
]

ROOT_URLCONF = 'codemix.urls'

TEMPLATES = [
    {
        'BACKEND': 'django.template.backends.django.DjangoTemplates',
        'DIRS': [os.path.join(BASE_DIR, 'templates')],
        # prompt templates are found under <app>/templates/ as well
        'APP_DIRS': True,
        'OPTIONS': {
            'context_processors': [
                'django.template.context_processors.debug',
                'django.template.context_processors.request',
                'django.contrib.auth.context_processors.auth',
                'django.contrib.messages.context_processors.messages',
            ],
        },
    },
]

# Database
# https://docs.djangoproject.com/en/4.1/ref/settings/#databases

DATABASES = {
    'default': {
        'ENGINE': 'django.db.backends.sqlite3',
        'NAME': BASE_DIR / 'db.sqlite3',
    }
}

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = True

USE_TZ = True

STATIC_URL = 'static/'

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'

# Logging

LOG_LEVEL = config('CODEMIX_LOG_LEVEL', default='INFO')

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'kv': {
            'format': 'ts=%(asctime)s level=%(levelname)s logger=%(name)s msg="%(message)s"',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'kv',
            'stream': 'ext://sys.stderr',
        },
    },
    'loggers': {
        app: {'handlers': ['console'], 'level': LOG_LEVEL, 'propagate': False}
        for app in ('corpus', 'stats', 'baselines', 'encoder', 'mtl',
                    'trainer', 'evaluation', 'prompting', 'experiments')
    },
}

# OpenAI Configuration
OPENAI_API_KEY = os.getenv('OPENAI_API_KEY')

# Gemini Configuration
GEMINI_API_KEY = os.getenv('GEMINI_API_KEY')

# Experiment defaults (training grid follows the reference configuration table)
CODEMIX = {
    'SEED': config('CODEMIX_SEED', default=13, cast=int),
    'OUTPUT_DIR': config('CODEMIX_OUTPUT_DIR', default=str(BASE_DIR / 'runs')),
    'SLOW_TESTS': config('CODEMIX_SLOW_TESTS', default=False, cast=bool),
    'GRID': {
        'LEARNING_RATES': [2e-6, 2e-5, 2e-4, 3e-3, 9e-3, 1e-2],
        'OPTIMIZERS': ['sgd', 'adamw'],
        'SCHEDULER_GAMMAS': [0.9, 0.8],
        'BATCH_SIZES': [16, 32, 64],
        'SEQUENCE_LENGTHS': [64, 128, 248],
        'PATIENCE': 4,
        'LAMBDAS': [0.0, 5e-1, 5e-2, 5e-3, 5e-4],
        'SHOT_COUNTS': [0, 2, 4, 8, 12],
    },
    'DEFAULT_SEEDS': [13, 42, 2025],
    'COMPLETION': {
        'CLIENT': config('CODEMIX_COMPLETION_CLIENT', default='mock'),
        'OPENAI_MODEL': config('CODEMIX_OPENAI_MODEL', default='gpt-4o-mini'),
        'GEMINI_MODEL': config('CODEMIX_GEMINI_MODEL', default='gemini-2.5-flash'),
        'TIMEOUT': config('CODEMIX_CLIENT_TIMEOUT', default=60.0, cast=float),
        'TEMPERATURE': 0.95,
        'TOP_P': 0.7,
        'MAX_NEW_TOKENS': 1024,
    },
}
