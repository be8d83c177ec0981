"""
Django settings for the LBSN feature-model project.

Generated by 'django-admin startproject' using Django 5.2.6 and trimmed to what
a batch pipeline needs: the ORM, REST framework serializers and django-filter.

For more information on this file, see
https://docs.djangoproject.com/en/5.2/topics/settings/

For the full list of settings and their values, see
https://docs.djangoproject.com/en/5.2/ref/settings/
"""

import os
from pathlib import Path

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent


# SECURITY WARNING: keep the secret key used in production secret!
SECRET_KEY = os.environ.get('LBSN_SECRET_KEY', 'django-insecure-lbsn-pipeline-local-only')

DEBUG = False

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    'django.contrib.auth',
    'django.contrib.contenttypes',
    'rest_framework',
    'django_filters',
    'checkins',
]


# Database
# https://docs.djangoproject.com/en/5.2/ref/settings/#databases

DATABASES = {
    'default': {
        'ENGINE': 'django.db.backends.sqlite3',
        'NAME': os.environ.get('LBSN_DATABASE', BASE_DIR / 'db.sqlite3'),
    }
}


# Internationalization
# https://docs.djangoproject.com/en/5.2/topics/i18n/

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = False

# check-in clock times are stored exactly as recorded, no timezone conversion
USE_TZ = False


# Default primary key field type
# https://docs.djangoproject.com/en/5.2/ref/settings/#default-auto-field

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'


# Django REST Framework configuration (serializers and renderers only)
REST_FRAMEWORK = {
    'DEFAULT_RENDERER_CLASSES': [
        'rest_framework.renderers.JSONRenderer',
    ],
    'COERCE_DECIMAL_TO_STRING': False,
}


# Logging
LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'pipeline': {
            'format': '{levelname} {name}: {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'pipeline',
        },
    },
    'loggers': {
        'checkins': {
            'handlers': ['console'],
            'level': os.environ.get('LBSN_LOG_LEVEL', 'INFO'),
            'propagate': False,
        },
    },
}


# Pipeline defaults; a --config file and command-line flags override these keys
LBSN_PIPELINE = {
    'dataset': '',
    'categories': '',
    'category_labels': '',
    'dataset_name': '',
    'out_dir': 'runs/default',
    'seed': 7,
    'delta': 0.1,
    'enforce_selection': False,
    'normalize_monthly': False,
    'time_unit': 'month',
    'split': '0.8,0.1,0.1',
    'target_view': 'root',
    'k': '1,5,10',
    'rq1_grid': 'decile',
    'applicability_mode': 'indicator',
    'context_readout': False,
    'conv_filters': 8,
    'hidden_width': 128,
    'learning_rate': 0.01,
    'batch_size': 32,
    'epochs': 4,
    'since': None,
    'until': None,
    'users': '',
    'report_format': 'csv',
    'canonical_hierarchy': True,
}
