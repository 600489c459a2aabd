"""
Django settings for config project.

viscprof runs as a Django project without a database: apps provide the
numerical services, management commands provide the CLI surface.

For more information on this file, see
https://docs.djangoproject.com/en/6.0/topics/settings/
"""

from pathlib import Path
import os
# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent


# SECURITY WARNING: no request handling happens here, the key only satisfies Django
SECRET_KEY = os.environ.get('VISCPROF_SECRET_KEY', 'viscprof-local-not-secret')

DEBUG = os.environ.get('VISCPROF_DEBUG', '0') == '1'

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    # Local apps
    'core.apps.CoreConfig',
    'odeint.apps.OdeintConfig',
    'spectral.apps.SpectralConfig',
    'manifolds.apps.ManifoldsConfig',
    'profiles.apps.ProfilesConfig',
    'riemann.apps.RiemannConfig',
    'singular.apps.SingularConfig',
    'catalog.apps.CatalogConfig',
]

# No models are persisted
DATABASES = {}


# Internationalization
# https://docs.djangoproject.com/en/6.0/topics/i18n/

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = True

USE_TZ = True


# Numerical defaults, read through core.utils.get_setting
VISCPROF = {
    'ODEINT': {
        'rtol': 1e-8,
        'atol': 1e-10,
        'min_step': 1e-14,
        'max_steps': 200000,
        'event_tol': 1e-12,
    },
    'SPECTRAL': {
        'tol_zero_rel': 1e-9,
        'rank_rel': 1e-10,
        'cluster_rel': 1e-7,
        'expm_guard': 700.0,
    },
    'MANIFOLDS': {
        'grid_n': 401,
        'base_n': 9,
        'fp_tol': 1e-10,
        'max_iter': 200,
        'jobs': int(os.environ.get('VISCPROF_JOBS', '1')),
    },
    'PROFILES': {
        'tol': 1e-8,
        'horizon': 40.0,
        'horizon_doublings': 3,
    },
    'RIEMANN': {
        'grid_n': 512,
        'fp_tol': 1e-12,
        'max_iter': 100,
        # largest center-chart radius a wave fan may use
        'chart_delta': 4.0,
        'relax_threshold': 0.9,
        'rh_tol_scalar': 1e-8,
        'rh_tol_system': 1e-6,
    },
    'SINGULAR': {
        'guard_tol': 1e-8,
        'bisect_tol': 1e-10,
        'g_tol': 1e-6,
        'hypothesis_tol': 1e-8,
        'n_samples': 200,
        'radius': 0.1,
        'seed': 0,
        'chart_delta': 0.02,
        'angle_tol': 1e-3,
        'step_tol': 1e-10,
    },
    'CLI': {
        'out_dir': '.',
        'float_digits': 17,
    },
}


# Logging
VISCPROF_LOG_LEVEL = os.environ.get('VISCPROF_LOG_LEVEL', 'WARNING')

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
    'root': {
        'handlers': ['console'],
        'level': 'WARNING',
    },
    'loggers': {
        app: {
            'handlers': ['console'],
            'level': VISCPROF_LOG_LEVEL,
            'propagate': False,
        }
        for app in ('core', 'odeint', 'spectral', 'manifolds', 'profiles', 'riemann', 'singular', 'catalog')
    },
}
