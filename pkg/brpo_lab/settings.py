"""
Settings for the brpo_lab project.

Values are read from the environment (or a local .env file) with
python-decouple; experiment-level parameters live in the JSON experiment
config handled by harness.models.
"""

import logging.config
from pathlib import Path

from decouple import config

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

# Experiment defaults (tabular analogues of the published hyperparameters)
DEFAULT_GAMMA = config('BRPO_DEFAULT_GAMMA', default=0.99, cast=float)
DEFAULT_SEEDS = config(
    'BRPO_DEFAULT_SEEDS',
    default='0,1,2,3,4',
    cast=lambda v: [int(s.strip()) for s in v.split(',') if s.strip()]
)
DEFAULT_EPSILONS = config(
    'BRPO_DEFAULT_EPSILONS',
    default='1.0,0.5,0.25,0.15,0.05',
    cast=lambda v: [float(s.strip()) for s in v.split(',') if s.strip()]
)
DEFAULT_BATCH_SIZE = config('BRPO_DEFAULT_BATCH_SIZE', default=100000, cast=int)
EVAL_EPISODES = config('BRPO_EVAL_EPISODES', default=40, cast=int)
EVAL_INTERVAL = config('BRPO_EVAL_INTERVAL', default=1000, cast=int)
EVAL_WINDOW = config('BRPO_EVAL_WINDOW', default=10, cast=int)
EPISODE_CAP = config('BRPO_EPISODE_CAP', default=200, cast=int)

# Numerical tolerances shared by validators
CONSTRAINT_TOL = config('BRPO_CONSTRAINT_TOL', default=1e-9, cast=float)
PROBABILITY_TOL = config('BRPO_PROBABILITY_TOL', default=1e-12, cast=float)

# Celery configuration
CELERY_BROKER_URL = config('REDIS_URL', default='redis://localhost:6379/0')
CELERY_RESULT_BACKEND = config('REDIS_URL', default='redis://localhost:6379/0')
CELERY_ACCEPT_CONTENT = ['json']
CELERY_TASK_SERIALIZER = 'json'
CELERY_RESULT_SERIALIZER = 'json'
CELERY_TASK_ALWAYS_EAGER = config('CELERY_TASK_ALWAYS_EAGER', default=True, cast=bool)
CELERY_TASK_EAGER_PROPAGATES = True

# Logging configuration
LOG_LEVEL = config('BRPO_LOG_LEVEL', default='INFO')
LOG_FILE = config('BRPO_LOG_FILE', default='brpo_lab.log')

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{levelname} {asctime} {module} {process:d} {thread:d} {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'level': LOG_LEVEL,
            'class': 'logging.StreamHandler',
            'formatter': 'verbose',
        },
    },
    'root': {
        'handlers': ['console'],
        'level': LOG_LEVEL,
    },
}

if LOG_FILE:
    LOGGING['handlers']['file'] = {
        'level': LOG_LEVEL,
        'class': 'logging.FileHandler',
        'filename': LOG_FILE,
        'formatter': 'verbose',
    }
    LOGGING['root']['handlers'].append('file')


def configure_logging():
    """Install the LOGGING configuration."""
    logging.config.dictConfig(LOGGING)
