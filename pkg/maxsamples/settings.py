"""
Default Django settings for the ``maxsamples`` command-line tool.

Projects embedding the app point ``DJANGO_SETTINGS_MODULE`` at their own
settings and add a ``MAXSAMPLES`` dict there instead.
"""
import os

SECRET_KEY = "maxsamples-cli-not-a-web-app"

DEBUG = False

INSTALLED_APPS = [
    "maxsamples",
]

# The tool never touches a database.
DATABASES = {}

USE_TZ = True

MAXSAMPLES = {
    "HYPERPARAMS": {},
    "KNAPSACK_EXACT_LIMIT": 40,
    "PROBABILITY_FLOOR": 1e-12,
    "UNLIMITED_BUDGET": 1e9,
    "TRACE_LOG": os.environ.get("MAXSAMPLES_TRACE_LOG", "") == "1",
    "OUTPUT_DIR": "runs",
    "VERIFY_ON_WRITE": True,
}

LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "handlers": {
        "console": {
            "class": "logging.StreamHandler",
        },
    },
    "loggers": {
        "maxsamples": {
            "handlers": ["console"],
            "level": os.environ.get("MAXSAMPLES_LOG_LEVEL", "WARNING"),
        },
    },
}
