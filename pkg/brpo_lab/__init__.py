# This will make sure the app is always imported so that
# shared_task in harness.tasks will use this app.
from .celery import app as celery_app

__all__ = ('celery_app',)
