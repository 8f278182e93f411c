from celery import Celery

from brpo_lab import settings

app = Celery('brpo_lab')

# Read every CELERY_* value from the settings module.
app.config_from_object(settings, namespace='CELERY')

# Load task modules from the experiment harness.
app.autodiscover_tasks(['harness'])
