"""WSGI entry point, used by `manage.py runserver` to serve the results admin."""

import os

from django.core.wsgi import get_wsgi_application

os.environ.setdefault("DJANGO_SETTINGS_MODULE", "hopsim.settings")

application = get_wsgi_application()
