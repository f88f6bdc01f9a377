import os

import django

# Same settings module manage.py uses, so pytest can run the Django test suite.
os.environ.setdefault("DJANGO_SETTINGS_MODULE", "config.settings")
django.setup()
