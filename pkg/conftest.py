"""Configure Django for pytest the same way detect.py does."""
import os

import django

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'obstacle_fusion.settings')
django.setup()
