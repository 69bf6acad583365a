from django.apps import AppConfig


class ObstaclesConfig(AppConfig):
    name = 'obstacles'
    verbose_name = 'Road obstacle detection'

    def ready(self):
        import obstacles.signals  # noqa: F401
