from django.apps import AppConfig


class SmootherAppConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'apps.smoother'
    verbose_name = 'Smoother'
