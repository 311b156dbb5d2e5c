from django.apps import AppConfig


class BootstrapAppConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'apps.bootstrap'
    verbose_name = 'Multiplier Bootstrap'
