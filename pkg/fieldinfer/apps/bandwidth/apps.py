from django.apps import AppConfig


class BandwidthAppConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'apps.bandwidth'
    verbose_name = 'Bandwidth Selection'
