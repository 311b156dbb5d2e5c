from django.apps import AppConfig


class HacAppConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'apps.hac'
    verbose_name = 'HAC Covariance'
