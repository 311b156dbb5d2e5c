from django.apps import AppConfig


class ToeplitzAppConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'apps.toeplitz'
    verbose_name = 'Toeplitz Square Roots'
