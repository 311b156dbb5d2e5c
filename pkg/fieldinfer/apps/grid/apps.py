from django.apps import AppConfig


class GridAppConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'apps.grid'
    verbose_name = 'Grid'
