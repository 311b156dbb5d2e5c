from django.apps import AppConfig


class SimulateAppConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'apps.simulate'
    verbose_name = 'Simulation Studies'
