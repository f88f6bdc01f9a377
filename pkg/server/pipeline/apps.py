from django.apps import AppConfig


class PipelineAppConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'pipeline'
    verbose_name = "End-to-end pipeline runs"
