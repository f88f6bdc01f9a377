from django.apps import AppConfig


class CausalConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'causal'
    verbose_name = "Causal forests, treatment effects and policies"
