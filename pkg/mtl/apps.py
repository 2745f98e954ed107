from django.apps import AppConfig


class MtlConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'mtl'
