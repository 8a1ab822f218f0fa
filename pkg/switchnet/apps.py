from django.apps import AppConfig


class SwitchnetConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "switchnet"
