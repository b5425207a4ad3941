from django.apps import AppConfig


class StructsplatConfig(AppConfig):

    name = "structsplat"
    verbose_name = "Structure-aware densification"
