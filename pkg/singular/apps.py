from django.apps import AppConfig
from django.utils.translation import gettext_lazy as _


class SingularConfig(AppConfig):
    name = 'singular'
    verbose_name = _('Singular systems')

    def ready(self):
        import singular.checks
