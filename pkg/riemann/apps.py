from django.apps import AppConfig
from django.utils.translation import gettext_lazy as _


class RiemannConfig(AppConfig):
    name = 'riemann'
    verbose_name = _('Wave-fan curves')

    def ready(self):
        import riemann.checks
