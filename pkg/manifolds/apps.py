from django.apps import AppConfig
from django.utils.translation import gettext_lazy as _


class ManifoldsConfig(AppConfig):
    name = 'manifolds'
    verbose_name = _('Invariant-manifold charts')

    def ready(self):
        import manifolds.checks
