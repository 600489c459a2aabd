from django.apps import AppConfig
from django.utils.translation import gettext_lazy as _


class SpectralConfig(AppConfig):
    name = 'spectral'
    verbose_name = _('Spectral splitting')

    def ready(self):
        import spectral.checks
