from django.apps import AppConfig
from django.utils.translation import gettext_lazy as _


class ProfilesConfig(AppConfig):
    name = 'profiles'
    verbose_name = _('Traveling waves and boundary layers')

    def ready(self):
        import profiles.checks
