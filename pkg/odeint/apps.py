from django.apps import AppConfig
from django.utils.translation import gettext_lazy as _


class OdeintConfig(AppConfig):
    name = 'odeint'
    verbose_name = _('Adaptive integration')
