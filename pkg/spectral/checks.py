"""
System checks for spectral settings
"""

from django.core.checks import register, Warning, Tags


@register(Tags.compatibility)
def check_spectral_settings(app_configs, **kwargs):
    from core.utils import get_setting

    errors = []

    if get_setting('SPECTRAL', 'rank_rel') >= get_setting('SPECTRAL', 'cluster_rel'):
        errors.append(
            Warning(
                'SPECTRAL rank_rel is not smaller than cluster_rel',
                hint='Kernel-chain rank decisions should be sharper than eigenvalue clustering',
                id='spectral.W001',
            )
        )

    if get_setting('SPECTRAL', 'expm_guard') > 709:
        errors.append(
            Warning(
                'SPECTRAL expm_guard allows ||At|| beyond the double overflow threshold',
                hint='Keep expm_guard at or below 709',
                id='spectral.W002',
            )
        )

    return errors
