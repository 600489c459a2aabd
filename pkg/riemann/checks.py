"""
System checks for wave-fan settings
"""

from django.core.checks import register, Error, Warning, Tags


@register(Tags.compatibility)
def check_riemann_settings(app_configs, **kwargs):
    from core.utils import get_setting

    errors = []

    threshold = get_setting('RIEMANN', 'relax_threshold')
    if not 0 < threshold < 1:
        errors.append(
            Error(
                f'RIEMANN relax_threshold must lie in (0, 1), got {threshold}',
                hint='Relaxation starts once successive changes shrink by less than this factor',
                id='riemann.E001',
            )
        )

    if get_setting('RIEMANN', 'grid_n') < 64:
        errors.append(
            Warning(
                'RIEMANN grid_n below 64 resolves jump end points poorly',
                hint='The envelope is computed on this many tau samples',
                id='riemann.W001',
            )
        )

    if get_setting('RIEMANN', 'rh_tol_scalar') > get_setting('RIEMANN', 'rh_tol_system'):
        errors.append(
            Warning(
                'RIEMANN rh_tol_scalar is looser than rh_tol_system',
                hint='Scalar quadrature is exact enough for the tighter tolerance',
                id='riemann.W002',
            )
        )

    return errors
