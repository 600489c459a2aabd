"""
System checks for singular-system settings
"""

from django.core.checks import register, Error, Warning, Tags


@register(Tags.compatibility)
def check_singular_settings(app_configs, **kwargs):
    from core.utils import get_setting

    errors = []

    if get_setting('SINGULAR', 'g_tol') <= get_setting('SINGULAR', 'guard_tol'):
        errors.append(
            Error(
                'SINGULAR g_tol must exceed guard_tol',
                hint='G is extrapolated inside |zeta| <= g_tol, which has to contain the guard band',
                id='singular.E001',
            )
        )

    if get_setting('SINGULAR', 'angle_tol') >= 1.5707963267948966:
        errors.append(
            Error(
                'SINGULAR angle_tol must be below pi/2',
                hint='No curve of equilibria could be transversal to S',
                id='singular.E002',
            )
        )

    if get_setting('SINGULAR', 'chart_delta') > get_setting('SINGULAR', 'radius'):
        errors.append(
            Warning(
                'SINGULAR chart_delta is larger than the sample radius',
                hint='Chart points outside the hypothesis cloud are not covered by H5 and H6',
                id='singular.W001',
            )
        )

    if get_setting('SINGULAR', 'n_samples') < 20:
        errors.append(
            Warning(
                'SINGULAR n_samples below 20 makes the hypothesis report unreliable',
                hint='H1 uses 20 samples and H6 up to 40 starting points',
                id='singular.W002',
            )
        )

    return errors
