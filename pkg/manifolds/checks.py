"""
System checks for chart construction settings
"""

from django.core.checks import register, Info, Warning, Tags


@register(Tags.compatibility)
def check_manifold_settings(app_configs, **kwargs):
    from core.utils import get_setting

    errors = []

    grid_n = get_setting('MANIFOLDS', 'grid_n')
    if grid_n % 2 == 0:
        errors.append(
            Info(
                f'MANIFOLDS grid_n={grid_n} is even',
                hint='Center charts need t = 0 on the grid; grid_n + 1 points will be used',
                id='manifolds.I001',
            )
        )

    base_n = get_setting('MANIFOLDS', 'base_n')
    if base_n ** 3 > 20000:
        errors.append(
            Warning(
                f'MANIFOLDS base_n={base_n} gives more than 20000 fixed points on a 3-d base',
                hint='Lower base_n or evaluate charts lazily with base_n = 0',
                id='manifolds.W001',
            )
        )

    return errors
