"""
Custom system checks for viscprof numeric settings
"""

from django.core.checks import register, Error, Tags


@register(Tags.compatibility)
def check_numeric_settings(app_configs, **kwargs):
    """
    Every configured tolerance and count must be positive
    """
    from django.conf import settings
    from .utils import declared_settings

    errors = []

    if not hasattr(settings, 'VISCPROF'):
        errors.append(
            Error(
                'VISCPROF is not set',
                hint='Every app reads its tolerances from VISCPROF; see config/settings.py',
                id='core.E003',
            )
        )
        return errors

    known = declared_settings() or settings.VISCPROF
    for section, values in settings.VISCPROF.items():
        if section not in known:
            errors.append(
                Error(
                    f'Unknown VISCPROF section {section!r}',
                    hint=f'Known sections: {", ".join(sorted(known))}',
                    id='core.E001',
                )
            )
            continue
        for key, value in values.items():
            if isinstance(value, str) or key in ('seed', 'base_n', 'horizon_doublings'):
                continue
            if value is None or value <= 0:
                errors.append(
                    Error(
                        f'VISCPROF[{section!r}][{key!r}] must be positive, got {value!r}',
                        hint='Tolerances, grid sizes and iteration caps are strictly positive',
                        id='core.E002',
                    )
                )

    return errors
