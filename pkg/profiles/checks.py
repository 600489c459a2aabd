"""
System checks for profile settings
"""

from django.core.checks import register, Error, Warning, Tags


@register(Tags.compatibility)
def check_profile_settings(app_configs, **kwargs):
    from core.utils import get_setting
    from profiles.services import PROFILE_RTOL

    errors = []

    doublings = get_setting('PROFILES', 'horizon_doublings')
    if not isinstance(doublings, int) or doublings < 0:
        errors.append(
            Error(
                f'PROFILES horizon_doublings must be a non-negative integer, got {doublings!r}',
                hint='Use 0 to try the configured horizon only',
                id='profiles.E001',
            )
        )

    tol = get_setting('PROFILES', 'tol')
    if tol < 10 * PROFILE_RTOL:
        errors.append(
            Warning(
                f'PROFILES tol={tol} is below the shooting accuracy',
                hint=f'Endpoint detection cannot resolve distances under {10 * PROFILE_RTOL}',
                id='profiles.W001',
            )
        )

    return errors
