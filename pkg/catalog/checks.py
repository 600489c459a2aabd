"""
System checks for the command-line settings
"""

from pathlib import Path

from django.core.checks import register, Error, Warning, Tags


@register(Tags.compatibility)
def check_cli_settings(app_configs, **kwargs):
    from core.utils import get_setting

    errors = []

    digits = get_setting('CLI', 'float_digits')
    if not isinstance(digits, int) or digits < 1:
        errors.append(
            Error(
                'CLI float_digits must be a positive integer',
                hint=f'Got {digits!r}',
                id='catalog.E001',
            )
        )
    elif digits < 17:
        errors.append(
            Warning(
                f'CLI float_digits = {digits} does not round-trip doubles',
                hint='Use 17 significant digits so CSV files read back to the same floats',
                id='catalog.W001',
            )
        )

    out_dir = Path(get_setting('CLI', 'out_dir'))
    if out_dir.exists() and not out_dir.is_dir():
        errors.append(
            Error(
                f'CLI out_dir {out_dir} is not a directory',
                hint='Point VISCPROF["CLI"]["out_dir"] at a directory',
                id='catalog.E002',
            )
        )

    return errors
