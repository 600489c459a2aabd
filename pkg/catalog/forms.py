from pathlib import Path

from django import forms
from django.core.exceptions import ValidationError
from django.utils.translation import gettext_lazy as _

from .models import ProblemConfig
from .systems import REGISTRY

# options that must be strictly positive whenever they are given
POSITIVE_OPTIONS = (
    'tol', 'rtol', 'atol', 'fp_tol', 'guard_tol', 'step_tol', 'bisect_tol', 'angle_tol', 'limit_tol',
    'delta', 'chart_delta', 'radius', 'horizon', 't_end', 't', 'grid_n', 'n_samples', 'max_iter',
    'base_n', 'n', 'tol_zero',
)


class ProblemConfigForm(forms.Form):
    """Options of one command, merged from flags and the config file"""

    system = forms.ChoiceField(
        choices=[(name, name) for name in REGISTRY],
        required=False,
        label=_('Catalog system'),
    )
    out = forms.CharField(required=False, label=_('Output directory'))
    jobs = forms.IntegerField(required=False, min_value=1, label=_('Worker threads'))
    seed = forms.IntegerField(required=False, min_value=0, label=_('Random seed'))

    def __init__(self, *args, **kwargs):
        self.command = kwargs.pop('command')
        self.kinds = kwargs.pop('kinds', None)
        self.params = kwargs.pop('params', {})
        super().__init__(*args, **kwargs)
        if self.kinds is not None:
            self.fields['system'].required = True

    def clean_system(self):
        """System must exist and suit the command"""
        name = self.cleaned_data.get('system')
        if name and self.kinds is not None and REGISTRY[name].kind not in self.kinds:
            raise ValidationError(
                _('{} is a {} system; {} needs one of: {}').format(
                    name, REGISTRY[name].kind, self.command, ', '.join(self.kinds)),
            )
        return name or None

    def clean(self):
        cleaned_data = super().clean()
        for key in POSITIVE_OPTIONS:
            value = self.data.get(key)
            if value is None:
                continue
            try:
                positive = float(value) > 0
            except (TypeError, ValueError):
                positive = False
            if not positive:
                self.add_error(None, ValidationError(
                    _('{} must be positive, got {!r}').format(key.replace('_', '-'), value)))
        system = cleaned_data.get('system')
        if system and self.params:
            unknown = sorted(set(self.params) - set(REGISTRY[system].defaults))
            if unknown:
                self.add_error(None, ValidationError(
                    _('{} takes no parameter(s) {}').format(system, ', '.join(unknown))))
        return cleaned_data

    def to_config(self) -> ProblemConfig:
        options = {k: v for k, v in self.data.items() if k not in ('system', 'out', 'params')}
        options['jobs'] = self.cleaned_data.get('jobs') or 1
        options['seed'] = self.cleaned_data.get('seed')
        return ProblemConfig(
            command=self.command,
            system=self.cleaned_data.get('system'),
            params=dict(self.params),
            options=options,
            out=Path(self.cleaned_data.get('out') or '.'),
        )
