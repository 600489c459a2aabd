"""
Shared plumbing of the analysis commands: common flags, config merging,
validation through ProblemConfigForm, report writing and exit statuses.
"""

import logging
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from django.core.management.base import BaseCommand, CommandError
from django.utils.translation import gettext_lazy as _

from catalog.forms import ProblemConfigForm
from catalog.models import ProblemConfig, RunResult
from catalog.services import run
from catalog.systems import REGISTRY, system_names
from catalog.utils import EXIT_ERROR, EXIT_NEGATIVE, EXIT_USAGE, emit_report, load_config, merge_options, \
    parse_params
from core.exceptions import NEGATIVE_RESULTS, UsageError, ViscprofError

logger = logging.getLogger(__name__)

# options every Django command carries; never part of a problem
DJANGO_OPTIONS = (
    'verbosity', 'settings', 'pythonpath', 'traceback', 'no_color', 'force_color', 'skip_checks', 'stdout', 'stderr',
)

# system parameter flags and their help, defaults listed per system below
PARAM_FLAGS = {
    'a': 'wave speed of scalar-linear-bl',
    'gamma': 'adiabatic exponent of p-system and ns-polytropic',
    'kappa': 'pressure constant of p-system, coupling of toy-5d',
    'R': 'gas constant of ns-polytropic',
    'nu': 'viscosity of ns-polytropic',
    'k': 'heat conductivity of ns-polytropic',
    'rho0': 'base density of ns-polytropic',
    'theta0': 'base temperature of ns-polytropic',
}


def _defaults_epilog() -> str:
    lines = ['catalog defaults:']
    for name, entry in REGISTRY.items():
        if entry.defaults:
            values = ', '.join(f'{k}={v:g}' for k, v in entry.defaults.items())
            lines.append(f'  {name}: {values}')
    lines.append('  (gamma = 1.4 is the diatomic ideal gas value)')
    return '\n'.join(lines)


class AnalysisCommand(BaseCommand):
    """
    Base of every viscprof subcommand. Subclasses set ``command`` (the runner
    key), ``kinds`` (system kinds accepted, None when no system is used) and
    add their own flags in ``add_command_arguments``.
    """

    command: str = ''
    kinds: Optional[Tuple[str, ...]] = None
    requires_system = True
    # runs no Django system checks; the settings checks run in `check`
    requires_system_checks = []

    def create_parser(self, prog_name, subcommand, **kwargs):
        parser = super().create_parser(prog_name, subcommand, **kwargs)
        if self.requires_system:
            parser.epilog = _defaults_epilog()
        return parser

    def add_arguments(self, parser):
        if self.requires_system:
            parser.add_argument('--system', choices=system_names(), help=_('catalog system to analyse'))
        parser.add_argument('--config', help=_('JSON file of options; keys are the long flag names'))
        parser.add_argument('--out', help=_('directory for the JSON and CSV reports (default: current)'))
        parser.add_argument('--jobs', type=int, help=_('worker threads for independent queries (default 1)'))
        parser.add_argument('--seed', type=int, help=_('seed of the random sample clouds'))
        if self.requires_system:
            group = parser.add_argument_group(_('system parameters'))
            for name, help_text in PARAM_FLAGS.items():
                group.add_argument(f'--{name}', type=float, dest=f'param_{name}', help=help_text)
            group.add_argument('--param', action='append', metavar='NAME=VALUE',
                               help=_('any system parameter, repeatable'))
        self.add_command_arguments(parser)
        self.option_names = {action.dest for action in parser._actions} - {'help', 'config'}

    def add_command_arguments(self, parser):
        pass

    # ---------------- options ----------------

    def _split_params(self, options: Dict) -> Tuple[Dict, Dict[str, float]]:
        params = parse_params(options.pop('param', None))
        for name in PARAM_FLAGS:
            value = options.pop(f'param_{name}', None)
            if value is not None:
                params[name] = value
        return options, params

    def problem(self, options: Dict) -> ProblemConfig:
        flags = {k: v for k, v in options.items() if k not in DJANGO_OPTIONS}
        config = load_config(flags.pop('config', None))
        unknown = sorted(set(config) - self.option_names - set(PARAM_FLAGS) - {'params'})
        if unknown:
            raise UsageError(_('unknown option(s) in config file: {}').format(', '.join(unknown)))
        config_params = dict(config.pop('params', None) or {})
        config_params.update({name: config.pop(name) for name in PARAM_FLAGS if name in config})
        flags, params = self._split_params(flags)
        params = dict(config_params, **params)

        form = ProblemConfigForm(
            data=merge_options(flags, config),
            command=self.command,
            kinds=self.kinds if self.requires_system else None,
            params=params,
        )
        if not form.is_valid():
            messages = [str(m) for errors in form.errors.values() for m in errors]
            raise UsageError('; '.join(messages), {'errors': form.errors.get_json_data()})
        return form.to_config()

    # ---------------- reports ----------------

    def write(self, result: RunResult, out: Path) -> List[Path]:
        paths = [emit_report(result.payload, 'json', out / f'{result.name}.json')]
        for key, frame in result.frames.items():
            suffix = '' if len(result.frames) == 1 else f'_{key}'
            paths.append(emit_report(frame, 'csv', out / f'{result.name}{suffix}.csv'))
        return paths

    def handle(self, *args, **options):
        out = Path(options.get('out') or '.')
        try:
            problem = self.problem(dict(options))
            out = problem.out
            result = run(problem)
        except UsageError as e:
            raise CommandError(e.message, returncode=EXIT_USAGE)
        except NEGATIVE_RESULTS as e:
            path = emit_report(e.as_dict(), 'json', out / f'{self.command}.json')
            self.stdout.write(str(path))
            logger.warning(f"{self.command}: {e.code}: {e.message}")
            raise CommandError(e.message, returncode=EXIT_NEGATIVE)
        except (ViscprofError, OSError) as e:
            raise CommandError(str(e), returncode=EXIT_ERROR)

        try:
            paths = self.write(result, out)
        except OSError as e:
            raise CommandError(str(e), returncode=EXIT_ERROR)
        for path in paths:
            self.stdout.write(str(path))
        if result.message:
            self.stderr.write(result.message)
        if result.negative:
            raise CommandError(result.message, returncode=EXIT_NEGATIVE)
