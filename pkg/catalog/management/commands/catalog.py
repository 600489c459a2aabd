from django.core.management.base import CommandError

from catalog.management.commands._base import AnalysisCommand
from catalog.services import run
from catalog.systems import system_names
from catalog.utils import EXIT_USAGE, dumps
from core.exceptions import UsageError


class Command(AnalysisCommand):
    """Prints to stdout; a report file is written only with --out"""

    help = 'List the named systems, or describe one with its defaults and sources'
    command = 'catalog'
    requires_system = False

    def add_command_arguments(self, parser):
        parser.add_argument('--describe', choices=system_names(), metavar='NAME', help='system to describe')

    def handle(self, *args, **options):
        if options.get('out'):
            return super().handle(*args, **options)
        try:
            result = run(self.problem(dict(options)))
        except UsageError as e:
            raise CommandError(e.message, returncode=EXIT_USAGE)
        if options.get('describe'):
            self.stdout.write(dumps(result.payload), ending='')
            return
        for system in result.payload['systems']:
            self.stdout.write(f"{system['name']:<18} {system['kind']:<9} {system['summary']}")
