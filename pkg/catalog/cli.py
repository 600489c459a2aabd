"""
CLI.PY - The viscprof command

    viscprof <command> [options]

Each command is a management command of this app; this entry point only
maps hyphenated names, turns parse errors into the usage status and
returns the command's exit status instead of raising.
"""

import logging
import os
import sys
from pathlib import Path
from typing import List, Optional, TextIO

from django.core.management import find_commands, load_command_class
from django.core.management.base import CommandError

from .utils import EXIT_OK, EXIT_USAGE

logger = logging.getLogger(__name__)

PROG = 'viscprof'


def command_names() -> List[str]:
    return sorted(find_commands(str(Path(__file__).resolve().parent / 'management')))


def usage() -> str:
    names = ', '.join(name.replace('_', '-') for name in command_names())
    return f'usage: {PROG} <command> [options]\ncommands: {names}\n'


def run_command(argv: List[str], stdout: Optional[TextIO] = None, stderr: Optional[TextIO] = None) -> int:
    """Run one command line and return its exit status"""
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    if not argv or argv[0] in ('-h', '--help'):
        (stdout if argv else stderr).write(usage())
        return EXIT_OK if argv else EXIT_USAGE

    name = argv[0].replace('-', '_')
    if name not in command_names():
        stderr.write(f'{PROG}: unknown command {argv[0]!r}\n{usage()}')
        return EXIT_USAGE

    command = load_command_class('catalog', name)
    parser = command.create_parser(PROG, argv[0])
    try:
        options = parser.parse_args(argv[1:])
    except CommandError as e:
        stderr.write(f'{PROG} {argv[0]}: {e}\n')
        return EXIT_USAGE
    except SystemExit as e:
        # --help
        return int(e.code or 0)

    options = vars(options)
    args = options.pop('args', ())
    try:
        command.execute(*args, stdout=stdout, stderr=stderr, **options)
    except CommandError as e:
        stderr.write(f'{PROG} {argv[0]}: {e}\n')
        logger.debug(f"{argv[0]} exited with status {e.returncode}")
        return e.returncode
    return EXIT_OK


def main():
    os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'config.settings')
    import django

    django.setup()
    sys.exit(run_command(sys.argv[1:]))


if __name__ == '__main__':
    main()
