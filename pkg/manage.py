#!/usr/bin/env python
"""
viscprof management utility.

    python manage.py wave-fan --system burgers --uminus 0 --s -1
    python manage.py test

Analysis commands accept hyphenated names, like the viscprof entry point.
"""
import os
import sys


def main():
    os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'config.settings')
    try:
        from django.core.management import execute_from_command_line
    except ImportError as exc:
        raise ImportError(
            "Couldn't import Django. Install the requirements "
            "(pip install -r requirements.txt) in the active environment."
        ) from exc
    argv = list(sys.argv)
    if len(argv) > 1 and not argv[1].startswith('-'):
        argv[1] = argv[1].replace('-', '_')
    execute_from_command_line(argv)


if __name__ == '__main__':
    main()
