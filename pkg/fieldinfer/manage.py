#!/usr/bin/env python
"""fieldinfer command-line entry point (Django management commands)."""
import os
import sys

# Subcommand spellings that differ from the management command module names.
COMMAND_ALIASES = {
    'test': 'test_mean',
    'select-bandwidth': 'select_bandwidth',
}


def main():
    """Run fieldinfer commands."""
    os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'fieldinfer.settings')
    try:
        from django.core.management import execute_from_command_line
    except ImportError as exc:
        raise ImportError(
            "Couldn't import Django. Are you sure it's installed and "
            "available on your PYTHONPATH environment variable? Did you "
            "forget to activate a virtual environment?"
        ) from exc
    argv = list(sys.argv)
    if len(argv) > 1:
        argv[1] = COMMAND_ALIASES.get(argv[1], argv[1])
    execute_from_command_line(argv)


if __name__ == '__main__':
    main()
