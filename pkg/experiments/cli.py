import sys

from django.core.management import call_command
from django.core.management.base import CommandError

from experiments.management.commands.experiment import Command


def run(argv, stdout=None, stderr=None):
    """Run one experiment verb in-process and return its exit code.

    0 on success, 1 for invalid input or usage errors, 2 for runtime failures.
    """
    stderr = stderr or sys.stderr
    command = Command()
    command.argv = list(argv)
    try:
        call_command(command, *argv, stdout=stdout, stderr=stderr)
    except CommandError as e:
        stderr.write(f"{e}\n")
        if str(e).startswith('Error:'):
            stderr.write(command.create_parser('manage.py', 'experiment').format_usage())
        return e.returncode
    return 0
