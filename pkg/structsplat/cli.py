"""
The ``structsplat`` console entry point.

Each subcommand is a Django management command of the ``structsplat`` app;
this module configures a minimal settings object, routes argv to the
command and turns the outcome into an exit code.
"""
import sys

import django
from django.apps import apps
from django.conf import settings
from django.core.management import CommandError, load_command_class

SUBCOMMANDS = ("analyze", "perturb", "project", "train2d", "report")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_FAILURE = 2

USAGE = """usage: structsplat <subcommand> [options]

subcommands:
  analyze   aggregated structure tensor field of an image
  perturb   tensor field robustness under image perturbations
  project   screen-space footprints and multiview split/prune votes
  train2d   fit 2D Gaussians to an image
  report    compare training runs

Run 'structsplat <subcommand> --help' for its options.
"""


def logging_config(level="INFO"):
    return {
        "version": 1,
        "disable_existing_loggers": False,
        "formatters": {
            "console": {"format": "%(asctime)s %(levelname)s %(name)s %(message)s"}
        },
        "handlers": {
            "console": {"class": "logging.StreamHandler", "formatter": "console"}
        },
        "loggers": {
            "structsplat": {"handlers": ["console"], "level": level, "propagate": False}
        },
    }


def setup():
    """
    Configures Django settings for command-line use, unless something
    (a test harness, a host project) already has.
    """
    if not settings.configured:
        settings.configure(INSTALLED_APPS=["structsplat"], LOGGING=logging_config())
    if not apps.ready:
        django.setup()


def dispatch(argv=None, stdout=None, stderr=None):
    """
    Runs one subcommand and returns the process exit code: 0 on success,
    1 on usage errors and 2 when the command fails.
    """
    argv = sys.argv[1:] if argv is None else list(argv)
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    if not argv or argv[0] in ("-h", "--help", "help"):
        (stdout if argv else stderr).write(USAGE)
        return EXIT_OK if argv else EXIT_USAGE
    name, rest = argv[0], argv[1:]
    if name not in SUBCOMMANDS:
        stderr.write("Unknown subcommand %r\n\n%s" % (name, USAGE))
        return EXIT_USAGE
    setup()
    command = load_command_class("structsplat", name)
    parser = command.create_parser("structsplat", name)
    try:
        options = parser.parse_args(rest)
    except CommandError as exc:
        stderr.write("%s\n%s" % (exc, parser.format_usage()))
        return EXIT_USAGE
    except SystemExit as exc:
        # argparse exits by itself for --help
        return EXIT_OK if not exc.code else EXIT_USAGE
    cmd_options = vars(options)
    args = cmd_options.pop("args", ())
    cmd_options["stdout"] = stdout
    cmd_options["stderr"] = stderr
    try:
        command.execute(*args, **cmd_options)
    except CommandError as exc:
        stderr.write("Error: %s\n" % exc)
        return EXIT_FAILURE
    return EXIT_OK


def main():
    sys.exit(dispatch())
