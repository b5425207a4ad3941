import logging
import os

from django.core.management import BaseCommand, CommandError

from ..config import RunConfig
from ..exceptions import (
    BehindCamera,
    DimensionMismatch,
    InvalidConfigError,
    InvalidImageError,
    MalformedSceneError,
    ReportError,
    TrainingDiverged,
)

#: Errors a command reports as a failed run rather than a traceback.
RUNTIME_ERRORS = (
    BehindCamera,
    DimensionMismatch,
    InvalidConfigError,
    InvalidImageError,
    MalformedSceneError,
    ReportError,
    TrainingDiverged,
    OSError,
)

VERBOSITY_LEVELS = {0: logging.WARNING, 1: logging.INFO}


class StructsplatCommand(BaseCommand):
    """
    Base for the structsplat subcommands: shared run options, config
    loading and dumping, and mapping domain errors to CommandError.

    Subclasses implement ``run(config, **options)``.
    """

    leave_locale_alone = True
    requires_system_checks = []

    #: Options naming inputs that must exist before the output directory
    #: is created.
    input_files = ()
    input_dirs = ()

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument(
            "--config", dest="config_file", help="Config file of key = value lines."
        )
        parser.add_argument(
            "--set",
            action="append",
            dest="overrides",
            default=[],
            metavar="KEY=VALUE",
            help="Override one config value, e.g. scale_space.gamma=2.",
        )
        parser.add_argument("--out", dest="out", help="Output directory.")
        parser.add_argument("--seed", type=int, help="Global random seed.")
        parser.add_argument("--threads", type=int, help="Worker threads.")

    def handle(self, *args, **options):
        self.verbosity = options.get("verbosity", 1)
        logging.getLogger("structsplat").setLevel(
            VERBOSITY_LEVELS.get(self.verbosity, logging.DEBUG)
        )
        try:
            self.check_inputs(options)
            config = self.load_config(options)
            out = config.output or "."
            os.makedirs(out, exist_ok=True)
            config.dump(os.path.join(out, "config.cfg"))
            self.run(config, out=out, **self.command_options(options))
        except RUNTIME_ERRORS as exc:
            raise CommandError(str(exc))

    def check_inputs(self, options):
        for key in self.input_files:
            path = options.get(key)
            if path and not os.path.isfile(path):
                raise CommandError("%s %s: no such file" % (key, path))
        for key in self.input_dirs:
            path = options.get(key)
            if path and not os.path.isdir(path):
                raise CommandError("%s %s: no such directory" % (key, path))

    def command_options(self, options):
        shared = ("config_file", "overrides", "out", "seed", "threads")
        return {key: value for key, value in options.items() if key not in shared}

    def load_config(self, options):
        overrides = list(options.get("overrides") or [])
        for key in ("seed", "threads"):
            if options.get(key) is not None:
                overrides.append("%s=%s" % (key, options[key]))
        if options.get("out"):
            overrides.append("output=%s" % options["out"])
        overrides.extend(self.config_overrides(options))
        if options.get("config_file"):
            return RunConfig.load(options["config_file"], overrides)
        return RunConfig().with_overrides(overrides)

    def config_overrides(self, options):
        """
        Extra ``key=value`` overrides derived from command-specific flags.
        """
        return []

    def run(self, config, out, **options):
        raise NotImplementedError("Subclasses must implement run()")

    def wrote(self, path):
        if self.verbosity > 0:
            self.stdout.write("Wrote %s" % path)
