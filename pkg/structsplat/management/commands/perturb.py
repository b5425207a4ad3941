import os

from django.core.management import CommandError

from structsplat.imaging import read_image, write_image
from structsplat.management.base import StructsplatCommand
from structsplat.robustness import (
    KINDS,
    Perturbation,
    perturb,
    robustness_suite,
    write_suite_csv,
)
from structsplat.worker import BatchRunner


class Command(StructsplatCommand):

    help = (
        "Measures how much the aggregated tensor field changes under "
        "photometric perturbations of an image."
    )
    input_files = ("image",)

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument("image", help="PNG or PFM image to perturb.")
        parser.add_argument(
            "--kind",
            choices=KINDS,
            help="Run a single perturbation instead of the full battery.",
        )
        parser.add_argument("--value", type=float, help="Parameter of --kind.")
        parser.add_argument(
            "--save-image",
            action="store_true",
            help="Also write the perturbed image (single perturbation only).",
        )

    def run(self, config, out, image, kind, value, save_image, **options):
        img = read_image(image)
        battery = None
        if kind is not None:
            if value is None:
                raise CommandError("--kind needs --value")
            try:
                battery = [Perturbation(kind, value)]
            except ValueError as exc:
                raise CommandError(str(exc))
            if save_image:
                path = os.path.join(out, "perturbed.png")
                write_image(path, perturb(img, battery[0], config.seed))
                self.wrote(path)
        rows = robustness_suite(
            img,
            config.scale_space,
            seed=config.seed,
            runner=BatchRunner(config.threads),
            battery=battery,
        )
        path = os.path.join(out, "robustness.csv")
        write_suite_csv(path, rows)
        self.wrote(path)
