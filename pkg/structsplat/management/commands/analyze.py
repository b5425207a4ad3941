import logging
import os

from structsplat.imaging import read_image
from structsplat.management.base import StructsplatCommand
from structsplat.plotting import save_ellipses, save_heatmap
from structsplat.structure import PLANE_FILES, analyze_image, write_tensor_field

logger = logging.getLogger("structsplat.analyze")


class Command(StructsplatCommand):

    help = "Computes the aggregated structure tensor field of an image."
    input_files = ("image",)

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument("image", help="PNG or PFM image to analyze.")
        parser.add_argument(
            "--stride",
            type=int,
            default=8,
            help="Pixel spacing of the orientation ellipse field.",
        )

    def run(self, config, out, image, stride, **options):
        img = read_image(image)
        logger.info("Analyzing %s (%dx%d)", image, img.width, img.height)
        field = analyze_image(img, config.scale_space)
        write_tensor_field(out, field)
        lambda1 = field.eigen(config.scale_space.epsilon)[0]
        save_heatmap(os.path.join(out, "lambda1.png"), lambda1, title="lambda1")
        save_ellipses(
            os.path.join(out, "ellipses.png"),
            field,
            background=img,
            stride=max(1, stride),
            eps=config.scale_space.epsilon,
        )
        for name in PLANE_FILES + ("lambda1.png", "ellipses.png"):
            self.wrote(os.path.join(out, name))
