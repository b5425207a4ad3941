import os

from structsplat.imaging import read_image, write_image
from structsplat.management.base import StructsplatCommand
from structsplat.plotting import plot_series
from structsplat.trainer import MODES, Trainer


class Command(StructsplatCommand):

    help = "Fits 2D Gaussians to a target image with the chosen densification."
    input_files = ("target",)

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument("--target", required=True, help="Target PNG or PFM.")
        parser.add_argument(
            "--mode", choices=MODES, help="Densification strategy (trainer.mode)."
        )
        parser.add_argument(
            "--iterations", type=int, help="Training length (trainer.iterations)."
        )

    def config_overrides(self, options):
        overrides = []
        if options.get("mode"):
            overrides.append("trainer.mode=%s" % options["mode"])
        if options.get("iterations"):
            overrides.append("trainer.iterations=%d" % options["iterations"])
        return overrides

    def run(self, config, out, target, **options):
        trainer = Trainer(
            read_image(target),
            config.trainer,
            seed=config.seed,
            scale_space=config.scale_space,
            thresholds=config.thresholds,
            split=config.split,
            metric=config.metric,
            output_dir=out,
        )
        try:
            population, report = trainer.run()
        finally:
            trainer.report.write(out)
        write_image(os.path.join(out, "render.png"), trainer.render())
        plot_series(
            os.path.join(out, "psnr.png"),
            [(config.trainer.mode, report.column("iteration"), report.column("psnr"))],
            "iteration",
            "PSNR (dB)",
        )
        self.stdout.write(
            "Final PSNR %.2f dB with %d Gaussians"
            % (report.final_psnr, len(population))
        )
        for name in ("train.csv", "timing.csv", "splits.csv", "render.png", "psnr.png"):
            self.wrote(os.path.join(out, name))
