from structsplat.management.base import StructsplatCommand
from structsplat.report import report


class Command(StructsplatCommand):

    help = "Compares training runs and charts PSNR against iterations and time."
    input_dirs = ("run_dir",)

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument("run_dir", help="Run directory or parent of runs.")

    def config_overrides(self, options):
        # Charts land next to the runs unless --out says otherwise
        if not options.get("out"):
            return ["output=%s" % options["run_dir"]]
        return []

    def run(self, config, out, run_dir, **options):
        for run in report(run_dir, out):
            self.stdout.write(
                "%(run)s: %(iterations)d iterations, final PSNR %(final_psnr).2f dB, "
                "%(gaussians)d Gaussians" % run
            )
