import os

from structsplat.consistency import SPLIT
from structsplat.management.base import StructsplatCommand
from structsplat.projection import read_cameras, read_gaussians, write_footprints_csv
from structsplat.structure import read_tensor_field
from structsplat.utils import write_csv
from structsplat.views import observe_views, opacities
from structsplat.worker import BatchRunner

ETA_HEADER = ["gaussian_id", "view_id", "eta_x", "eta_y", "eta_z"]
DECISION_HEADER = [
    "gaussian_id",
    "decision",
    "n_total",
    "split_x",
    "split_y",
    "split_z",
]


class Command(StructsplatCommand):

    help = (
        "Projects 3D Gaussians into cameras and writes their screen-space "
        "footprints; with --structure, also votes on split and prune decisions."
    )
    input_files = ("gaussians", "cameras")
    input_dirs = ("structure",)

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument("gaussians", help="Gaussian list in the text format.")
        parser.add_argument("cameras", help="Camera list in the text format.")
        parser.add_argument(
            "--structure",
            help=(
                "Directory holding one analyze output directory per camera, "
                "named by camera id."
            ),
        )

    def run(self, config, out, gaussians, cameras, structure, **options):
        population = read_gaussians(gaussians)
        views = read_cameras(cameras)
        path = os.path.join(out, "footprints.csv")
        write_footprints_csv(path, population, views)
        self.wrote(path)
        if not structure:
            return
        fields = {
            camera.id: read_tensor_field(os.path.join(structure, str(camera.id)))
            for camera in views
        }
        table, samples = observe_views(
            population,
            views,
            fields,
            thresholds=config.thresholds,
            metric=config.metric,
            seed=config.seed,
            runner=BatchRunner(config.threads),
        )
        path = os.path.join(out, "eta.csv")
        write_csv(
            path,
            ETA_HEADER,
            [
                [population[row].id, sample.view_id] + list(sample.eta)
                for row, sample in samples
            ],
        )
        self.wrote(path)
        decisions = table.decisions(opacities(population), config.thresholds)
        rows = []
        for row, decision in enumerate(decisions):
            axes = list(decision.axes) if decision.kind == SPLIT else [False] * 3
            rows.append(
                [population[row].id, decision.kind, table.n_total[row]] + axes
            )
        path = os.path.join(out, "decisions.csv")
        write_csv(path, DECISION_HEADER, rows)
        self.wrote(path)
