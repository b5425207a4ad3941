import logging
import math
import os

from .exceptions import ReportError
from .plotting import plot_series
from .trainer import TRAIN_HEADER, TrainReport
from .utils import read_csv, write_csv

logger = logging.getLogger("structsplat.report")

COMPARISON_HEADER = ["run"] + TRAIN_HEADER[:1] + ["wall_time"] + TRAIN_HEADER[1:]


def find_runs(run_dir):
    """
    Returns (label, directory) for run_dir itself and each immediate
    subdirectory holding a train.csv, sorted by label.
    """
    if not os.path.isdir(run_dir):
        raise ReportError("%s is not a directory" % run_dir)
    runs = []
    if os.path.exists(os.path.join(run_dir, "train.csv")):
        runs.append((os.path.basename(os.path.abspath(run_dir)), run_dir))
    for name in sorted(os.listdir(run_dir)):
        path = os.path.join(run_dir, name)
        if os.path.isfile(os.path.join(path, "train.csv")):
            runs.append((name, path))
    return runs


def load_run(directory):
    header = read_csv(os.path.join(directory, "train.csv"))[0]
    if header != TRAIN_HEADER:
        raise ReportError(
            "%s/train.csv has columns %s, expected %s"
            % (directory, ",".join(header), ",".join(TRAIN_HEADER))
        )
    try:
        train = TrainReport.read(directory)
    except (ValueError, IndexError) as exc:
        raise ReportError("%s/train.csv is malformed: %s" % (directory, exc))
    if not len(train):
        raise ReportError("%s/train.csv has no rows" % directory)
    return train


def report(run_dir, out_dir=None):
    """
    Merges every training run under run_dir into comparison.csv and two
    PSNR charts (against iteration and against wall time). Returns a
    summary of the final state of each run.
    """
    out_dir = out_dir or run_dir
    runs = find_runs(run_dir)
    if not runs:
        raise ReportError("No training reports found in %s" % run_dir)
    os.makedirs(out_dir, exist_ok=True)
    rows, by_iteration, by_time, summary = [], [], [], []
    for label, directory in runs:
        train = load_run(directory)
        for (iteration, wall_time), row in zip(train.wall_times, train.rows):
            rows.append((label, iteration, wall_time) + row[1:])
        by_iteration.append((label, train.column("iteration"), train.column("psnr")))
        times = [wall_time for _, wall_time in train.wall_times]
        if not all(math.isnan(t) for t in times):
            by_time.append((label, times, train.column("psnr")))
        summary.append(
            {
                "run": label,
                "iterations": len(train),
                "final_psnr": train.final_psnr,
                "gaussians": train.final_count,
            }
        )
        logger.info(
            "%s: %d iterations, final PSNR %.2f dB, %d Gaussians",
            label,
            len(train),
            train.final_psnr,
            train.final_count,
        )
    write_csv(os.path.join(out_dir, "comparison.csv"), COMPARISON_HEADER, rows)
    plot_series(
        os.path.join(out_dir, "psnr_iterations.png"),
        by_iteration,
        "iteration",
        "PSNR (dB)",
    )
    plot_series(
        os.path.join(out_dir, "psnr_walltime.png"),
        by_time,
        "wall time (s)",
        "PSNR (dB)",
    )
    return summary
