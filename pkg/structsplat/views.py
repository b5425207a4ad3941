"""
Multiview observation of a 3D population: every camera contributes one
violation vector per visible Gaussian, accumulated into consistency counters.
"""
import logging

import numpy as np

from .consistency import ConsistencyTable, Thresholds
from .exceptions import MalformedSceneError
from .metric import EtaSample, MetricConfig, eta, eta_proj, sample_footprint
from .projection import in_view, project_gaussian
from .utils import derive_seed
from .worker import BatchRunner

logger = logging.getLogger("structsplat.views")


def observe_view(gaussians, camera, field, th, metric, seed, iteration):
    """
    Samples one view. Returns (table, samples) where samples lists
    (row, EtaSample) for the Gaussians the camera sees.
    """
    table = ConsistencyTable(len(gaussians), axes=3)
    samples = []
    for row, g in enumerate(gaussians):
        pg = project_gaussian(g, camera)
        if pg is None or not in_view(pg, camera):
            continue
        gaussian_id = row if g.id is None else g.id
        tensor = sample_footprint(
            pg,
            field,
            metric.samples,
            derive_seed(seed, gaussian_id, camera.id, iteration),
        )
        if metric.kind == "proj":
            violation = eta_proj(pg, tensor)
        else:
            violation = eta(pg, tensor, metric.epsilon)
        sample = EtaSample(violation, camera.id, tensor)
        table.record(sample.eta[None], th, rows=[row])
        samples.append((row, sample))
    logger.debug("View %s observed %d Gaussians", camera.id, len(samples))
    return table, samples


def observe_views(
    gaussians,
    cameras,
    fields,
    thresholds=None,
    metric=None,
    seed=0,
    iteration=0,
    runner=None,
):
    """
    Observes every camera (in parallel through runner) and merges the
    per-view counters in camera order.

    fields maps camera id to that view's aggregated tensor field. Returns
    (table, samples) with samples as (row, EtaSample) pairs in camera order.
    """
    th = thresholds or Thresholds()
    metric = metric or MetricConfig()
    runner = runner or BatchRunner()
    gaussians = list(gaussians)
    missing = [camera.id for camera in cameras if camera.id not in fields]
    if missing:
        raise MalformedSceneError("No tensor field for cameras %s" % missing)
    results = runner.run(
        [
            (
                observe_view,
                (gaussians, camera, fields[camera.id], th, metric, seed, iteration),
            )
            for camera in cameras
        ]
    )
    table = ConsistencyTable(len(gaussians), axes=3)
    samples = []
    for view_table, view_samples in results:
        table = table.merge(view_table)
        samples.extend(view_samples)
    return table, samples


def opacities(gaussians):
    return np.array([g.opacity for g in gaussians], dtype=np.float64)
