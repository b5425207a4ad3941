"""
Footprint sampling of the aggregated tensor field and the per-axis
frequency-violation metrics.
"""
import numpy as np
from scipy import ndimage

from .structure import eigen_decompose, min_wavelength
from .utils import ConfigSection

#: Footprints whose axes are all shorter than this (pixels) read the center.
MIN_FOOTPRINT = 0.25

METRIC_KINDS = ("eta", "proj")


class MetricConfig(ConfigSection):
    """
    Which violation metric drives decisions and how footprints are sampled.
    """

    name = "metric"
    defaults = {"kind": "eta", "samples": 64, "epsilon": 1e-8}

    def validate(self):
        self.check(self.kind in METRIC_KINDS, "kind", "one of %s" % (METRIC_KINDS,))
        self.check(self.samples >= 1, "samples", "at least 1")
        self.check(self.epsilon > 0, "epsilon", "positive")


class EtaSample:
    def __init__(self, eta, view_id=None, tensor=None):
        self.eta = np.asarray(eta, dtype=np.float64)
        self.view_id = view_id
        self.tensor = tensor
        if not np.all(np.isfinite(self.eta)) or np.any(self.eta < 0):
            raise ValueError("Violation vector must be finite and >= 0: %r" % (eta,))

    def __repr__(self):
        return "<EtaSample view=%r eta=%r>" % (self.view_id, tuple(self.eta))


def footprint_points(mu, axes, uniforms):
    """
    Maps uniforms in [0, 1)^2 to points inside the 1-sigma ellipse of the
    covariance sum_k v_k v_k^T, batched over Gaussians.

    mu is (N, 2), axes is (N, K, 2) and uniforms is (N, S, 2); returns
    (N, S, 2) points. Footprints with every axis under MIN_FOOTPRINT map all
    samples to the center.
    """
    mu = np.asarray(mu, dtype=np.float64)
    axes = np.asarray(axes, dtype=np.float64)
    uniforms = np.asarray(uniforms, dtype=np.float64)
    covariance = np.einsum("nki,nkj->nij", axes, axes)
    values, vectors = np.linalg.eigh(covariance)
    basis = vectors * np.sqrt(np.clip(values, 0.0, None))[:, None, :]
    radius = np.sqrt(uniforms[..., 0])
    angle = 2.0 * np.pi * uniforms[..., 1]
    disk = np.stack([radius * np.cos(angle), radius * np.sin(angle)], axis=-1)
    points = mu[:, None, :] + np.einsum("nij,nsj->nsi", basis, disk)
    degenerate = np.all(np.linalg.norm(axes, axis=2) < MIN_FOOTPRINT, axis=1)
    points[degenerate] = mu[degenerate, None, :]
    return points


def sample_tensor_field(field, points):
    """
    Bilinearly interpolates the tensor planes at (..., 2) pixel coordinates,
    clamping to the image. Returns (..., 3) components (sxx, sxy, syy).
    """
    points = np.asarray(points, dtype=np.float64)
    flat = points.reshape(-1, 2)
    xs = np.clip(flat[:, 0], 0.0, field.width - 1)
    ys = np.clip(flat[:, 1], 0.0, field.height - 1)
    coordinates = np.vstack([ys, xs])
    components = np.stack(
        [
            ndimage.map_coordinates(plane, coordinates, order=1, mode="nearest")
            for plane in field.planes()
        ],
        axis=-1,
    )
    return components.reshape(points.shape[:-1] + (3,))


def as_matrix(components):
    sxx, sxy, syy = components
    return np.array([[sxx, sxy], [sxy, syy]])


def sample_footprint(pg, field, n_samples=64, rng_seed=0):
    """
    Mean tensor over n_samples points drawn uniformly inside pg's screen
    footprint, as a 2x2 matrix.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    rng = np.random.default_rng(rng_seed)
    uniforms = rng.random((1, n_samples, 2))
    points = footprint_points(pg.mu2d[None], pg.axes[None], uniforms)
    components = sample_tensor_field(field, points[0]).mean(axis=0)
    return as_matrix(components)


def eta_batch(axes, components, eps=1e-8):
    """
    eta_k = |v_k| (sqrt(lambda1) + eps) for (N, K, 2) axes and (N, 3) tensor
    components.
    """
    components = np.asarray(components, dtype=np.float64)
    lambda1 = eigen_decompose(
        components[:, 0], components[:, 1], components[:, 2], eps
    )[0]
    return np.linalg.norm(axes, axis=2) / min_wavelength(lambda1, eps)[:, None]


def eta_proj_batch(axes, components):
    """
    Per-axis quadratic form sqrt(v^T S v) on the raw axis vectors.
    """
    components = np.asarray(components, dtype=np.float64)
    u, v = axes[..., 0], axes[..., 1]
    sxx, sxy, syy = (components[:, i, None] for i in range(3))
    form = sxx * u * u + 2.0 * sxy * u * v + syy * v * v
    return np.sqrt(np.clip(form, 0.0, None))


def violation_batch(kind, axes, components, eps=1e-8):
    if kind == "proj":
        return eta_proj_batch(axes, components)
    return eta_batch(axes, components, eps)


def _components(tensor):
    tensor = np.asarray(tensor, dtype=np.float64)
    return np.array([[tensor[0, 0], 0.5 * (tensor[0, 1] + tensor[1, 0]), tensor[1, 1]]])


def eta(pg, tensor, eps=1e-8):
    return eta_batch(pg.axes[None], _components(tensor), eps)[0]


def eta_proj(pg, tensor):
    return eta_proj_batch(pg.axes[None], _components(tensor))[0]
