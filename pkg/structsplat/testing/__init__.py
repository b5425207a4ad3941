from .images import (  # noqa
    band_limited_noise,
    checkerboard,
    constant,
    known_population,
    known_target,
    multifrequency_target,
    reference_image,
    sinusoid,
    step_edge,
)
from .scenes import axis_camera, gaussian_cloud, orbit_cameras  # noqa

__all__ = [
    "axis_camera",
    "band_limited_noise",
    "checkerboard",
    "constant",
    "gaussian_cloud",
    "known_population",
    "known_target",
    "multifrequency_target",
    "orbit_cameras",
    "reference_image",
    "sinusoid",
    "step_edge",
]
