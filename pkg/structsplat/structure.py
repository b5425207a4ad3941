import logging
import os

import numpy as np

from .exceptions import DimensionMismatch, InvalidImageError
from .imaging import (
    ImageBuffer,
    ScaleSpaceConfig,
    blur_array,
    build_scale_space,
    read_pfm,
    write_pfm,
)

logger = logging.getLogger("structsplat.structure")

#: PFM file names a tensor field is stored under.
PLANE_FILES = ("sxx.pfm", "sxy.pfm", "syy.pfm")


class TensorField:
    """
    Per-pixel symmetric 2x2 tensors stored as three (height, width) planes.
    """

    def __init__(self, sxx, sxy, syy):
        self.sxx = np.asarray(sxx, dtype=np.float64)
        self.sxy = np.asarray(sxy, dtype=np.float64)
        self.syy = np.asarray(syy, dtype=np.float64)
        if not (self.sxx.shape == self.sxy.shape == self.syy.shape):
            raise DimensionMismatch(
                "Tensor planes differ in shape: %s, %s, %s"
                % (self.sxx.shape, self.sxy.shape, self.syy.shape)
            )
        if self.sxx.ndim != 2:
            raise DimensionMismatch("Tensor planes must be 2D")

    @classmethod
    def zeros(cls, height, width):
        return cls(*(np.zeros((height, width)) for _ in range(3)))

    @classmethod
    def constant(cls, height, width, sxx, sxy, syy):
        return cls(*(np.full((height, width), value) for value in (sxx, sxy, syy)))

    @property
    def height(self):
        return self.sxx.shape[0]

    @property
    def width(self):
        return self.sxx.shape[1]

    @property
    def shape(self):
        return self.sxx.shape

    def planes(self):
        return self.sxx, self.sxy, self.syy

    def trace(self):
        return self.sxx + self.syy

    def frobenius(self):
        return np.sqrt(self.sxx ** 2 + 2.0 * self.sxy ** 2 + self.syy ** 2)

    def at(self, x, y):
        """
        The 2x2 tensor at integer pixel (x, y).
        """
        return np.array(
            [[self.sxx[y, x], self.sxy[y, x]], [self.sxy[y, x], self.syy[y, x]]]
        )

    def scaled(self, factor):
        return TensorField(self.sxx * factor, self.sxy * factor, self.syy * factor)

    def eigen(self, eps=1e-8):
        return eigen_decompose(self.sxx, self.sxy, self.syy, eps)

    def is_psd(self, tolerance=1e-9):
        return bool(
            np.all(self.sxx >= -tolerance)
            and np.all(self.syy >= -tolerance)
            and np.all(self.sxx * self.syy - self.sxy ** 2 >= -tolerance)
        )


class EnergyField:
    """
    Per-pixel band energy between two pyramid levels.
    """

    def __init__(self, e):
        self.e = np.asarray(e, dtype=np.float64)

    @property
    def shape(self):
        return self.e.shape

    def mean(self):
        return float(self.e.mean())


class EigenReadout:
    def __init__(self, lambda1, lambda2, e1, coherence):
        self.lambda1 = lambda1
        self.lambda2 = lambda2
        self.e1 = e1
        self.coherence = coherence

    def __repr__(self):
        return "<EigenReadout lambda1=%r lambda2=%r e1=%r coherence=%r>" % (
            self.lambda1,
            self.lambda2,
            tuple(self.e1),
            self.coherence,
        )


def structure_tensor(img, rho):
    """
    Integrates gradient outer products (summed over channels) with a Gaussian
    window of standard deviation rho.
    """
    if not rho > 0:
        raise ValueError("Integration scale must be positive, got %r" % rho)
    if not np.all(np.isfinite(img.data)):
        raise InvalidImageError("Image contains non-finite samples")
    gy, gx = np.gradient(img.data, axis=(0, 1))
    sxx = (gx * gx).sum(axis=2)
    sxy = (gx * gy).sum(axis=2)
    syy = (gy * gy).sum(axis=2)
    return TensorField(
        blur_array(sxx, rho), blur_array(sxy, rho), blur_array(syy, rho)
    )


def normalize_tensor(t, eps):
    if not eps > 0:
        raise ValueError("eps must be positive, got %r" % eps)
    denominator = t.trace() + eps
    return TensorField(t.sxx / denominator, t.sxy / denominator, t.syy / denominator)


def band_energy(prev, cur):
    if prev.shape != cur.shape:
        raise DimensionMismatch(
            "Cannot compare images of shape %s and %s" % (prev.shape, cur.shape)
        )
    return EnergyField(np.sqrt(((prev.data - cur.data) ** 2).sum(axis=2)))


def combine_levels(tensors, energies, omegas, gamma, eps):
    """
    Energy- and frequency-weighted sum of normalized per-level tensors:
    sum(E**gamma * omega**2 * S) / (sum(E**gamma) + eps).
    """
    if not (len(tensors) == len(energies) == len(omegas)):
        raise ValueError("Need one tensor, energy and frequency per level")
    shape = tensors[0].shape
    sxx, sxy, syy = np.zeros(shape), np.zeros(shape), np.zeros(shape)
    total = np.zeros(shape)
    for tensor, energy, omega in zip(tensors, energies, omegas):
        if tensor.shape != shape or energy.shape != shape:
            raise DimensionMismatch("Levels differ in shape")
        weight = energy.e ** gamma
        total += weight
        weight = weight * omega ** 2
        sxx += weight * tensor.sxx
        sxy += weight * tensor.sxy
        syy += weight * tensor.syy
    total += eps
    return TensorField(sxx / total, sxy / total, syy / total)


def level_tensors(ss, cfg):
    """
    Returns the normalized tensor and band energy of every pyramid level.
    The band of level 0 is taken against the unblurred original.
    """
    tensors, energies = [], []
    previous = ss.original
    for sigma, level in ss:
        tensor = structure_tensor(level, cfg.integration_factor * sigma)
        tensors.append(normalize_tensor(tensor, cfg.epsilon))
        energies.append(band_energy(previous, level))
        previous = level
    return tensors, energies


def aggregate_tensors(ss, cfg=None):
    cfg = cfg or ScaleSpaceConfig()
    if len(ss) != cfg.levels + 1:
        raise ValueError(
            "Scale space has %d levels but the config expects %d"
            % (len(ss), cfg.levels + 1)
        )
    tensors, energies = level_tensors(ss, cfg)
    if logger.isEnabledFor(logging.DEBUG):
        for sigma, energy in zip(ss.sigmas, energies):
            logger.debug("Level sigma=%.3f mean band energy %.6f", sigma, energy.mean())
    return combine_levels(tensors, energies, cfg.omegas(), cfg.gamma, cfg.epsilon)


def analyze_image(img, cfg=None):
    """
    Builds the scale space of img and returns its aggregated tensor field.
    """
    cfg = cfg or ScaleSpaceConfig()
    return aggregate_tensors(build_scale_space(img, cfg), cfg)


def eigen_decompose(sxx, sxy, syy, eps=1e-8):
    """
    Closed-form eigendecomposition of symmetric 2x2 tensors, elementwise over
    arrays. Returns (lambda1, lambda2, e1x, e1y, coherence).
    """
    sxx = np.asarray(sxx, dtype=np.float64)
    sxy = np.asarray(sxy, dtype=np.float64)
    syy = np.asarray(syy, dtype=np.float64)
    half_trace = 0.5 * (sxx + syy)
    root = np.hypot(0.5 * (sxx - syy), sxy)
    lambda1 = np.maximum(half_trace + root, 0.0)
    lambda2 = np.clip(half_trace - root, 0.0, None)
    lambda2 = np.minimum(lambda2, lambda1)
    # Pick the better conditioned of the two null-space rows
    wide = sxx >= syy
    ax = np.where(wide, lambda1 - syy, sxy)
    ay = np.where(wide, sxy, lambda1 - sxx)
    norm = np.hypot(ax, ay)
    degenerate = norm == 0
    safe = np.where(degenerate, 1.0, norm)
    e1x = np.where(degenerate, 1.0, ax / safe)
    e1y = np.where(degenerate, 0.0, ay / safe)
    flip = (e1x < 0) | ((e1x == 0) & (e1y < 0))
    e1x = np.where(flip, -e1x, e1x)
    e1y = np.where(flip, -e1y, e1y)
    coherence = (lambda1 - lambda2) / (lambda1 + lambda2 + eps)
    return lambda1, lambda2, e1x, e1y, coherence


def principal_eigen(sxx, sxy, syy, eps=1e-8):
    lambda1, lambda2, e1x, e1y, coherence = eigen_decompose(sxx, sxy, syy, eps)
    return EigenReadout(
        float(lambda1),
        float(lambda2),
        np.array([float(e1x), float(e1y)]),
        float(coherence),
    )


def min_wavelength(lambda1, eps=1e-8):
    """
    Smallest spatial period, in pixels, supported by a tensor whose principal
    eigenvalue is lambda1.
    """
    return 1.0 / (np.sqrt(np.maximum(lambda1, 0.0)) + eps)


def write_tensor_field(directory, field):
    os.makedirs(directory, exist_ok=True)
    for name, plane in zip(PLANE_FILES, field.planes()):
        write_pfm(os.path.join(directory, name), ImageBuffer(plane))


def read_tensor_field(directory):
    planes = []
    for name in PLANE_FILES:
        img = read_pfm(os.path.join(directory, name))
        if img.channels != 1:
            raise InvalidImageError("%s must be single channel" % name)
        planes.append(img.data[:, :, 0])
    return TensorField(*planes)
