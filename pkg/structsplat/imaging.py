import logging
import math

import numpy as np
from PIL import Image, UnidentifiedImageError
from scipy import ndimage

from .exceptions import InvalidImageError
from .utils import ConfigSection

logger = logging.getLogger("structsplat.imaging")

#: Smallest width and height the analysis accepts.
MIN_ANALYSIS_SIZE = 8


class ImageBuffer:
    """
    Floating point image in row-major (height, width, channels) layout.

    Values nominally live in [0, 1] but intermediates may leave that range;
    clamping only happens when writing 8-bit files.
    """

    def __init__(self, data):
        data = np.array(data, dtype=np.float64)
        if data.ndim == 2:
            data = data[:, :, None]
        if data.ndim != 3:
            raise InvalidImageError(
                "Image data must be 2D or 3D, got %d dimensions" % data.ndim
            )
        if data.shape[2] not in (1, 3):
            raise InvalidImageError("unsupported channel count %d" % data.shape[2])
        self.data = data

    @property
    def height(self):
        return self.data.shape[0]

    @property
    def width(self):
        return self.data.shape[1]

    @property
    def channels(self):
        return self.data.shape[2]

    @property
    def shape(self):
        return self.data.shape

    def copy(self):
        return ImageBuffer(self.data.copy())

    def as_rgb(self):
        if self.channels == 3:
            return self.copy()
        return ImageBuffer(np.repeat(self.data, 3, axis=2))

    def check_analysable(self):
        """
        Raises InvalidImageError unless the image is at least 8x8 and every
        sample is finite.
        """
        if self.width < MIN_ANALYSIS_SIZE or self.height < MIN_ANALYSIS_SIZE:
            raise InvalidImageError(
                "Image is %dx%d; analysis needs at least %dx%d"
                % (self.width, self.height, MIN_ANALYSIS_SIZE, MIN_ANALYSIS_SIZE)
            )
        if not np.all(np.isfinite(self.data)):
            raise InvalidImageError("Image contains non-finite samples")

    def __repr__(self):
        return "<ImageBuffer %dx%dx%d>" % (self.width, self.height, self.channels)


class ScaleSpaceConfig(ConfigSection):
    """
    Parameters of the multi-scale structure analysis.
    """

    name = "scale_space"
    defaults = {
        "levels": 4,
        "base": 1.5,
        "gamma": 3.0,
        "epsilon": 1e-8,
        "integration_factor": 3.0,
        "omega_constant": 1.0,
    }

    def validate(self):
        self.check(self.levels >= 1, "levels", "at least 1")
        self.check_finite(
            "base", "gamma", "epsilon", "integration_factor", "omega_constant"
        )
        self.check(self.base > 1, "base", "greater than 1")
        self.check(self.gamma > 0, "gamma", "positive")
        self.check(self.epsilon > 0, "epsilon", "positive")
        self.check(self.integration_factor > 0, "integration_factor", "positive")
        self.check(self.omega_constant > 0, "omega_constant", "positive")

    def sigmas(self):
        return [self.base ** level for level in range(self.levels + 1)]

    def omegas(self):
        return [self.omega_constant / sigma for sigma in self.sigmas()]


class ScaleSpace:
    """
    An image plus its blurred copies at sigma_l = base ** l.
    """

    def __init__(self, original, levels, sigmas):
        if len(levels) != len(sigmas):
            raise ValueError("Need one sigma per level")
        self.original = original
        self.levels = list(levels)
        self.sigmas = list(sigmas)

    def __len__(self):
        return len(self.levels)

    def __iter__(self):
        return iter(zip(self.sigmas, self.levels))


def gaussian_kernel(sigma):
    """
    Normalized 1D Gaussian taps truncated at radius ceil(3 sigma).
    """
    radius = max(1, int(math.ceil(3.0 * sigma)))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-0.5 * (x / sigma) ** 2)
    return kernel / kernel.sum()


def blur_array(array, sigma):
    """
    Separable Gaussian blur over the first two axes of array, replicating
    border samples.
    """
    if not math.isfinite(sigma) or sigma < 0:
        raise InvalidImageError("Blur sigma must be finite and >= 0, got %r" % sigma)
    array = np.asarray(array, dtype=np.float64)
    if sigma == 0:
        return array.copy()
    kernel = gaussian_kernel(sigma)
    out = ndimage.correlate1d(array, kernel, axis=0, mode="nearest")
    return ndimage.correlate1d(out, kernel, axis=1, mode="nearest")


def gaussian_blur(img, sigma):
    return ImageBuffer(blur_array(img.data, sigma))


def build_scale_space(img, cfg=None):
    """
    Blurs the image at every level of the configured pyramid. Each level is
    blurred directly from the original, not from the previous level.
    """
    cfg = cfg or ScaleSpaceConfig()
    img.check_analysable()
    sigmas = cfg.sigmas()
    levels = [gaussian_blur(img, sigma) for sigma in sigmas]
    logger.debug("Built scale space of %r at sigmas %s", img, sigmas)
    return ScaleSpace(img, levels, sigmas)


# Image I/O


def read_image(path):
    """
    Reads a PNG (via Pillow) or PFM file into an ImageBuffer, choosing the
    decoder by extension.
    """
    if str(path).lower().endswith(".pfm"):
        img = read_pfm(path)
    else:
        img = read_png(path)
    if img.width < MIN_ANALYSIS_SIZE or img.height < MIN_ANALYSIS_SIZE:
        raise InvalidImageError(
            "%s is %dx%d; images must be at least %dx%d"
            % (path, img.width, img.height, MIN_ANALYSIS_SIZE, MIN_ANALYSIS_SIZE)
        )
    return img


def write_image(path, img):
    if str(path).lower().endswith(".pfm"):
        write_pfm(path, img)
    else:
        write_png(path, img)


def read_png(path):
    try:
        image = Image.open(path)
        image.load()
    except UnidentifiedImageError:
        raise InvalidImageError("%s is not a readable image file" % path)
    if image.mode == "1":
        image = image.convert("L")
    elif image.mode == "P":
        image = image.convert("RGB")
    if image.mode in ("L", "RGB"):
        return ImageBuffer(np.asarray(image, dtype=np.float64) / 255.0)
    if image.mode in ("I;16", "I;16B", "I"):
        return ImageBuffer(np.asarray(image, dtype=np.float64) / 65535.0)
    bands = len(image.getbands())
    if bands in (2, 4):
        raise InvalidImageError("unsupported channel count %d in %s" % (bands, path))
    raise InvalidImageError("unsupported image mode %s in %s" % (image.mode, path))


def write_png(path, img):
    data = np.clip(img.data, 0.0, 1.0)
    data = np.rint(data * 255.0).astype(np.uint8)
    if img.channels == 1:
        Image.fromarray(data[:, :, 0]).save(path)
    else:
        Image.fromarray(data).save(path)


def read_pfm(path):
    """
    Reads a Portable Float Map. Rows are stored bottom to top and the sign of
    the scale line gives the byte order (negative means little-endian).
    """
    with open(path, "rb") as fh:
        kind = fh.readline().strip()
        if kind == b"PF":
            channels = 3
        elif kind == b"Pf":
            channels = 1
        else:
            raise InvalidImageError("%s is not a PFM file" % path)
        try:
            width, height = [int(part) for part in fh.readline().split()]
            scale = float(fh.readline().strip())
        except ValueError:
            raise InvalidImageError("%s has a malformed PFM header" % path)
        dtype = "<f4" if scale < 0 else ">f4"
        data = np.frombuffer(fh.read(), dtype=dtype)
    expected = width * height * channels
    if data.size < expected:
        raise InvalidImageError(
            "%s is truncated: %d of %d samples" % (path, data.size, expected)
        )
    data = data[:expected].reshape(height, width, channels)[::-1]
    return ImageBuffer(data.astype(np.float64))


def write_pfm(path, img):
    """
    Writes 32-bit little-endian PFM; values are stored at single precision.
    """
    kind = b"PF" if img.channels == 3 else b"Pf"
    with open(path, "wb") as fh:
        fh.write(kind + b"\n")
        fh.write(b"%d %d\n" % (img.width, img.height))
        fh.write(b"-1.0\n")
        fh.write(np.ascontiguousarray(img.data[::-1], dtype="<f4").tobytes())
