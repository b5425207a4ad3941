"""
Sensitivity of the aggregated tensor field to photometric perturbations.
"""
import logging

import numpy as np
from scipy.fft import dctn, idctn

from .exceptions import DimensionMismatch
from .imaging import ImageBuffer, ScaleSpaceConfig, blur_array
from .structure import analyze_image
from .utils import write_csv
from .worker import BatchRunner

logger = logging.getLogger("structsplat.robustness")

KINDS = ("contrast", "noise", "sharpen", "jpeg_like")

#: Baseline JPEG luminance quantization table (ITU-T T.81, Annex K).
JPEG_LUMINANCE_TABLE = np.array(
    [
        [16, 11, 10, 16, 24, 40, 51, 61],
        [12, 12, 14, 19, 26, 58, 60, 55],
        [14, 13, 16, 24, 40, 57, 69, 56],
        [14, 17, 22, 29, 51, 87, 80, 62],
        [18, 22, 37, 56, 68, 109, 103, 77],
        [24, 35, 55, 64, 81, 104, 113, 92],
        [49, 64, 78, 87, 103, 121, 120, 101],
        [72, 92, 95, 98, 112, 100, 103, 99],
    ],
    dtype=np.float64,
)

BLOCK = 8

#: Pixels whose reference tensor norm is at most this carry no signal.
MASK_FLOOR = 1e-6

SUITE_HEADER = ["perturbation", "parameter", "change"]


class Perturbation:
    def __init__(self, kind, value):
        if kind not in KINDS:
            raise ValueError("Unknown perturbation %r" % kind)
        value = float(value)
        if not np.isfinite(value):
            raise ValueError("Perturbation parameter must be finite")
        if kind == "contrast" and not value > 0:
            raise ValueError("Contrast factor must be positive, got %r" % value)
        if kind in ("noise", "sharpen") and value < 0:
            raise ValueError("%s parameter must be >= 0, got %r" % (kind, value))
        if kind == "jpeg_like" and not 1 <= value <= 100:
            raise ValueError("JPEG quality must be in [1, 100], got %r" % value)
        self.kind = kind
        self.value = value

    @classmethod
    def contrast(cls, factor):
        return cls("contrast", factor)

    @classmethod
    def noise(cls, std):
        return cls("noise", std)

    @classmethod
    def sharpen(cls, amount):
        return cls("sharpen", amount)

    @classmethod
    def jpeg_like(cls, quality):
        return cls("jpeg_like", quality)

    def __eq__(self, other):
        return (
            isinstance(other, Perturbation)
            and (self.kind, self.value) == (other.kind, other.value)
        )

    def __repr__(self):
        return "<Perturbation %s %g>" % (self.kind, self.value)


#: The fixed battery run by robustness_suite.
BATTERY = [
    Perturbation.contrast(0.5),
    Perturbation.contrast(1.5),
    Perturbation.noise(1.0 / 255.0),
    Perturbation.sharpen(1.5),
    Perturbation.sharpen(3.0),
    Perturbation.jpeg_like(80),
]


def quality_table(quality):
    """
    Luminance table scaled for a quality in [1, 100] the way the IJG
    encoder does it.
    """
    quality = int(round(quality))
    scale = 5000.0 / quality if quality < 50 else 200.0 - 2.0 * quality
    table = np.floor((JPEG_LUMINANCE_TABLE * scale + 50.0) / 100.0)
    return np.clip(table, 1.0, 255.0)


def jpeg_like(data, quality):
    """
    Quantizes each channel's 8x8 block DCT and reconstructs it.
    """
    table = quality_table(quality)
    height, width, channels = data.shape
    padded = np.pad(
        data * 255.0 - 128.0,
        ((0, -height % BLOCK), (0, -width % BLOCK), (0, 0)),
        mode="edge",
    )
    rows, columns = padded.shape[0] // BLOCK, padded.shape[1] // BLOCK
    blocks = padded.reshape(rows, BLOCK, columns, BLOCK, channels)
    coefficients = dctn(blocks, axes=(1, 3), norm="ortho")
    step = table[None, :, None, :, None]
    coefficients = np.round(coefficients / step) * step
    restored = idctn(coefficients, axes=(1, 3), norm="ortho")
    restored = restored.reshape(rows * BLOCK, columns * BLOCK, channels)
    return (restored[:height, :width] + 128.0) / 255.0


def perturb(img, p, seed=0):
    data = img.data
    if p.kind == "contrast":
        return ImageBuffer(data * p.value)
    if p.kind == "noise":
        if p.value == 0:
            return img.copy()
        rng = np.random.default_rng(seed)
        return ImageBuffer(data + rng.normal(0.0, p.value, size=data.shape))
    if p.kind == "sharpen":
        if p.value == 0:
            return img.copy()
        return ImageBuffer(data + p.value * (data - blur_array(data, 1.0)))
    return ImageBuffer(jpeg_like(data, p.value))


def tensor_change(a, b, eps=1e-12):
    """
    Mean relative Frobenius difference of b from a over pixels where a has
    signal. Returns 0 when no pixel qualifies.
    """
    if a.shape != b.shape:
        raise DimensionMismatch(
            "Cannot compare tensor fields of shape %s and %s" % (a.shape, b.shape)
        )
    norm = a.frobenius()
    mask = norm > MASK_FLOOR
    if not mask.any():
        return 0.0
    difference = np.sqrt(
        (a.sxx - b.sxx) ** 2 + 2.0 * (a.sxy - b.sxy) ** 2 + (a.syy - b.syy) ** 2
    )
    return float(np.mean(difference[mask] / (norm[mask] + eps)))


def measure(img, reference, p, cfg, seed):
    return tensor_change(reference, analyze_image(perturb(img, p, seed), cfg))


def robustness_suite(img, cfg=None, seed=0, runner=None, battery=None):
    """
    Runs each perturbation of the battery and returns rows of
    (kind, parameter, change) in battery order.
    """
    cfg = cfg or ScaleSpaceConfig()
    runner = runner or BatchRunner()
    battery = BATTERY if battery is None else battery
    reference = analyze_image(img, cfg)
    changes = runner.run(
        [(measure, (img, reference, p, cfg, seed)) for p in battery]
    )
    rows = []
    for p, change in zip(battery, changes):
        logger.info("%s %g: mean relative change %.4f", p.kind, p.value, change)
        rows.append((p.kind, p.value, change))
    return rows


def write_suite_csv(path, rows):
    write_csv(path, SUITE_HEADER, rows)
