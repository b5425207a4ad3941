import numpy as np
import pytest
from PIL import Image

from structsplat.exceptions import InvalidConfigError, InvalidImageError
from structsplat.imaging import (
    ImageBuffer,
    ScaleSpaceConfig,
    build_scale_space,
    gaussian_blur,
    gaussian_kernel,
    read_image,
    write_image,
)
from structsplat.testing import checkerboard, constant, reference_image


def total_variation(img):
    data = img.data
    return np.abs(np.diff(data, axis=0)).sum() + np.abs(np.diff(data, axis=1)).sum()


def test_buffer_shapes():
    """
    Grayscale data gains a channel axis and only 1 or 3 channels are valid.
    """
    img = ImageBuffer(np.zeros((9, 10)))
    assert img.shape == (9, 10, 1)
    assert (img.width, img.height, img.channels) == (10, 9, 1)
    assert img.as_rgb().channels == 3
    with pytest.raises(InvalidImageError):
        ImageBuffer(np.zeros((8, 8, 2)))
    with pytest.raises(InvalidImageError):
        ImageBuffer(np.zeros(8))


def test_kernel_normalized():
    """
    Kernel taps sum to one and reach out to ceil(3 sigma).
    """
    kernel = gaussian_kernel(2.0)
    assert len(kernel) == 13
    assert kernel.sum() == pytest.approx(1.0)
    assert kernel[6] == kernel.max()


def test_blur_constant():
    """
    Blurring a constant image leaves it constant.
    """
    blurred = gaussian_blur(constant(16, 0.3, channels=3), 2.5)
    np.testing.assert_allclose(blurred.data, 0.3, atol=1e-12)


def test_blur_zero_sigma_copies():
    """
    sigma = 0 returns an identical, independent copy.
    """
    img = reference_image(16)
    blurred = gaussian_blur(img, 0)
    np.testing.assert_array_equal(blurred.data, img.data)
    assert blurred.data is not img.data


def test_blur_impulse():
    """
    A centered impulse blurred with sigma 2 peaks near 1 / (2 pi sigma^2).
    """
    data = np.zeros((33, 33))
    data[16, 16] = 1.0
    blurred = gaussian_blur(ImageBuffer(data), 2.0)
    assert blurred.data[16, 16, 0] == pytest.approx(1.0 / (8.0 * np.pi), rel=0.02)
    assert blurred.data.sum() == pytest.approx(1.0)


def test_blur_bad_sigma():
    with pytest.raises(InvalidImageError):
        gaussian_blur(constant(8), float("nan"))
    with pytest.raises(InvalidImageError):
        gaussian_blur(constant(8), -1.0)


def test_blur_reduces_variation():
    """
    Blurring never increases total variation.
    """
    img = checkerboard(16, 4)
    assert total_variation(gaussian_blur(img, 1.0)) <= total_variation(img)


@pytest.mark.parametrize("sigma", [0.5, 1.0, 2.5, 5.0])
def test_blur_linearity(sigma):
    rng = np.random.default_rng(int(10 * sigma))
    a = rng.random((40, 48, 3))
    b = rng.random((40, 48, 3))
    alpha, beta = 0.7, -1.9
    combined = gaussian_blur(ImageBuffer(alpha * a + beta * b), sigma).data
    separate = alpha * gaussian_blur(ImageBuffer(a), sigma).data
    separate += beta * gaussian_blur(ImageBuffer(b), sigma).data
    np.testing.assert_allclose(combined, separate, rtol=0, atol=1e-6)


@pytest.mark.parametrize("sigma", [0.8, 2.0, 4.5])
def test_blur_rotation_symmetry(sigma):
    """
    Blurring commutes with quarter turns, borders included.
    """
    img = reference_image(40, seed=3).data[:, :30]
    for turns in (1, 2, 3):
        rotated = np.rot90(img, turns, axes=(0, 1)).copy()
        np.testing.assert_allclose(
            gaussian_blur(ImageBuffer(rotated), sigma).data,
            np.rot90(gaussian_blur(ImageBuffer(img), sigma).data, turns, axes=(0, 1)),
            rtol=0,
            atol=1e-12,
        )


@pytest.mark.parametrize("sigma_a, sigma_b", [(1.0, 1.0), (1.5, 2.0), (2.0, 3.0)])
def test_blur_cascade(sigma_a, sigma_b):
    """
    Two successive blurs match one blur at the combined sigma away from the
    borders.
    """
    img = reference_image(96, seed=1)
    combined = np.hypot(sigma_a, sigma_b)
    direct = gaussian_blur(img, combined).data
    cascade = gaussian_blur(gaussian_blur(img, sigma_a), sigma_b).data
    margin = int(np.ceil(3.0 * combined))
    inner = (slice(margin, -margin), slice(margin, -margin))
    assert np.abs(direct[inner] - cascade[inner]).mean() < 1e-3


def test_scale_space_levels():
    """
    Levels follow sigma_l = base ** l and each is blurred from the original.
    """
    cfg = ScaleSpaceConfig()
    ss = build_scale_space(reference_image(32), cfg)
    assert len(ss) == 5
    assert ss.sigmas == pytest.approx([1.0, 1.5, 2.25, 3.375, 5.0625])
    np.testing.assert_allclose(
        ss.levels[3].data, gaussian_blur(ss.original, 3.375).data
    )


def test_scale_space_rejects_small_images():
    with pytest.raises(InvalidImageError):
        build_scale_space(constant(7))
    data = np.zeros((8, 8))
    data[3, 3] = np.inf
    with pytest.raises(InvalidImageError):
        build_scale_space(ImageBuffer(data))


def test_scale_space_config_validation():
    """
    Invalid values and unknown keys are rejected.
    """
    with pytest.raises(InvalidConfigError):
        ScaleSpaceConfig(levels=0)
    with pytest.raises(InvalidConfigError):
        ScaleSpaceConfig(base=1.0)
    with pytest.raises(InvalidConfigError):
        ScaleSpaceConfig(colour=3)
    assert ScaleSpaceConfig(gamma="2.5").gamma == 2.5


def test_pfm_round_trip(tmp_path):
    """
    PFM stores single-precision floats exactly, bottom row first.
    """
    rng = np.random.default_rng(3)
    data = rng.normal(size=(9, 12, 3)).astype(np.float32).astype(np.float64)
    path = str(tmp_path / "image.pfm")
    write_image(path, ImageBuffer(data))
    np.testing.assert_array_equal(read_image(path).data, data)
    with open(path, "rb") as fh:
        assert fh.readline() == b"PF\n"
        assert fh.readline() == b"12 9\n"
        assert float(fh.readline()) < 0
        first = np.frombuffer(fh.read(12), dtype="<f4")
    np.testing.assert_array_equal(first, data[-1, 0].astype(np.float32))


def test_pfm_rounds_to_single_precision(tmp_path):
    path = str(tmp_path / "third.pfm")
    write_image(path, ImageBuffer(np.full((2, 3), 1.0 / 3.0)))
    back = read_image(path).data
    assert back.dtype == np.float64
    np.testing.assert_array_equal(back, np.float32(1.0 / 3.0))
    assert back[0, 0, 0] != 1.0 / 3.0
    assert back[0, 0, 0] == pytest.approx(1.0 / 3.0, rel=1e-7)


def test_png_round_trip(tmp_path):
    """
    8-bit PNG round trips within quantization and clamps out-of-range values.
    """
    img = reference_image(16)
    path = str(tmp_path / "image.png")
    write_image(path, img)
    np.testing.assert_allclose(read_image(path).data, img.data, atol=0.5 / 255 + 1e-9)
    write_image(path, ImageBuffer(np.full((8, 8), 2.0)))
    np.testing.assert_array_equal(read_image(path).data, 1.0)


def test_png_channel_handling(tmp_path):
    """
    Palette images decode to RGB; alpha channels are refused.
    """
    path = str(tmp_path / "palette.png")
    Image.new("P", (8, 8), color=3).save(path)
    assert read_image(path).channels == 3
    path = str(tmp_path / "rgba.png")
    Image.new("RGBA", (8, 8)).save(path)
    with pytest.raises(InvalidImageError, match="unsupported channel count"):
        read_image(path)


def test_read_errors(tmp_path):
    """
    Garbage, truncated and undersized files raise InvalidImageError.
    """
    path = tmp_path / "junk.png"
    path.write_bytes(b"not an image")
    with pytest.raises(InvalidImageError):
        read_image(str(path))
    path = tmp_path / "short.pfm"
    path.write_bytes(b"Pf\n8 8\n-1.0\n" + b"\0" * 16)
    with pytest.raises(InvalidImageError, match="truncated"):
        read_image(str(path))
    path = str(tmp_path / "tiny.png")
    write_image(path, ImageBuffer(np.zeros((4, 4))))
    with pytest.raises(InvalidImageError):
        read_image(path)
    with pytest.raises(FileNotFoundError):
        read_image(str(tmp_path / "missing.png"))
