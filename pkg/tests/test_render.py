import numpy as np
import pytest

from structsplat.exceptions import DimensionMismatch
from structsplat.imaging import ImageBuffer
from structsplat.render import (
    PARAMETERS,
    Gaussian2D,
    Population2D,
    psnr,
    render2d,
    render_gradients,
)
from structsplat.testing import known_population


def fixture_population(seed, count=5, size=24):
    rng = np.random.default_rng(seed)
    return Population2D(
        rng.uniform(6.0, size - 6.0, size=(count, 2)),
        np.log(rng.uniform(1.2, 3.0, size=(count, 2))),
        rng.uniform(-np.pi, np.pi, size=count),
        rng.uniform(0.1, 0.9, size=(count, 3)),
        rng.normal(0.0, 1.0, size=count),
    )


def numeric_gradients(pop, target, w1, w2, truncate, step=1e-4):
    grads = {}
    for name in PARAMETERS:
        values = getattr(pop, name)
        grad = np.zeros_like(values)
        for index in np.ndindex(values.shape):
            losses = []
            for sign in (1.0, -1.0):
                shifted = pop.copy()
                getattr(shifted, name)[index] += sign * step
                losses.append(render_gradients(shifted, target, w1, w2, truncate).loss)
            grad[index] = (losses[0] - losses[1]) / (2.0 * step)
        grads[name] = grad
    return grads


def assert_gradients_match(pop, target, w1, w2, truncate=8.0):
    analytic = render_gradients(pop, target, w1, w2, truncate).grads
    numeric = numeric_gradients(pop, target, w1, w2, truncate)
    for name in PARAMETERS:
        scale = np.abs(numeric[name]).max()
        np.testing.assert_allclose(
            analytic[name],
            numeric[name],
            rtol=1e-3,
            atol=1e-6 * scale + 1e-12,
            err_msg=name,
        )


def test_empty_population():
    image = render2d([], 8, 6)
    assert image.shape == (6, 8, 3)
    assert not image.data.any()


def test_center_value():
    """
    An isotropic Gaussian centered on a pixel contributes alpha * color
    there.
    """
    g = Gaussian2D((5.0, 4.0), (1.5, 1.5), color=(0.2, 0.4, 0.6), opacity=0.5)
    image = render2d([g], 10, 10)
    np.testing.assert_allclose(image.data[4, 5], [0.1, 0.2, 0.3], rtol=1e-12)
    assert image.data[4, 6, 0] < image.data[4, 5, 0]


def test_truncation():
    g = Gaussian2D((16.0, 16.0), (1.0, 1.0), color=(1.0, 1.0, 1.0))
    image = render2d([g], 32, 32, truncate=3.0)
    assert image.data[16, 19, 0] > 0
    assert image.data[16, 20, 0] == 0


def test_disjoint_additivity():
    a = Gaussian2D((8.0, 8.0), (1.5, 1.0), 0.3, (0.9, 0.1, 0.2), 0.8)
    b = Gaussian2D((30.0, 20.0), (1.0, 2.0), -0.7, (0.1, 0.6, 0.9), 0.6)
    both = render2d([a, b], 40, 32).data
    separate = render2d([a], 40, 32).data + render2d([b], 40, 32).data
    np.testing.assert_allclose(both, separate, atol=1e-6)


def test_overlapping_additivity():
    gaussians = known_population()
    total = sum(render2d([g], 64, 64).data for g in gaussians)
    np.testing.assert_allclose(render2d(gaussians, 64, 64).data, total, atol=1e-12)


def test_off_canvas_gaussian():
    g = Gaussian2D((-40.0, 10.0), (2.0, 2.0))
    assert not render2d([g], 16, 16).data.any()


def test_large_gaussian_centered_off_canvas():
    """
    A wide Gaussian whose center lies far left of the canvas still covers
    every pixel inside its truncation ellipse, and its gradients see them.
    """
    g = Gaussian2D((-300.0, 32.0), (200.0, 200.0), opacity=0.5)
    image = render2d([g], 64, 64).data[:, :, 0]
    y, x = np.mgrid[0:64, 0:64]
    expected = 0.5 * np.exp(-0.5 * ((x + 300.0) ** 2 + (y - 32.0) ** 2) / 200.0 ** 2)
    assert image[32, 0] == pytest.approx(0.5 * np.exp(-0.5 * 1.5 ** 2))
    np.testing.assert_allclose(image, expected, rtol=1e-9)
    result = render_gradients([g], ImageBuffer(np.zeros((64, 64, 3))), 0.0, 1.0)
    # moving right brightens the canvas and raises the loss
    assert result.grads["mu"][0, 0] > 0


@pytest.mark.parametrize("seed", range(12))
def test_gradients_l2(seed):
    """
    Analytic gradients of the squared error match central differences.
    """
    pop = fixture_population(seed)
    rng = np.random.default_rng(100 + seed)
    target = ImageBuffer(rng.random((24, 24, 3)))
    assert_gradients_match(pop, target, 0.0, 1.0)


@pytest.mark.parametrize("seed", range(12, 20))
def test_gradients_mixed_loss(seed):
    """
    With every residual away from zero the l1 term is smooth and its
    gradients match central differences too.
    """
    pop = fixture_population(seed)
    rng = np.random.default_rng(200 + seed)
    image = render2d(pop, 24, 24, truncate=8.0).data
    offset = 0.3 * rng.choice([-1.0, 1.0], size=image.shape)
    target = ImageBuffer(image + offset)
    assert_gradients_match(pop, target, 0.8, 0.2)


def test_gradients_vanish_at_target():
    pop = fixture_population(9)
    target = render2d(pop, 24, 24)
    result = render_gradients(pop, target, 0.8, 0.2)
    assert result.loss == 0.0
    for name in PARAMETERS:
        assert not result.grads[name].any()
    assert not result.positional_grad_norm.any()


def test_gradient_pulls_toward_target():
    """
    A target shifted +2 pixels in x gives a negative x gradient.
    """
    source = [Gaussian2D((14.0, 16.0), (3.0, 3.0), color=(0.8, 0.8, 0.8))]
    shifted = Gaussian2D((16.0, 16.0), (3.0, 3.0), color=(0.8, 0.8, 0.8))
    target = render2d([shifted], 32, 32)
    result = render_gradients(source, target, 0.8, 0.2)
    assert result.grads["mu"][0, 0] < 0
    assert abs(result.grads["mu"][0, 1]) < 1e-12
    norm = abs(result.grads["mu"][0, 0])
    assert result.positional_grad_norm[0] == pytest.approx(norm)


def test_grayscale_target_is_expanded():
    pop = fixture_population(1)
    gray = ImageBuffer(np.full((24, 24), 0.5))
    rgb = ImageBuffer(np.full((24, 24, 3), 0.5))
    assert render_gradients(pop, gray, 0.8, 0.2).loss == render_gradients(
        pop, rgb, 0.8, 0.2
    ).loss


def test_psnr():
    target = ImageBuffer(np.full((4, 4, 3), 0.5))
    assert psnr(target.copy(), target) == float("inf")
    assert psnr(ImageBuffer(np.full((4, 4, 3), 0.6)), target) == pytest.approx(20.0)
    # Values above 1 are clipped before comparison
    bright = ImageBuffer(np.full((4, 4, 3), 3.0))
    assert psnr(bright, ImageBuffer(np.ones((4, 4, 3)))) == float("inf")
    with pytest.raises(DimensionMismatch):
        psnr(ImageBuffer(np.zeros((4, 4, 3))), ImageBuffer(np.zeros((4, 5, 3))))


def test_population_ids():
    """
    Rows keep their ids through take and extend hands out fresh ones.
    """
    pop = Population2D.from_gaussians(known_population())
    assert list(pop.ids) == [0, 1, 2]
    subset = pop.take(np.array([2, 0]))
    assert list(subset.ids) == [2, 0]
    grown = subset.extend([[1.0, 1.0]], [[0.0, 0.0]], [0.0], [[1.0, 1.0, 1.0]], [0.0])
    assert list(grown.ids) == [2, 0, 3]
    assert grown.next_id == 4
    restored = Population2D.from_arrays(grown.as_arrays())
    np.testing.assert_array_equal(restored.mu, grown.mu)
    assert list(restored.ids) == [2, 0, 3]
    assert restored.next_id == 4


def test_population_round_trip():
    gaussians = known_population()
    pop = Population2D.from_gaussians(gaussians)
    for before, after in zip(gaussians, pop.gaussians()):
        np.testing.assert_allclose(after.mu, before.mu)
        np.testing.assert_allclose(after.scale, before.scale)
        assert after.opacity == pytest.approx(before.opacity)
        assert after.id == before.id


def test_population_axes():
    log_scale = [np.log([2.0, 1.0])]
    pop = Population2D([[0.0, 0.0]], log_scale, [np.pi / 2], [[1, 1, 1]], [0])
    np.testing.assert_allclose(pop.axes()[0], [[0.0, 2.0], [-1.0, 0.0]], atol=1e-12)
    with pytest.raises(ValueError):
        Population2D([[0.0, 0.0]], [[0.0, 0.0]], [0.0, 1.0], [[1, 1, 1]], [0])


def test_gaussian_validation():
    with pytest.raises(ValueError):
        Gaussian2D((0, 0), (1.0, -1.0))
    with pytest.raises(ValueError):
        Gaussian2D((0, 0), (1.0, 1.0), opacity=0.0)
