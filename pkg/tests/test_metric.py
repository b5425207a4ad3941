import numpy as np
import pytest

from structsplat.exceptions import InvalidConfigError
from structsplat.metric import (
    EtaSample,
    MetricConfig,
    eta,
    eta_proj,
    footprint_points,
    sample_footprint,
    sample_tensor_field,
    violation_batch,
)
from structsplat.projection import ProjectedGaussian
from structsplat.structure import TensorField


def footprint(axes, mu=(32.0, 32.0)):
    return ProjectedGaussian(mu, axes, depth=1.0, gaussian_id=0)


def test_constant_field():
    """
    A constant field samples to itself whatever the seed or sample count.
    """
    field = TensorField.constant(64, 64, 0.5, -0.1, 0.25)
    pg = footprint([[6.0, 1.0], [-1.0, 3.0], [0.5, 0.5]])
    for samples, seed in ((1, 0), (16, 5), (64, 123)):
        np.testing.assert_allclose(
            sample_footprint(pg, field, samples, seed),
            [[0.5, -0.1], [-0.1, 0.25]],
            atol=1e-12,
        )


def test_sampling_is_seeded():
    rng = np.random.default_rng(0)
    field = TensorField(*(rng.random((64, 64)) for _ in range(3)))
    pg = footprint([[5.0, 0.0], [0.0, 5.0], [0.0, 0.0]])
    first = sample_footprint(pg, field, 1, rng_seed=9)
    np.testing.assert_array_equal(first, sample_footprint(pg, field, 1, rng_seed=9))
    assert not np.array_equal(first, sample_footprint(pg, field, 1, rng_seed=10))


def test_sample_count_validation():
    field = TensorField.zeros(16, 16)
    with pytest.raises(ValueError):
        sample_footprint(footprint([[1.0, 0.0]]), field, 0)


def test_half_field_matches_dense_integral():
    """
    Monte Carlo footprint mean agrees with an area-weighted integral over a
    0.1 pixel grid when the footprint straddles a tensor discontinuity.
    """
    sxx = np.zeros((64, 64))
    sxx[:, 32:] = 1.0
    field = TensorField(sxx, np.zeros((64, 64)), sxx * 0.5)
    mu = np.array([34.5, 32.0])
    pg = footprint([[8.0, 0.0], [0.0, 8.0], [0.0, 0.0]], mu)
    estimate = sample_footprint(pg, field, 4096, rng_seed=1)

    offsets = np.arange(-8.0, 8.0 + 1e-9, 0.1)
    gx, gy = np.meshgrid(offsets, offsets)
    inside = gx**2 + gy**2 <= 64.0
    points = np.stack([gx[inside] + mu[0], gy[inside] + mu[1]], axis=-1)
    oracle = sample_tensor_field(field, points).mean(axis=0)

    assert estimate[0, 0] == pytest.approx(oracle[0], rel=0.05)
    assert estimate[1, 1] == pytest.approx(oracle[2], rel=0.05)
    assert estimate[0, 1] == 0.0


def test_footprint_points_inside_ellipse():
    rng = np.random.default_rng(3)
    mu = np.array([[10.0, 20.0]])
    axes = np.array([[[6.0, 0.0], [0.0, 2.0], [0.0, 0.0]]])
    points = footprint_points(mu, axes, rng.random((1, 500, 2)))[0]
    d = ((points[:, 0] - 10.0) / 6.0) ** 2 + ((points[:, 1] - 20.0) / 2.0) ** 2
    assert np.all(d <= 1.0 + 1e-9)
    assert points[:, 0].std() > points[:, 1].std()


def test_degenerate_footprint_reads_center():
    mu = np.array([[10.0, 20.0], [5.0, 5.0]])
    axes = np.array(
        [
            [[0.1, 0.0], [0.0, 0.2], [0.0, 0.0]],
            [[3.0, 0.0], [0.0, 0.2], [0.0, 0.0]],
        ]
    )
    points = footprint_points(mu, axes, np.full((2, 4, 2), 0.7))
    np.testing.assert_array_equal(points[0], np.tile([10.0, 20.0], (4, 1)))
    assert not np.allclose(points[1], [5.0, 5.0])


def test_sampling_clamps_to_image():
    sxx = np.tile(np.arange(8.0), (8, 1))
    field = TensorField(sxx, np.zeros((8, 8)), np.zeros((8, 8)))
    values = sample_tensor_field(field, [[-5.0, 3.0], [20.0, 3.0], [2.5, 3.0]])
    np.testing.assert_allclose(values[:, 0], [0.0, 7.0, 2.5])


def test_eta_arithmetic():
    """
    A 10 pixel axis over a 5 pixel minimum wavelength is violated twice over.
    """
    pg = footprint([[10.0, 0.0], [0.0, 2.5], [0.0, 0.0]])
    values = eta(pg, np.diag([0.04, 0.0]))
    np.testing.assert_allclose(values, [2.0, 0.5, 0.0], rtol=1e-6)
    np.testing.assert_allclose(eta(pg.scaled(3.0), np.diag([0.04, 0.0])), 3 * values)


def test_eta_zero_tensor():
    pg = footprint([[40.0, 0.0], [0.0, 40.0], [0.0, 0.0]])
    assert np.all(eta(pg, np.zeros((2, 2))) < 1e-6)


def test_eta_proj_quadratic_form():
    omega = 0.3
    tensor = np.diag([omega**2, 0.0])
    pg = footprint([[7.0, 0.0], [0.0, 9.0], [3.0, 4.0]])
    np.testing.assert_allclose(eta_proj(pg, tensor), [7 * omega, 0.0, 3 * omega])


def test_eta_proj_orders_axes_by_texture():
    tensor = np.array([[0.5, 0.3], [0.3, 0.2]])
    values, vectors = np.linalg.eigh(tensor)
    pg = footprint([vectors[:, 1] * 4.0, vectors[:, 0] * 4.0, [0.0, 0.0]])
    along, across, _ = eta_proj(pg, tensor)
    assert across <= along


def test_isotropic_agreement():
    """
    Both metrics agree for isotropic tensors.
    """
    rng = np.random.default_rng(11)
    for _ in range(20):
        lam = rng.uniform(0.01, 2.0)
        pg = footprint(rng.normal(scale=5.0, size=(3, 2)))
        np.testing.assert_allclose(
            eta(pg, np.eye(2) * lam), eta_proj(pg, np.eye(2) * lam), rtol=1e-6
        )


def test_eta_contrast_invariance():
    """
    Scaling a tensor by c^2 scales eta by c; after normalization the factor
    cancels, so decisions only depend on the normalized tensor.
    """
    pg = footprint([[4.0, 1.0], [1.0, 2.0], [0.0, 0.5]])
    tensor = np.array([[0.3, 0.1], [0.1, 0.2]])
    np.testing.assert_allclose(eta(pg, 4.0 * tensor), 2.0 * eta(pg, tensor), rtol=1e-6)


def test_violation_batch_kinds():
    axes = np.array([[[3.0, 0.0], [0.0, 3.0], [0.0, 0.0]]])
    components = np.array([[0.25, 0.0, 0.0]])
    np.testing.assert_allclose(
        violation_batch("eta", axes, components), [[1.5, 1.5, 0.0]], rtol=1e-6
    )
    np.testing.assert_allclose(
        violation_batch("proj", axes, components), [[1.5, 0.0, 0.0]]
    )


def test_eta_sample_validation():
    assert EtaSample([0.0, 1.0, 2.0], view_id=3).view_id == 3
    with pytest.raises(ValueError):
        EtaSample([0.0, -1.0, 2.0])
    with pytest.raises(ValueError):
        EtaSample([0.0, np.nan, 2.0])


def test_metric_config():
    assert MetricConfig().kind == "eta"
    assert MetricConfig(kind="proj", samples="8").samples == 8
    with pytest.raises(InvalidConfigError):
        MetricConfig(kind="other")
    with pytest.raises(InvalidConfigError):
        MetricConfig(samples=0)
