"""
Additive renderer for 2D anisotropic Gaussians and its analytic gradients.

A pixel (x, y) is sampled at its integer center. Each Gaussian contributes
alpha * color * exp(-d / 2) where d is the squared Mahalanobis distance
under R(theta) diag(s^2) R(theta)^T, and contributions beyond ``truncate``
standard deviations are dropped.
"""
import logging

import numpy as np
from scipy.special import expit, logit

from .exceptions import DimensionMismatch
from .imaging import ImageBuffer

logger = logging.getLogger("structsplat.render")

#: Opacities are clipped into this range before taking the logit.
OPACITY_RANGE = (1e-6, 1.0 - 1e-6)

PARAMETERS = ("mu", "log_scale", "theta", "color", "logit_opacity")


def rotation_2d(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


class Gaussian2D:
    def __init__(
        self, mu, scale, theta=0.0, color=(1.0, 1.0, 1.0), opacity=1.0, id=None
    ):
        self.mu = np.asarray(mu, dtype=np.float64).reshape(2)
        self.scale = np.asarray(scale, dtype=np.float64).reshape(2)
        self.theta = float(theta)
        self.color = np.asarray(color, dtype=np.float64).reshape(3)
        self.opacity = float(opacity)
        self.id = id
        if not np.all(self.scale > 0):
            raise ValueError("Gaussian scales must be positive, got %r" % (self.scale,))
        if not 0.0 < self.opacity <= 1.0:
            raise ValueError("Opacity must be in (0, 1], got %r" % self.opacity)

    def rotation_matrix(self):
        return rotation_2d(self.theta)

    def with_geometry(self, mu, scale, id=None):
        return Gaussian2D(mu, scale, self.theta, self.color, self.opacity, id=id)

    def __repr__(self):
        return "<Gaussian2D id=%r mu=%r scale=%r>" % (
            self.id,
            tuple(self.mu),
            tuple(self.scale),
        )


class Population2D:
    """
    Structure-of-arrays storage for the trainable 2D population.

    Scales are stored as logs and opacities as logits so every parameter is
    unconstrained; ``ids`` are unique and handed out in creation order.
    """

    def __init__(
        self, mu, log_scale, theta, color, logit_opacity, ids=None, next_id=None
    ):
        self.mu = np.array(mu, dtype=np.float64).reshape(-1, 2)
        self.log_scale = np.array(log_scale, dtype=np.float64).reshape(-1, 2)
        self.theta = np.array(theta, dtype=np.float64).reshape(-1)
        self.color = np.array(color, dtype=np.float64).reshape(-1, 3)
        self.logit_opacity = np.array(logit_opacity, dtype=np.float64).reshape(-1)
        size = len(self.mu)
        for name in PARAMETERS:
            if len(getattr(self, name)) != size:
                raise ValueError("Parameter %s has the wrong length" % name)
        self.ids = (
            np.arange(size, dtype=np.int64)
            if ids is None
            else np.array(ids, dtype=np.int64).reshape(-1)
        )
        if len(self.ids) != size:
            raise ValueError("Need one id per Gaussian")
        self.next_id = int(
            next_id if next_id is not None else (self.ids.max() + 1 if size else 0)
        )

    @classmethod
    def empty(cls):
        return cls(np.zeros((0, 2)), np.zeros((0, 2)), [], np.zeros((0, 3)), [])

    @classmethod
    def from_gaussians(cls, gaussians):
        if not gaussians:
            return cls.empty()
        ids = [g.id for g in gaussians]
        if any(i is None for i in ids):
            ids = None
        return cls(
            [g.mu for g in gaussians],
            [np.log(g.scale) for g in gaussians],
            [g.theta for g in gaussians],
            [g.color for g in gaussians],
            logit(np.clip([g.opacity for g in gaussians], *OPACITY_RANGE)),
            ids=ids,
        )

    def __len__(self):
        return len(self.mu)

    @property
    def scale(self):
        return np.exp(self.log_scale)

    @property
    def opacity(self):
        return expit(self.logit_opacity)

    def params(self):
        return {name: getattr(self, name) for name in PARAMETERS}

    def is_finite(self):
        return all(np.all(np.isfinite(value)) for value in self.params().values())

    def axes(self):
        """
        Screen axes (N, 2, 2): row 0 is s_x (cos, sin), row 1 s_y (-sin, cos).
        """
        c, s = np.cos(self.theta), np.sin(self.theta)
        scale = self.scale
        return np.stack(
            [
                np.stack([scale[:, 0] * c, scale[:, 0] * s], axis=1),
                np.stack([-scale[:, 1] * s, scale[:, 1] * c], axis=1),
            ],
            axis=1,
        )

    def gaussians(self):
        opacity = self.opacity
        return [
            Gaussian2D(
                self.mu[i],
                np.exp(self.log_scale[i]),
                self.theta[i],
                self.color[i],
                opacity[i],
                id=int(self.ids[i]),
            )
            for i in range(len(self))
        ]

    def copy(self):
        return Population2D(
            self.mu,
            self.log_scale,
            self.theta,
            self.color,
            self.logit_opacity,
            self.ids,
            self.next_id,
        )

    def take(self, index):
        """
        Subset (or reordering) of the population; ids travel with rows.
        """
        return Population2D(
            self.mu[index],
            self.log_scale[index],
            self.theta[index],
            self.color[index],
            self.logit_opacity[index],
            self.ids[index],
            self.next_id,
        )

    def extend(self, mu, log_scale, theta, color, logit_opacity):
        """
        Appends rows, giving them fresh ids.
        """
        count = len(np.asarray(mu).reshape(-1, 2))
        return Population2D(
            np.concatenate([self.mu, np.reshape(mu, (-1, 2))]),
            np.concatenate([self.log_scale, np.reshape(log_scale, (-1, 2))]),
            np.concatenate([self.theta, np.reshape(theta, -1)]),
            np.concatenate([self.color, np.reshape(color, (-1, 3))]),
            np.concatenate([self.logit_opacity, np.reshape(logit_opacity, -1)]),
            np.concatenate(
                [
                    self.ids,
                    np.arange(self.next_id, self.next_id + count, dtype=np.int64),
                ]
            ),
            self.next_id + count,
        )

    def as_arrays(self):
        arrays = dict(self.params())
        arrays["ids"] = self.ids
        arrays["next_id"] = np.array(self.next_id)
        return arrays

    @classmethod
    def from_arrays(cls, arrays):
        return cls(
            *(arrays[name] for name in PARAMETERS),
            ids=arrays["ids"],
            next_id=int(arrays["next_id"]),
        )


def as_population(pop):
    if isinstance(pop, Population2D):
        return pop
    return Population2D.from_gaussians(list(pop))


class Footprints:
    """
    Flattened (Gaussian, pixel) pairs inside each truncation ellipse.
    """

    def __init__(self, gaussian, pixel, l1, l2, value):
        self.gaussian = gaussian
        self.pixel = pixel
        self.l1 = l1
        self.l2 = l2
        self.value = value


def footprints(pop, width, height, truncate=3.0):
    """
    Enumerates covered pixels per Gaussian.

    Each Gaussian's square window [rint(mu) - r, rint(mu) + r] is cut down to
    at most the canvas size and shifted inside the canvas so it still holds
    the part of the window that overlaps the canvas. A large Gaussian
    centered off-canvas thus keeps the pixels it covers. Windows are batched
    by size so each batch is one vectorized pass.
    """
    empty = np.zeros(0, dtype=np.int64)
    if len(pop) == 0:
        return Footprints(empty, empty, np.zeros(0), np.zeros(0), np.zeros(0))
    scale = pop.scale
    radius = np.ceil(truncate * scale.max(axis=1) + 0.5)
    center = np.rint(pop.mu)
    low = center - radius[:, None]
    high = center + radius[:, None]
    limits = np.array([width - 1, height - 1], dtype=np.float64)
    reaches = np.all((high >= 0) & (low <= limits), axis=1)
    length = np.minimum(2.0 * radius[:, None] + 1.0, limits + 1.0)
    start = np.clip(low, 0.0, limits + 1.0 - length)
    length = np.where(reaches[:, None], length, 1.0).astype(np.int64)
    start = np.where(reaches[:, None], start, 0.0).astype(np.int64)
    cos, sin = np.cos(pop.theta), np.sin(pop.theta)
    limit = truncate * truncate
    parts = []
    shapes = np.unique(length[reaches], axis=0)
    for size_x, size_y in shapes:
        index = np.nonzero(
            reaches & (length[:, 0] == size_x) & (length[:, 1] == size_y)
        )[0]
        mx = pop.mu[index, 0][:, None, None]
        my = pop.mu[index, 1][:, None, None]
        px = start[index, 0][:, None, None] + np.arange(size_x)[None, None, :]
        py = start[index, 1][:, None, None] + np.arange(size_y)[None, :, None]
        px, py = np.broadcast_arrays(px, py)
        dx, dy = px - mx, py - my
        c, s = cos[index][:, None, None], sin[index][:, None, None]
        l1 = c * dx + s * dy
        l2 = -s * dx + c * dy
        d = (l1 / scale[index, 0][:, None, None]) ** 2 + (
            l2 / scale[index, 1][:, None, None]
        ) ** 2
        keep = d <= limit
        owner = np.broadcast_to(index[:, None, None], keep.shape)
        parts.append(
            (owner[keep], (py * width + px)[keep], l1[keep], l2[keep], d[keep])
        )
    if not parts:
        return Footprints(empty, empty, np.zeros(0), np.zeros(0), np.zeros(0))
    gaussian, pixel, l1, l2, d = (np.concatenate(column) for column in zip(*parts))
    return Footprints(gaussian, pixel, l1, l2, np.exp(-0.5 * d))


def _composite(pop, fp, size):
    weight = pop.opacity[fp.gaussian] * fp.value
    image = np.empty((size, 3))
    for channel in range(3):
        image[:, channel] = np.bincount(
            fp.pixel,
            weights=weight * pop.color[fp.gaussian, channel],
            minlength=size,
        )
    return image


def render2d(pop, width, height, truncate=3.0):
    pop = as_population(pop)
    fp = footprints(pop, width, height, truncate)
    image = _composite(pop, fp, width * height)
    return ImageBuffer(image.reshape(height, width, 3))


class RenderResult:
    def __init__(self, image, loss, grads, positional_grad_norm):
        self.image = image
        self.loss = loss
        self.grads = grads
        self.positional_grad_norm = positional_grad_norm


def image_loss(image, target, w1, w2):
    residual = image - target
    return w1 * np.abs(residual).mean() + w2 * (residual ** 2).mean()


def render_gradients(pop, target, w1, w2, truncate=3.0):
    """
    Renders pop against target and returns the loss
    w1 * mean|C - T| + w2 * mean (C - T)^2 with its gradients for every
    parameter group. The l1 subgradient is 0 where C == T.
    """
    pop = as_population(pop)
    if target.channels != 3:
        target = target.as_rgb()
    height, width = target.height, target.width
    size = width * height
    fp = footprints(pop, width, height, truncate)
    image = _composite(pop, fp, size)
    flat_target = target.data.reshape(size, 3)
    residual = image - flat_target
    loss = float(image_loss(image, flat_target, w1, w2))
    dl_dc = (w1 * np.sign(residual) + 2.0 * w2 * residual) / residual.size

    n = len(pop)
    g = fp.gaussian
    alpha = pop.opacity
    scale = pop.scale
    upstream = dl_dc[fp.pixel]
    alpha_e = alpha[g]
    u = (upstream * pop.color[g]).sum(axis=1)

    grad_color = np.empty((n, 3))
    for channel in range(3):
        grad_color[:, channel] = np.bincount(
            g, weights=upstream[:, channel] * alpha_e * fp.value, minlength=n
        )
    grad_alpha = np.bincount(g, weights=u * fp.value, minlength=n)
    grad_logit = grad_alpha * alpha * (1.0 - alpha)

    # dL/dd for each footprint sample
    h = -0.5 * alpha_e * u * fp.value
    inv1 = 1.0 / scale[g, 0] ** 2
    inv2 = 1.0 / scale[g, 1] ** 2
    dd_dl1 = 2.0 * fp.l1 * inv1
    dd_dl2 = 2.0 * fp.l2 * inv2
    cos, sin = np.cos(pop.theta[g]), np.sin(pop.theta[g])
    grad_mu = np.empty((n, 2))
    grad_mu[:, 0] = -np.bincount(
        g, weights=h * (dd_dl1 * cos - dd_dl2 * sin), minlength=n
    )
    grad_mu[:, 1] = -np.bincount(
        g, weights=h * (dd_dl1 * sin + dd_dl2 * cos), minlength=n
    )
    grad_log_scale = np.empty((n, 2))
    grad_log_scale[:, 0] = np.bincount(
        g, weights=h * (-2.0 * fp.l1 ** 2 * inv1), minlength=n
    )
    grad_log_scale[:, 1] = np.bincount(
        g, weights=h * (-2.0 * fp.l2 ** 2 * inv2), minlength=n
    )
    grad_theta = np.bincount(
        g, weights=h * 2.0 * fp.l1 * fp.l2 * (inv1 - inv2), minlength=n
    )

    grads = {
        "mu": grad_mu,
        "log_scale": grad_log_scale,
        "theta": grad_theta,
        "color": grad_color,
        "logit_opacity": grad_logit,
    }
    return RenderResult(
        ImageBuffer(image.reshape(height, width, 3)),
        loss,
        grads,
        np.linalg.norm(grad_mu, axis=1),
    )


def psnr(image, target):
    """
    Peak signal-to-noise ratio in dB of the [0, 1]-clipped image.
    """
    if image.shape != target.shape:
        raise DimensionMismatch(
            "Cannot compare images of shape %s and %s" % (image.shape, target.shape)
        )
    mse = float(np.mean((np.clip(image.data, 0.0, 1.0) - target.data) ** 2))
    if mse == 0:
        return float("inf")
    return 10.0 * np.log10(1.0 / mse)
