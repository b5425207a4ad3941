import logging

import numpy as np

from .exceptions import BehindCamera, MalformedSceneError
from .utils import write_csv

logger = logging.getLogger("structsplat.projection")

#: Half-extent multiplier of the visibility rectangle around the image.
VISIBILITY_MARGIN = 1.2

FOOTPRINT_HEADER = [
    "gaussian_id",
    "camera_id",
    "mu_x",
    "mu_y",
    "depth",
    "vx_u",
    "vx_v",
    "vy_u",
    "vy_v",
    "vz_u",
    "vz_v",
    "visible",
]


def normalize_quaternion(q):
    q = np.asarray(q, dtype=np.float64)
    norm = np.linalg.norm(q)
    if not norm > 0 or not np.isfinite(norm):
        raise ValueError("Quaternion %r cannot be normalized" % (q,))
    return q / norm


def quaternion_to_matrix(q):
    """
    Rotation matrix of the (w, x, y, z) quaternion q.
    """
    w, x, y, z = normalize_quaternion(q)
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def quaternion_multiply(a, b):
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


def quaternion_conjugate(q):
    w, x, y, z = q
    return np.array([w, -x, -y, -z])


class Gaussian3D:
    """
    A 3D Gaussian primitive with anisotropic scale and quaternion rotation.
    """

    def __init__(
        self, mu, scale, rotation=(1.0, 0.0, 0.0, 0.0), opacity=1.0, color=None, id=None
    ):
        self.mu = np.asarray(mu, dtype=np.float64).reshape(3)
        self.scale = np.asarray(scale, dtype=np.float64).reshape(3)
        self.rotation = normalize_quaternion(rotation)
        self.opacity = float(opacity)
        self.color = np.asarray(
            (0.5, 0.5, 0.5) if color is None else color, dtype=np.float64
        ).reshape(3)
        self.id = id
        if not np.all(self.scale > 0):
            raise ValueError("Gaussian scales must be positive, got %r" % (self.scale,))
        if not 0.0 <= self.opacity <= 1.0:
            raise ValueError("Opacity must be in [0, 1], got %r" % self.opacity)

    def rotation_matrix(self):
        return quaternion_to_matrix(self.rotation)

    def with_geometry(self, mu, scale, id=None):
        return Gaussian3D(mu, scale, self.rotation, self.opacity, self.color, id=id)

    def rotated(self, q):
        """
        The same Gaussian after a rigid rotation q about the world origin.
        """
        R = quaternion_to_matrix(q)
        return Gaussian3D(
            R @ self.mu,
            self.scale,
            quaternion_multiply(normalize_quaternion(q), self.rotation),
            self.opacity,
            self.color,
            id=self.id,
        )

    def __repr__(self):
        return "<Gaussian3D id=%r mu=%r scale=%r>" % (
            self.id,
            tuple(self.mu),
            tuple(self.scale),
        )


class Camera:
    """
    Pinhole camera with a world-to-camera rigid transform p_cam = R p + t.
    """

    def __init__(
        self, rotation, translation, fx, fy, cx, cy, width, height, near=0.01, id=0
    ):
        self.rotation = np.asarray(rotation, dtype=np.float64).reshape(3, 3)
        self.translation = np.asarray(translation, dtype=np.float64).reshape(3)
        self.fx, self.fy = float(fx), float(fy)
        self.cx, self.cy = float(cx), float(cy)
        self.width, self.height = int(width), int(height)
        self.near = float(near)
        self.id = id
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("Focal lengths must be positive")
        if not np.allclose(self.rotation @ self.rotation.T, np.eye(3), atol=1e-9):
            raise ValueError("Camera rotation is not orthonormal")

    @classmethod
    def from_quaternion(cls, q, translation, *args, **kwargs):
        return cls(quaternion_to_matrix(q), translation, *args, **kwargs)

    def to_camera(self, p):
        return self.rotation @ np.asarray(p, dtype=np.float64) + self.translation

    def rotated(self, q):
        """
        The camera that sees a world rotated by q exactly as this one sees
        the original world.
        """
        return Camera(
            self.rotation @ quaternion_to_matrix(q).T,
            self.translation,
            self.fx,
            self.fy,
            self.cx,
            self.cy,
            self.width,
            self.height,
            self.near,
            self.id,
        )


class ProjectedGaussian:
    """
    Screen-space center and the three projected axis vectors (rows of
    ``axes``) of a Gaussian in one view.
    """

    def __init__(self, mu2d, axes, depth, gaussian_id=None):
        self.mu2d = np.asarray(mu2d, dtype=np.float64).reshape(2)
        self.axes = np.asarray(axes, dtype=np.float64).reshape(-1, 2)
        self.depth = float(depth)
        self.gaussian_id = gaussian_id

    def axis_norms(self):
        return np.linalg.norm(self.axes, axis=1)

    def scaled(self, factor):
        return ProjectedGaussian(
            self.mu2d, self.axes * factor, self.depth, self.gaussian_id
        )


def project_point(p_cam, cam):
    x, y, z = p_cam
    return np.array([cam.fx * x / z + cam.cx, cam.fy * y / z + cam.cy])


def projection_jacobian(p_cam, cam):
    x, y, z = np.asarray(p_cam, dtype=np.float64)
    if not z > cam.near:
        raise BehindCamera("Point depth %r is not beyond the near plane" % z)
    return np.array(
        [
            [cam.fx / z, 0.0, -cam.fx * x / (z * z)],
            [0.0, cam.fy / z, -cam.fy * y / (z * z)],
        ]
    )


def project_gaussian(g, cam):
    """
    Projects the center and scaled principal axes of g into cam.
    Returns None when the center is at or behind the near plane.
    """
    p_cam = cam.to_camera(g.mu)
    if not p_cam[2] > cam.near:
        return None
    J = projection_jacobian(p_cam, cam)
    axes = (J @ cam.rotation @ g.rotation_matrix() @ np.diag(g.scale)).T
    return ProjectedGaussian(project_point(p_cam, cam), axes, p_cam[2], g.id)


def in_view(pg, cam, margin=VISIBILITY_MARGIN):
    """
    Whether pg's center lies inside the image rectangle expanded by margin
    about its center.
    """
    slack_x = 0.5 * (margin - 1.0) * cam.width
    slack_y = 0.5 * (margin - 1.0) * cam.height
    x, y = pg.mu2d
    return bool(
        -slack_x <= x <= cam.width + slack_x and -slack_y <= y <= cam.height + slack_y
    )


# Text formats


def _scene_lines(path):
    with open(path) as fh:
        for number, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if line:
                yield number, line.split()


def _floats(path, number, fields):
    try:
        return [float(field) for field in fields]
    except ValueError:
        raise MalformedSceneError("%s:%d: expected numbers" % (path, number))


def read_gaussians(path):
    """
    Reads lines of ``id mx my mz sx sy sz qw qx qy qz opacity r g b``.
    """
    gaussians = []
    for number, fields in _scene_lines(path):
        if len(fields) != 15:
            raise MalformedSceneError(
                "%s:%d: expected 15 fields, got %d" % (path, number, len(fields))
            )
        values = _floats(path, number, fields[1:])
        try:
            gaussians.append(
                Gaussian3D(
                    values[0:3],
                    values[3:6],
                    values[6:10],
                    values[10],
                    values[11:14],
                    id=int(fields[0]),
                )
            )
        except ValueError as exc:
            raise MalformedSceneError("%s:%d: %s" % (path, number, exc))
    return gaussians


def read_cameras(path):
    """
    Reads lines of ``id fx fy cx cy width height qw qx qy qz tx ty tz [near]``
    where the quaternion and translation give the world-to-camera transform.
    """
    cameras = []
    for number, fields in _scene_lines(path):
        if len(fields) not in (14, 15):
            raise MalformedSceneError(
                "%s:%d: expected 14 or 15 fields, got %d" % (path, number, len(fields))
            )
        values = _floats(path, number, fields[1:])
        near = values[13] if len(values) == 14 else 0.01
        try:
            cameras.append(
                Camera.from_quaternion(
                    values[6:10],
                    values[10:13],
                    values[0],
                    values[1],
                    values[2],
                    values[3],
                    int(values[4]),
                    int(values[5]),
                    near=near,
                    id=int(fields[0]),
                )
            )
        except ValueError as exc:
            raise MalformedSceneError("%s:%d: %s" % (path, number, exc))
    return cameras


def footprint_rows(gaussians, cameras):
    for cam in cameras:
        for g in gaussians:
            pg = project_gaussian(g, cam)
            if pg is None:
                logger.debug("Gaussian %s is behind camera %s", g.id, cam.id)
                continue
            yield [g.id, cam.id, pg.mu2d[0], pg.mu2d[1], pg.depth] + list(
                pg.axes.reshape(-1)
            ) + [in_view(pg, cam)]


def write_footprints_csv(path, gaussians, cameras):
    rows = list(footprint_rows(gaussians, cameras))
    write_csv(path, FOOTPRINT_HEADER, rows)
    return len(rows)
