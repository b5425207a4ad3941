import itertools
import logging
import math

import numpy as np

from .utils import ConfigSection

logger = logging.getLogger("structsplat.densify")


class SplitConfig(ConfigSection):
    name = "split"
    defaults = {"exponent": 0.5, "kappa": 1.0, "cap": 64}

    def validate(self):
        self.check_finite("exponent", "kappa")
        self.check(0 < self.exponent <= 1, "exponent", "in (0, 1]")
        self.check(self.kappa > 0, "kappa", "positive")
        self.check(self.cap >= 1, "cap", "at least 1")


def split_factor(eta_max, p=0.5, cap=64):
    """
    Children along one axis: ceil(eta_max ** p), at least 1 and at most cap.
    """
    if not eta_max >= 0:
        raise ValueError("eta_max must be >= 0, got %r" % eta_max)
    return int(min(cap, max(1, math.ceil(eta_max ** p))))


def clamp_counts(counts, cap):
    """
    Shrinks per-axis counts proportionally until their product fits cap.
    """
    counts = [max(1, int(n)) for n in counts]
    total = int(np.prod(counts))
    if total <= cap:
        return counts
    split_axes = [i for i, n in enumerate(counts) if n > 1]
    factor = (cap / total) ** (1.0 / len(split_axes))
    counts = [max(1, int(math.floor(n * factor))) if n > 1 else 1 for n in counts]
    while np.prod(counts) > cap:
        largest = counts.index(max(counts))
        counts[largest] -= 1
    return counts


class SplitPlan:
    """
    Per-axis child counts for one split, with the grid half-extent kappa in
    parent-sigma units.
    """

    def __init__(self, n, kappa=1.0, p=0.5, cap=64):
        requested = [int(value) for value in n]
        if any(value < 1 for value in requested):
            raise ValueError("Split counts must be at least 1, got %r" % (n,))
        self.n = clamp_counts(requested, cap)
        if self.n != requested:
            logger.debug("Clamped split %r to %r (cap %d)", requested, self.n, cap)
        self.kappa = float(kappa)
        self.p = float(p)
        self.cap = int(cap)

    @classmethod
    def from_votes(cls, eta_max, axes, cfg):
        """
        Plan for a split decision: eligible axes get split_factor(eta_max),
        the others stay whole.
        """
        counts = [
            split_factor(eta, cfg.exponent, cfg.cap) if eligible else 1
            for eta, eligible in zip(eta_max, axes)
        ]
        return cls(counts, cfg.kappa, cfg.exponent, cfg.cap)

    def floored(self, scale, min_scale):
        """
        The same plan with each axis count lowered so children keep at least
        min_scale along that axis. An axis already at or below min_scale is
        left whole; min_scale <= 0 leaves the plan unchanged.
        """
        if not min_scale > 0:
            return self
        counts = [
            max(1, min(n, int(math.floor(s / min_scale))))
            for n, s in zip(self.n, scale)
        ]
        return SplitPlan(counts, self.kappa, self.p, self.cap)

    @property
    def count(self):
        return int(np.prod(self.n))

    def __repr__(self):
        return "<SplitPlan n=%r kappa=%r>" % (tuple(self.n), self.kappa)


def grid_coordinates(n, kappa=1.0):
    """
    Centered grid in parent-sigma units, one row per child in (i, j, k)
    order.
    """
    axes = [kappa * (2.0 * (np.arange(count) + 0.5) / count - 1.0) for count in n]
    return np.array(list(itertools.product(*axes)), dtype=np.float64).reshape(
        -1, len(n)
    )


def split_geometry(mu, scale, rotation, n, kappa=1.0):
    """
    Child centers (count, d) and the shared child scale (d,) of a grid split.
    """
    mu = np.asarray(mu, dtype=np.float64)
    scale = np.asarray(scale, dtype=np.float64)
    offsets = grid_coordinates(n, kappa) * scale
    return mu + offsets @ np.asarray(rotation).T, scale / np.asarray(n, dtype=float)


def grid_split(parent, plan):
    """
    Replaces parent with plan.count children on a centered grid along its
    principal axes. Works for any primitive exposing mu, scale,
    rotation_matrix() and with_geometry().
    """
    if len(plan.n) != len(parent.scale):
        raise ValueError(
            "Plan has %d axes, primitive has %d" % (len(plan.n), len(parent.scale))
        )
    centers, scale = split_geometry(
        parent.mu, parent.scale, parent.rotation_matrix(), plan.n, plan.kappa
    )
    return [parent.with_geometry(center, scale) for center in centers]


def prune(population, decisions):
    """
    Drops the primitives whose decision is Prune, keeping survivor order.
    """
    if len(population) != len(decisions):
        raise ValueError(
            "Got %d decisions for %d primitives" % (len(decisions), len(population))
        )
    return [
        item
        for item, decision in zip(population, decisions)
        if not decision.is_prune
    ]
