"""
Accumulation of per-axis violation observations and the split/prune vote.

Counters live in ``ConsistencyTable`` as (N, K) arrays so a whole population
is updated at once; ``ConsistencyStats`` is the single-Gaussian view used by
the functional API.
"""
import numpy as np

from .utils import ConfigSection

SPLIT = "split"
PRUNE = "prune"
KEEP = "keep"


class Thresholds(ConfigSection):
    """
    Voting thresholds. With ``voting`` off every observation is decisive:
    a single high reading splits and a single low one (with low opacity)
    prunes.
    """

    name = "thresholds"
    defaults = {
        "tau_split": 0.8,
        "tau_prune": 0.8,
        "tau_alpha": 0.1,
        "eta_high": 1.0,
        "eta_low": 0.1,
        "min_obs": 3,
        "voting": True,
    }

    def validate(self):
        self.check_finite("tau_split", "tau_prune", "tau_alpha", "eta_high", "eta_low")
        self.check(self.tau_split >= 0, "tau_split", ">= 0")
        self.check(self.tau_prune >= 0, "tau_prune", ">= 0")
        self.check(self.tau_alpha >= 0, "tau_alpha", ">= 0")
        self.check(0 <= self.eta_low, "eta_low", ">= 0")
        self.check(self.eta_low < self.eta_high, "eta_high", "greater than eta_low")
        self.check(self.min_obs >= 0, "min_obs", ">= 0")

    def vote_parameters(self):
        """
        Returns the (tau_split, tau_prune, min_obs) actually used by decide.
        """
        if self.voting:
            return self.tau_split, self.tau_prune, self.min_obs
        return 0.0, 0.0, 1


class Decision:
    def __init__(self, kind, axes=None, eta_max=None):
        if kind not in (SPLIT, PRUNE, KEEP):
            raise ValueError("Unknown decision kind %r" % kind)
        self.kind = kind
        self.axes = None if axes is None else np.asarray(axes, dtype=bool)
        self.eta_max = None if eta_max is None else np.asarray(eta_max, dtype=float)

    @classmethod
    def keep(cls):
        return cls(KEEP)

    @classmethod
    def prune(cls):
        return cls(PRUNE)

    @property
    def is_split(self):
        return self.kind == SPLIT

    @property
    def is_prune(self):
        return self.kind == PRUNE

    def __eq__(self, other):
        if not isinstance(other, Decision) or self.kind != other.kind:
            return False
        if self.kind != SPLIT:
            return True
        return np.array_equal(self.axes, other.axes) and np.array_equal(
            self.eta_max, other.eta_max
        )

    def __repr__(self):
        if self.kind == SPLIT:
            return "<Decision split axes=%r eta_max=%r>" % (
                tuple(self.axes),
                tuple(self.eta_max),
            )
        return "<Decision %s>" % self.kind


def vote(n_high, n_low, n_total, opacity, th):
    """
    Vectorized decision rule over N rows. Returns (split_axes (N, K) bool,
    prune (N,) bool); a row is split when any axis is set.
    """
    tau_split, tau_prune, min_obs = th.vote_parameters()
    n_total = np.asarray(n_total, dtype=np.float64)
    opacity = np.asarray(opacity, dtype=np.float64)
    active = (n_total >= min_obs) & (n_total > 0)
    denominator = np.where(active, n_total, 1.0)[:, None]
    split_axes = active[:, None] & (n_high / denominator > tau_split)
    split = split_axes.any(axis=1)
    prune = (
        active
        & ~split
        & np.all(n_low / denominator > tau_prune, axis=1)
        & (opacity < th.tau_alpha)
    )
    return split_axes, prune


class ConsistencyStats:
    def __init__(self, axes=3, n_high=None, n_low=None, eta_max=None, n_total=0):
        self.n_high = np.zeros(axes, np.int64) if n_high is None else np.array(n_high)
        self.n_low = np.zeros(axes, np.int64) if n_low is None else np.array(n_low)
        self.eta_max = np.zeros(axes) if eta_max is None else np.array(eta_max, float)
        self.n_total = int(n_total)

    @property
    def axes(self):
        return len(self.n_high)

    def copy(self):
        return ConsistencyStats(
            self.axes, self.n_high, self.n_low, self.eta_max, self.n_total
        )

    def __eq__(self, other):
        return (
            isinstance(other, ConsistencyStats)
            and self.n_total == other.n_total
            and np.array_equal(self.n_high, other.n_high)
            and np.array_equal(self.n_low, other.n_low)
            and np.array_equal(self.eta_max, other.eta_max)
        )

    def __repr__(self):
        return "<ConsistencyStats total=%d high=%r low=%r eta_max=%r>" % (
            self.n_total,
            tuple(self.n_high),
            tuple(self.n_low),
            tuple(self.eta_max),
        )


def _eta(sample):
    eta = getattr(sample, "eta", sample)
    eta = np.asarray(eta, dtype=np.float64)
    if not np.all(np.isfinite(eta)):
        raise ValueError("Observation %r is not finite" % (eta,))
    return eta


def record_observation(stats, sample, th):
    eta = _eta(sample)
    if eta.shape != stats.n_high.shape:
        raise ValueError("Observation has %d axes, stats %d" % (eta.size, stats.axes))
    return ConsistencyStats(
        stats.axes,
        stats.n_high + (eta > th.eta_high),
        stats.n_low + (eta < th.eta_low),
        np.maximum(stats.eta_max, eta),
        stats.n_total + 1,
    )


def decide(stats, opacity, th):
    split_axes, prune = vote(
        stats.n_high[None], stats.n_low[None], [stats.n_total], [opacity], th
    )
    if split_axes[0].any():
        return Decision(SPLIT, split_axes[0], stats.eta_max.copy())
    if prune[0]:
        return Decision.prune()
    return Decision.keep()


def reset(stats):
    return ConsistencyStats(stats.axes)


def merge(a, b):
    """
    Combines stats gathered independently; equal to recording both
    observation streams into one.
    """
    if a.axes != b.axes:
        raise ValueError("Cannot merge stats with %d and %d axes" % (a.axes, b.axes))
    return ConsistencyStats(
        a.axes,
        a.n_high + b.n_high,
        a.n_low + b.n_low,
        np.maximum(a.eta_max, b.eta_max),
        a.n_total + b.n_total,
    )


class ConsistencyTable:
    """
    Consistency counters for a whole population, one row per Gaussian.
    """

    def __init__(self, size, axes=3):
        self.n_high = np.zeros((size, axes), np.int64)
        self.n_low = np.zeros((size, axes), np.int64)
        self.eta_max = np.zeros((size, axes))
        self.n_total = np.zeros(size, np.int64)

    def __len__(self):
        return len(self.n_total)

    @property
    def axes(self):
        return self.n_high.shape[1]

    def record(self, etas, th, rows=None):
        """
        Records one observation for each row in rows (all rows by default);
        etas is (len(rows), K). Rows may repeat.
        """
        etas = np.asarray(etas, dtype=np.float64)
        if not np.all(np.isfinite(etas)):
            raise ValueError("Observations must be finite")
        if rows is None:
            rows = np.arange(len(self))
        rows = np.asarray(rows, dtype=np.int64)
        np.add.at(self.n_high, rows, etas > th.eta_high)
        np.add.at(self.n_low, rows, etas < th.eta_low)
        np.maximum.at(self.eta_max, rows, etas)
        np.add.at(self.n_total, rows, 1)

    def decide(self, opacities, th):
        return vote(self.n_high, self.n_low, self.n_total, opacities, th)

    def decisions(self, opacities, th):
        split_axes, prune = self.decide(opacities, th)
        result = []
        for i in range(len(self)):
            if split_axes[i].any():
                result.append(Decision(SPLIT, split_axes[i], self.eta_max[i].copy()))
            elif prune[i]:
                result.append(Decision.prune())
            else:
                result.append(Decision.keep())
        return result

    def row(self, i):
        return ConsistencyStats(
            self.axes, self.n_high[i], self.n_low[i], self.eta_max[i], self.n_total[i]
        )

    def reset(self):
        self.n_high[:] = 0
        self.n_low[:] = 0
        self.eta_max[:] = 0.0
        self.n_total[:] = 0

    def select(self, keep, added=0):
        """
        Returns a table holding the kept rows in order followed by ``added``
        fresh rows.
        """
        table = ConsistencyTable(0, self.axes)
        table.n_high = np.concatenate(
            [self.n_high[keep], np.zeros((added, self.axes), np.int64)]
        )
        table.n_low = np.concatenate(
            [self.n_low[keep], np.zeros((added, self.axes), np.int64)]
        )
        table.eta_max = np.concatenate(
            [self.eta_max[keep], np.zeros((added, self.axes))]
        )
        table.n_total = np.concatenate([self.n_total[keep], np.zeros(added, np.int64)])
        return table

    def merge(self, other):
        if self.n_high.shape != other.n_high.shape:
            raise ValueError("Cannot merge tables of different shapes")
        table = ConsistencyTable(len(self), self.axes)
        table.n_high = self.n_high + other.n_high
        table.n_low = self.n_low + other.n_low
        table.eta_max = np.maximum(self.eta_max, other.eta_max)
        table.n_total = self.n_total + other.n_total
        return table

    def as_arrays(self, prefix="consistency_"):
        return {
            prefix + "n_high": self.n_high,
            prefix + "n_low": self.n_low,
            prefix + "eta_max": self.eta_max,
            prefix + "n_total": self.n_total,
        }

    @classmethod
    def from_arrays(cls, arrays, prefix="consistency_"):
        table = cls(0)
        table.n_high = np.array(arrays[prefix + "n_high"], dtype=np.int64)
        table.n_low = np.array(arrays[prefix + "n_low"], dtype=np.int64)
        table.eta_max = np.array(arrays[prefix + "eta_max"], dtype=np.float64)
        table.n_total = np.array(arrays[prefix + "n_total"], dtype=np.int64)
        return table
