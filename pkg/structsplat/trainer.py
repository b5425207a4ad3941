import logging
import math
import os
import time

import numpy as np
from scipy.special import logit

from .consistency import ConsistencyTable, Thresholds
from .densify import SplitConfig, SplitPlan, split_geometry
from .exceptions import DimensionMismatch, InvalidConfigError, TrainingDiverged
from .imaging import ScaleSpaceConfig
from .metric import (
    MetricConfig,
    footprint_points,
    sample_tensor_field,
    violation_batch,
)
from .render import (
    OPACITY_RANGE,
    PARAMETERS,
    Population2D,
    psnr,
    render2d,
    render_gradients,
    rotation_2d,
)
from .structure import analyze_image
from .utils import ConfigSection, keyed_uniforms, read_csv, write_csv

logger = logging.getLogger("structsplat.trainer")

MODES = ("structure", "baseline")

#: View id of the single training image in the sampling RNG key.
TRAINING_VIEW = 0

#: Scale divisor and offset (in major-axis sigmas) of a baseline split.
BASELINE_SHRINK = 1.6
BASELINE_OFFSET = 0.5

CHECKPOINT_VERSION = 1

TRAIN_HEADER = ["iteration", "loss", "psnr", "gaussians", "splits", "prunes"]
TIMING_HEADER = ["iteration", "wall_time"]
SPLIT_HEADER = [
    "parent_id",
    "n_x",
    "n_y",
    "n_z",
    "eta_max_x",
    "eta_max_y",
    "eta_max_z",
    "iteration",
    "x",
    "y",
]
SPLIT_INT_COLUMNS = ("parent_id", "n_x", "n_y", "n_z", "iteration")


class TrainerConfig(ConfigSection):
    name = "trainer"
    defaults = {
        "iterations": 3000,
        "densify_interval": 500,
        "densify_until": 0,
        "mode": "structure",
        "l1_weight": 0.8,
        "l2_weight": 0.2,
        "position_lr_init": 0.1,
        "position_lr_final": 0.001,
        "position_lr_max_steps": 0,
        "scale_lr": 0.01,
        "rotation_lr": 0.01,
        "color_lr": 0.01,
        "opacity_lr": 0.02,
        "baseline_grad_threshold": 0.00005,
        "min_split_scale": 1.0,
        "init_grid": 16,
        "truncate": 3.0,
        "samples": 1,
    }

    def validate(self):
        self.check(self.iterations >= 1, "iterations", "at least 1")
        self.check(
            1 <= self.densify_interval <= self.iterations,
            "densify_interval",
            "between 1 and iterations",
        )
        self.check(self.densify_until >= 0, "densify_until", ">= 0")
        self.check(self.mode in MODES, "mode", "one of %s" % (MODES,))
        self.check_finite(
            "l1_weight",
            "l2_weight",
            "position_lr_init",
            "position_lr_final",
            "scale_lr",
            "rotation_lr",
            "color_lr",
            "opacity_lr",
            "baseline_grad_threshold",
            "min_split_scale",
            "truncate",
        )
        self.check(self.l1_weight >= 0, "l1_weight", ">= 0")
        self.check(self.l2_weight >= 0, "l2_weight", ">= 0")
        if not self.l1_weight + self.l2_weight > 0:
            raise InvalidConfigError(
                "trainer.l1_weight + trainer.l2_weight must be > 0"
            )
        self.check(self.position_lr_init > 0, "position_lr_init", "positive")
        self.check(self.position_lr_final > 0, "position_lr_final", "positive")
        self.check(self.position_lr_max_steps >= 0, "position_lr_max_steps", ">= 0")
        self.check(self.init_grid >= 1, "init_grid", "at least 1")
        self.check(self.min_split_scale >= 0, "min_split_scale", ">= 0")
        self.check(self.truncate > 0, "truncate", "positive")
        self.check(self.samples >= 1, "samples", "at least 1")

    @property
    def lr_horizon(self):
        return self.position_lr_max_steps or self.iterations

    @property
    def densify_end(self):
        return self.densify_until or self.iterations

    def densifies_at(self, iteration):
        return (
            iteration % self.densify_interval == 0
            and iteration < self.densify_end
            and iteration < self.iterations
        )


def exponential_lr(step, lr_init, lr_final, max_steps):
    """
    Log-linear interpolation from lr_init to lr_final over max_steps, held at
    lr_final afterwards.
    """
    t = step / float(max_steps)
    if t >= 1.0:
        return lr_final
    t = max(t, 0.0)
    return math.exp((1.0 - t) * math.log(lr_init) + t * math.log(lr_final))


class Adam:
    """
    Adaptive moment optimizer over a dict of parameter arrays, updated in
    place. Moments follow rows through ``reindex`` when the population is
    rebuilt.
    """

    def __init__(self, names, betas=(0.9, 0.999), eps=1e-8):
        self.names = tuple(names)
        self.betas = betas
        self.eps = eps
        self.steps = 0
        self.m = {}
        self.v = {}

    def step(self, params, grads, learning_rates):
        self.steps += 1
        beta1, beta2 = self.betas
        correction1 = 1.0 - beta1 ** self.steps
        correction2 = 1.0 - beta2 ** self.steps
        for name in self.names:
            grad = grads[name]
            if name not in self.m:
                self.m[name] = np.zeros_like(grad)
                self.v[name] = np.zeros_like(grad)
            m, v = self.m[name], self.v[name]
            m *= beta1
            m += (1.0 - beta1) * grad
            v *= beta2
            v += (1.0 - beta2) * grad * grad
            params[name] -= (
                learning_rates[name]
                * (m / correction1)
                / (np.sqrt(v / correction2) + self.eps)
            )

    def reindex(self, keep, added):
        """
        Keeps the moment rows in ``keep`` and appends ``added`` zero rows.
        """
        for state in (self.m, self.v):
            for name, value in state.items():
                fresh = np.zeros((added,) + value.shape[1:])
                state[name] = np.concatenate([value[keep], fresh])

    def as_arrays(self):
        arrays = {"adam_steps": np.array(self.steps)}
        for name in self.m:
            arrays["adam_m_" + name] = self.m[name]
            arrays["adam_v_" + name] = self.v[name]
        return arrays

    def load_arrays(self, arrays):
        self.steps = int(arrays.get("adam_steps", 0))
        for name in self.names:
            if "adam_m_" + name in arrays:
                self.m[name] = np.array(arrays["adam_m_" + name])
                self.v[name] = np.array(arrays["adam_v_" + name])


class TrainReport:
    """
    Per-iteration training log plus the split events. Equality ignores wall
    time so two runs with the same seed compare equal.
    """

    def __init__(self):
        self.rows = []
        self.wall_times = []
        self.split_events = []

    def add(self, iteration, wall_time, loss, psnr, gaussians, splits, prunes):
        if self.rows and iteration <= self.rows[-1][0]:
            raise ValueError(
                "Report rows must increase: %d after %d" % (iteration, self.rows[-1][0])
            )
        self.rows.append((iteration, loss, psnr, gaussians, splits, prunes))
        self.wall_times.append((iteration, wall_time))

    def __len__(self):
        return len(self.rows)

    def __eq__(self, other):
        return (
            isinstance(other, TrainReport)
            and self.rows == other.rows
            and self.split_events == other.split_events
        )

    def column(self, name):
        index = TRAIN_HEADER.index(name)
        return [row[index] for row in self.rows]

    @property
    def final_psnr(self):
        return self.rows[-1][2] if self.rows else None

    @property
    def final_count(self):
        return self.rows[-1][3] if self.rows else 0

    def write(self, directory):
        os.makedirs(directory, exist_ok=True)
        write_csv(os.path.join(directory, "train.csv"), TRAIN_HEADER, self.rows)
        write_csv(os.path.join(directory, "timing.csv"), TIMING_HEADER, self.wall_times)
        write_csv(
            os.path.join(directory, "splits.csv"), SPLIT_HEADER, self.split_events
        )

    @classmethod
    def read(cls, directory):
        report = cls()
        header, rows = read_csv(os.path.join(directory, "train.csv"))
        if header != TRAIN_HEADER:
            raise ValueError("Unexpected train.csv columns %r" % (header,))
        timing = {}
        timing_path = os.path.join(directory, "timing.csv")
        if os.path.exists(timing_path):
            for iteration, wall_time in read_csv(timing_path)[1]:
                timing[int(iteration)] = float(wall_time)
        for row in rows:
            iteration = int(row[0])
            report.add(
                iteration,
                timing.get(iteration, float("nan")),
                float(row[1]),
                float(row[2]),
                int(row[3]),
                int(row[4]),
                int(row[5]),
            )
        splits_path = os.path.join(directory, "splits.csv")
        if os.path.exists(splits_path):
            for row in read_csv(splits_path)[1]:
                report.split_events.append(
                    tuple(
                        int(value) if name in SPLIT_INT_COLUMNS else float(value)
                        for name, value in zip(SPLIT_HEADER, row)
                    )
                )
        return report


def block_means(target, grid):
    """
    Mean color of each cell of a grid x grid partition, as (grid, grid, 3).
    """
    height, width = target.height, target.width
    ys = np.linspace(0, height, grid + 1).round().astype(int)
    xs = np.linspace(0, width, grid + 1).round().astype(int)
    means = np.zeros((grid, grid, 3))
    for j in range(grid):
        for i in range(grid):
            rows = slice(ys[j], max(ys[j + 1], ys[j] + 1))
            columns = slice(xs[i], max(xs[i + 1], xs[i] + 1))
            cell = target.data[rows, columns]
            means[j, i] = cell.reshape(-1, 3).mean(axis=0)
    return means


def init_population(target, grid):
    """
    grid x grid isotropic Gaussians, one per cell, sized so the additive
    render of a flat region reproduces its color.
    """
    cell_x = target.width / float(grid)
    cell_y = target.height / float(grid)
    sigma = 0.5 * min(cell_x, cell_y)
    alpha = min(0.99, cell_x * cell_y / (2.0 * math.pi * sigma * sigma))
    jj, ii = np.meshgrid(np.arange(grid), np.arange(grid), indexing="ij")
    mu = np.stack(
        [-0.5 + (ii.ravel() + 0.5) * cell_x, -0.5 + (jj.ravel() + 0.5) * cell_y], axis=1
    )
    count = grid * grid
    return Population2D(
        mu,
        np.full((count, 2), math.log(sigma)),
        np.zeros(count),
        block_means(target, grid).reshape(-1, 3),
        np.full(count, logit(np.clip(alpha, *OPACITY_RANGE))),
    )


def visible_rows(pop, width, height, margin=1.2):
    slack_x = 0.5 * (margin - 1.0) * width
    slack_y = 0.5 * (margin - 1.0) * height
    x, y = pop.mu[:, 0], pop.mu[:, 1]
    inside = (x >= -slack_x) & (x <= width + slack_x)
    inside &= (y >= -slack_y) & (y <= height + slack_y)
    return np.nonzero(inside)[0]


def ndc_gradient_norm(grad_mu, width, height):
    """
    Positional gradient norm in normalized device units.
    """
    return np.hypot(grad_mu[:, 0] * 0.5 * width, grad_mu[:, 1] * 0.5 * height)


def baseline_densify(pop, positional_grad_norms, threshold):
    """
    Splits every Gaussian whose mean positional gradient norm exceeds
    threshold into two children placed half a sigma either side of its
    center along the major axis, with both scales shrunk by 1.6.
    Survivors keep their order and children are appended.
    """
    mask = np.asarray(positional_grad_norms) > threshold
    if not mask.any():
        return pop.copy()
    index = np.nonzero(mask)[0]
    axes = pop.axes()[index]
    major = np.argmax(pop.scale[index], axis=1)
    offset = BASELINE_OFFSET * axes[np.arange(len(index)), major]
    mu = np.stack([pop.mu[index] + offset, pop.mu[index] - offset], axis=1)
    return pop.take(np.nonzero(~mask)[0]).extend(
        mu.reshape(-1, 2),
        np.repeat(pop.log_scale[index] - math.log(BASELINE_SHRINK), 2, axis=0),
        np.repeat(pop.theta[index], 2),
        np.repeat(pop.color[index], 2, axis=0),
        np.repeat(pop.logit_opacity[index], 2),
    )


class Trainer:
    """
    Fits a 2D Gaussian population to one target image, densifying either by
    structure-aware voting or by the positional-gradient baseline.
    """

    def __init__(
        self,
        target,
        cfg=None,
        seed=0,
        scale_space=None,
        thresholds=None,
        split=None,
        metric=None,
        field=None,
        output_dir=None,
    ):
        self.cfg = cfg or TrainerConfig()
        self.target = target.as_rgb()
        self.seed = int(seed)
        self.thresholds = thresholds or Thresholds()
        self.split = split or SplitConfig()
        self.metric = metric or MetricConfig()
        self.output_dir = output_dir
        self.width, self.height = self.target.width, self.target.height
        if self.cfg.mode == "structure":
            if field is None:
                field = analyze_image(target, scale_space or ScaleSpaceConfig())
            self.field = field
            if self.field.shape != (self.height, self.width):
                raise DimensionMismatch(
                    "Tensor field %s does not match target %s"
                    % (self.field.shape, (self.height, self.width))
                )
        else:
            self.field = None
        self.population = init_population(self.target, self.cfg.init_grid)
        self.optimizer = Adam(PARAMETERS)
        self.table = ConsistencyTable(len(self.population), axes=2)
        self.grad_sum = np.zeros(len(self.population))
        self.grad_count = np.zeros(len(self.population), dtype=np.int64)
        self.report = TrainReport()
        self.iteration = 0

    def learning_rates(self, iteration):
        cfg = self.cfg
        return {
            "mu": exponential_lr(
                iteration, cfg.position_lr_init, cfg.position_lr_final, cfg.lr_horizon
            ),
            "log_scale": cfg.scale_lr,
            "theta": cfg.rotation_lr,
            "color": cfg.color_lr,
            "logit_opacity": cfg.opacity_lr,
        }

    def observe(self, iteration):
        """
        Draws footprint samples of the tensor field for every visible
        Gaussian and records their violation vectors.
        """
        pop = self.population
        rows = visible_rows(pop, self.width, self.height)
        if not len(rows):
            return
        uniforms = keyed_uniforms(
            pop.ids[rows], (self.cfg.samples, 2), self.seed, TRAINING_VIEW, iteration
        )
        axes = pop.axes()[rows]
        points = footprint_points(pop.mu[rows], axes, uniforms)
        components = sample_tensor_field(self.field, points).mean(axis=1)
        etas = violation_batch(self.metric.kind, axes, components, self.metric.epsilon)
        self.table.record(etas, self.thresholds, rows=rows)

    def accumulate_gradients(self, result):
        rows = visible_rows(self.population, self.width, self.height)
        norms = ndc_gradient_norm(result.grads["mu"], self.width, self.height)
        self.grad_sum[rows] += norms[rows]
        self.grad_count[rows] += 1

    def rebuild(self, population, keep, added):
        self.population = population
        self.optimizer.reindex(keep, added)
        self.table = ConsistencyTable(len(population), axes=2)
        self.grad_sum = np.zeros(len(population))
        self.grad_count = np.zeros(len(population), dtype=np.int64)

    def densify_structure(self, iteration):
        pop = self.population
        split_axes, prune = self.table.decide(pop.opacity, self.thresholds)
        remove = prune.copy()
        children = {name: [] for name in PARAMETERS}
        splits = 0
        for i in np.nonzero(split_axes.any(axis=1))[0]:
            eta_max = self.table.eta_max[i]
            plan = SplitPlan.from_votes(eta_max, split_axes[i], self.split).floored(
                pop.scale[i], self.cfg.min_split_scale
            )
            if plan.count == 1:
                continue
            centers, scale = split_geometry(
                pop.mu[i], pop.scale[i], rotation_2d(pop.theta[i]), plan.n, plan.kappa
            )
            count = len(centers)
            children["mu"].append(centers)
            children["log_scale"].append(np.tile(np.log(scale), (count, 1)))
            children["theta"].append(np.full(count, pop.theta[i]))
            children["color"].append(np.tile(pop.color[i], (count, 1)))
            children["logit_opacity"].append(np.full(count, pop.logit_opacity[i]))
            remove[i] = True
            splits += 1
            self.report.split_events.append(
                (
                    int(pop.ids[i]),
                    plan.n[0],
                    plan.n[1],
                    1,
                    eta_max[0],
                    eta_max[1],
                    0.0,
                    iteration,
                    pop.mu[i, 0],
                    pop.mu[i, 1],
                )
            )
        keep = np.nonzero(~remove)[0]
        added = sum(len(c) for c in children["mu"])
        population = pop.take(keep)
        if added:
            population = population.extend(
                *(np.concatenate(children[name]) for name in PARAMETERS)
            )
        self.rebuild(population, keep, added)
        return splits, int(prune.sum())

    def densify_baseline(self, iteration):
        pop = self.population
        norms = self.grad_sum / np.maximum(self.grad_count, 1)
        mask = norms > self.cfg.baseline_grad_threshold
        population = baseline_densify(pop, norms, self.cfg.baseline_grad_threshold)
        for i in np.nonzero(mask)[0]:
            self.report.split_events.append(
                (int(pop.ids[i]), 2, 1, 1, 0.0, 0.0, 0.0, iteration)
                + tuple(pop.mu[i])
            )
        self.rebuild(population, np.nonzero(~mask)[0], 2 * int(mask.sum()))
        return int(mask.sum()), 0

    def step(self, iteration, started):
        cfg = self.cfg
        result = render_gradients(
            self.population, self.target, cfg.l1_weight, cfg.l2_weight, cfg.truncate
        )
        if not math.isfinite(result.loss) or not self.population.is_finite():
            self.diverge(iteration, result.loss)
        quality = psnr(result.image, self.target)
        if cfg.mode == "structure":
            self.observe(iteration)
        else:
            self.accumulate_gradients(result)
        self.optimizer.step(
            self.population.params(), result.grads, self.learning_rates(iteration)
        )
        splits = prunes = 0
        if cfg.densifies_at(iteration):
            if cfg.mode == "structure":
                splits, prunes = self.densify_structure(iteration)
            else:
                splits, prunes = self.densify_baseline(iteration)
            logger.info(
                "Iteration %d: %d splits, %d prunes, %d Gaussians",
                iteration,
                splits,
                prunes,
                len(self.population),
            )
        elif iteration % 100 == 0:
            logger.debug(
                "Iteration %d: loss %.6f, PSNR %.2f dB", iteration, result.loss, quality
            )
        self.report.add(
            iteration,
            time.perf_counter() - started,
            result.loss,
            quality,
            len(self.population),
            splits,
            prunes,
        )
        self.iteration = iteration
        return result

    def diverge(self, iteration, loss):
        dump_path = None
        if self.output_dir:
            os.makedirs(self.output_dir, exist_ok=True)
            dump_path = os.path.join(self.output_dir, "diverged.npz")
            np.savez(
                dump_path, iteration=np.array(iteration), **self.population.as_arrays()
            )
        raise TrainingDiverged(
            "Loss became %r at iteration %d" % (loss, iteration),
            iteration=iteration,
            dump_path=dump_path,
        )

    def run(self):
        logger.info(
            "Training %s mode on %dx%d target for %d iterations",
            self.cfg.mode,
            self.width,
            self.height,
            self.cfg.iterations,
        )
        started = time.perf_counter()
        for iteration in range(self.iteration + 1, self.cfg.iterations + 1):
            self.step(iteration, started)
        if self.output_dir:
            save_checkpoint(os.path.join(self.output_dir, "population.npz"), self)
        return self.population, self.report

    def render(self):
        return render2d(self.population, self.width, self.height, self.cfg.truncate)


def run_training(target, cfg=None, seed=0, **kwargs):
    """
    Trains a population on target and returns (population, TrainReport).
    """
    return Trainer(target, cfg, seed=seed, **kwargs).run()


def save_checkpoint(path, trainer):
    arrays = {"format_version": np.array(CHECKPOINT_VERSION)}
    arrays["iteration"] = np.array(trainer.iteration)
    arrays.update(trainer.population.as_arrays())
    arrays.update(trainer.optimizer.as_arrays())
    arrays.update(trainer.table.as_arrays())
    np.savez(path, **arrays)


def load_checkpoint(path):
    """
    Returns (population, arrays) from a checkpoint file; arrays holds the
    optimizer and consistency state as saved.
    """
    with np.load(path) as data:
        arrays = {key: data[key] for key in data.files}
    version = int(arrays.get("format_version", -1))
    if version != CHECKPOINT_VERSION:
        raise ValueError(
            "%s has checkpoint format %d, expected %d"
            % (path, version, CHECKPOINT_VERSION)
        )
    return Population2D.from_arrays(arrays), arrays
