"""
Minimal chart and visualization writers on matplotlib's Agg canvas.

Figures are built with the object API so nothing touches pyplot's global
state and writers are safe to call from worker threads.
"""
import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.collections import EllipseCollection
from matplotlib.figure import Figure

from .structure import eigen_decompose


def _save(figure, path):
    FigureCanvasAgg(figure)
    figure.savefig(path, dpi=100)


def plot_series(path, series, xlabel, ylabel, title=None):
    """
    Line chart with one labeled line per (label, xs, ys) entry.
    """
    figure = Figure(figsize=(7, 4.5))
    axes = figure.add_subplot(1, 1, 1)
    for label, xs, ys in series:
        ys = np.asarray(ys, dtype=np.float64)
        axes.plot(xs, np.where(np.isfinite(ys), ys, np.nan), label=label)
    axes.set_xlabel(xlabel)
    axes.set_ylabel(ylabel)
    if title:
        axes.set_title(title)
    axes.grid(True, alpha=0.3)
    if series:
        axes.legend(loc="lower right")
    figure.tight_layout()
    _save(figure, path)
    return len(series)


def save_heatmap(path, values, title=None, cmap="magma"):
    height, width = values.shape
    figure = Figure(figsize=(6, 6 * height / float(width) + 0.5))
    axes = figure.add_subplot(1, 1, 1)
    image = axes.imshow(values, cmap=cmap, interpolation="nearest")
    figure.colorbar(image, ax=axes, fraction=0.046, pad=0.04)
    if title:
        axes.set_title(title)
    axes.set_axis_off()
    _save(figure, path)


def save_ellipses(path, field, background=None, stride=8, eps=1e-8):
    """
    Draws one ellipse per stride x stride cell. The long axis follows the
    principal eigenvector and the lengths are the local minimum wavelengths,
    capped at the stride.
    """
    ys = np.arange(stride // 2, field.height, stride)
    xs = np.arange(stride // 2, field.width, stride)
    gy, gx = np.meshgrid(ys, xs, indexing="ij")
    sxx, sxy, syy = (plane[gy, gx].ravel() for plane in field.planes())
    lambda1, lambda2, e1x, e1y, _ = eigen_decompose(sxx, sxy, syy, eps)
    # Short wavelengths across the texture, longer ones along it
    across = np.minimum(1.0 / (np.sqrt(lambda1) + eps), stride)
    along = np.minimum(1.0 / (np.sqrt(lambda2) + eps), stride)
    figure = Figure(figsize=(6, 6 * field.height / float(field.width)))
    axes = figure.add_subplot(1, 1, 1)
    if background is not None:
        data = np.clip(background.data, 0.0, 1.0)
        if data.shape[2] == 1:
            axes.imshow(data[:, :, 0], cmap="gray", vmin=0, vmax=1)
        else:
            axes.imshow(data)
    ellipses = EllipseCollection(
        along,
        across,
        np.degrees(np.arctan2(e1y, e1x)) + 90.0,
        units="xy",
        offsets=np.column_stack([gx.ravel(), gy.ravel()]),
        offset_transform=axes.transData,
        facecolors="none",
        edgecolors="tab:cyan",
        linewidths=0.8,
    )
    axes.add_collection(ellipses)
    axes.set_xlim(-0.5, field.width - 0.5)
    axes.set_ylim(field.height - 0.5, -0.5)
    axes.set_axis_off()
    _save(figure, path)
