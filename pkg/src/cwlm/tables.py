"""In-memory distribution tables shared by the three engines.

A table is a probability density P(s) sampled on a uniform tensor grid of
integrated outputs, one or two axes.  All engines emit this type so their
results can be compared directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import IncompatibleGrids


@dataclass(frozen=True)
class DistributionTable:
    axes: tuple          # tuple of 1D numpy arrays, one per output axis
    values: np.ndarray   # density, shape (len(ax) for ax in axes)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        axes = tuple(np.asarray(a, dtype=float) for a in self.axes)
        values = np.asarray(self.values, dtype=float)
        if values.shape != tuple(len(a) for a in axes):
            raise ValueError("values shape does not match axes")
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "values", values)

    @property
    def ndim(self) -> int:
        return len(self.axes)

    @property
    def spacings(self) -> tuple:
        return tuple(float(a[1] - a[0]) for a in self.axes)

    def cell_volume(self) -> float:
        return float(np.prod(self.spacings))

    def total_mass(self) -> float:
        return float(np.sum(self.values) * self.cell_volume())

    def moments(self):
        """Mean vector and covariance matrix of the tabulated density."""
        w = self.values * self.cell_volume()
        norm = np.sum(w)
        mesh = np.meshgrid(*self.axes, indexing="ij")
        mean = np.array([np.sum(w * m) for m in mesh]) / norm
        cov = np.empty((self.ndim, self.ndim))
        for i in range(self.ndim):
            for j in range(self.ndim):
                cov[i, j] = np.sum(w * (mesh[i] - mean[i]) * (mesh[j] - mean[j])) / norm
        return mean, cov


def l1_distance(a: DistributionTable, b: DistributionTable) -> float:
    """L1 distance between two densities on a common (interpolated) support."""
    pa, pb, h = _common_support(a, b)
    return float(np.sum(np.abs(pa - pb)) * h)


def ks_statistic(a: DistributionTable, b: DistributionTable) -> float:
    """Kolmogorov-Smirnov distance between the two tabulated 1D distributions."""
    pa, pb, h = _common_support(a, b)
    ca = np.cumsum(pa) * h
    cb = np.cumsum(pb) * h
    ca /= max(ca[-1], 1e-300)
    cb /= max(cb[-1], 1e-300)
    return float(np.max(np.abs(ca - cb)))


def _common_support(a: DistributionTable, b: DistributionTable):
    if a.ndim != b.ndim:
        raise IncompatibleGrids("tables have different dimensionality")
    if a.ndim == 1:
        lo = max(a.axes[0][0], b.axes[0][0])
        hi = min(a.axes[0][-1], b.axes[0][-1])
        if hi <= lo:
            raise IncompatibleGrids("tables have empty overlapping support")
        if np.array_equal(a.axes[0], b.axes[0]):
            return a.values, b.values, a.spacings[0]
        n = max(len(a.axes[0]), len(b.axes[0]))
        s = np.linspace(lo, hi, n)
        pa = np.interp(s, a.axes[0], a.values)
        pb = np.interp(s, b.axes[0], b.values)
        return pa, pb, float(s[1] - s[0])
    # multi-axis comparison requires identical grids
    for ax_a, ax_b in zip(a.axes, b.axes):
        if len(ax_a) != len(ax_b) or not np.allclose(ax_a, ax_b, atol=1e-12):
            raise IncompatibleGrids("multi-axis tables must share identical grids")
    return a.values.ravel(), b.values.ravel(), a.cell_volume()
