"""Canonical statistics, trend bases, interaction specifications, and the
conditional intensity of exponential-family pairwise Gibbs models.

The central object is the per-location statistic row: the change in the
global canonical statistic vector when a point is added at a location. Rows
concatenate a trend block (spatial basis functions, optionally one block per
mark level) and an interaction block (neighbor counts within a range, bin
counts of pair distances, or kernel sums over pair distances). All row
builders are vectorized over query locations; the single-point operations
are thin wrappers over the vectorized paths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .geometry import PointPattern, Window

__all__ = [
    "TrendBasis",
    "InteractionSpec",
    "ModelSpec",
    "statistic_row",
    "statistic_rows",
    "interaction_row",
    "interaction_rows",
    "conditional_intensity",
    "lennard_jones_curve",
    "hardcore_violation",
]

_TREND_KINDS = ("constant", "poly-y", "poly-xy")
_INTERACTION_KINDS = (
    "none",
    "strauss",
    "cross_strauss",
    "step_function",
    "smooth_basis",
    "lennard_jones",
)

# Query rows are processed in blocks to bound the size of the pairwise
# distance buffer at block_size x n_data doubles.
_BLOCK = 512


@dataclass(frozen=True)
class TrendBasis:
    """Spatial trend basis: constant, polynomial in y, or polynomial in (x, y).

    Coordinates are affinely rescaled to [-1, 1] over the evaluation window
    before powers are taken, which keeps the normal equations well
    conditioned for degrees up to ~6. The constant basis is the degree-0
    case. With ``per_mark`` the basis is replicated into one coefficient
    block per mark level and a location's row is placed in the block of its
    mark.
    """

    kind: str = "constant"
    degree: int = 0
    per_mark: bool = False

    def __post_init__(self):
        if self.kind not in _TREND_KINDS:
            raise ValueError(f"unknown trend kind {self.kind!r}, expected {_TREND_KINDS}")
        if self.degree < 0:
            raise ValueError(f"trend degree must be >= 0, got {self.degree}")
        if self.kind == "constant" and self.degree != 0:
            raise ValueError("constant trend is the degree-0 case; leave degree at 0")

    def n_functions(self) -> int:
        if self.kind in ("constant",):
            return 1
        if self.kind == "poly-y":
            return self.degree + 1
        return (self.degree + 1) * (self.degree + 2) // 2

    def evaluate(self, window: Window, xy) -> np.ndarray:
        """Basis values at each location, shape (m, n_functions)."""
        xy = np.asarray(xy, dtype=float).reshape(-1, 2)
        ty = 2.0 * (xy[:, 1] - window.ymin) / (window.ymax - window.ymin) - 1.0
        if self.kind == "constant":
            return np.ones((len(xy), 1))
        if self.kind == "poly-y":
            return np.vander(ty, self.degree + 1, increasing=True)
        tx = 2.0 * (xy[:, 0] - window.xmin) / (window.xmax - window.xmin) - 1.0
        cols = []
        for total in range(self.degree + 1):
            for i in range(total + 1):
                cols.append(tx**i * ty ** (total - i))
        return np.column_stack(cols)


@dataclass(frozen=True)
class InteractionSpec:
    """Pairwise interaction specification.

    Use the factory classmethods; the constructor validates whichever
    parameters the chosen kind requires. ``lennard_jones`` is accepted only
    by the simulator (it is not of exponential-family step form) and is
    rejected by every fitting path.
    """

    kind: str = "none"
    radius: Optional[float] = None
    breaks: Optional[tuple] = None
    centers: Optional[tuple] = None
    bandwidth: Optional[float] = None
    epsilon: Optional[float] = None
    sigma: Optional[float] = None
    cutoff: Optional[float] = None

    @classmethod
    def none(cls):
        return cls(kind="none")

    @classmethod
    def strauss(cls, radius):
        return cls(kind="strauss", radius=float(radius))

    @classmethod
    def cross_strauss(cls, radius):
        return cls(kind="cross_strauss", radius=float(radius))

    @classmethod
    def step_function(cls, breaks):
        return cls(kind="step_function", breaks=tuple(float(b) for b in breaks))

    @classmethod
    def smooth_basis(cls, centers, bandwidth):
        return cls(
            kind="smooth_basis",
            centers=tuple(float(c) for c in centers),
            bandwidth=float(bandwidth),
        )

    @classmethod
    def lennard_jones(cls, epsilon, sigma, cutoff=None):
        # cutoff bounds the simulator's pair sums; beyond 2.5*sigma the
        # potential is negligible relative to its well depth.
        sigma = float(sigma)
        return cls(
            kind="lennard_jones",
            epsilon=float(epsilon),
            sigma=sigma,
            cutoff=2.5 * sigma if cutoff is None else float(cutoff),
        )

    def __post_init__(self):
        if self.kind not in _INTERACTION_KINDS:
            raise ValueError(
                f"unknown interaction kind {self.kind!r}, expected {_INTERACTION_KINDS}"
            )
        if self.kind in ("strauss", "cross_strauss"):
            if self.radius is None or not self.radius > 0:
                raise ValueError(f"{self.kind} requires radius > 0, got {self.radius}")
        elif self.kind == "step_function":
            b = np.asarray(self.breaks, dtype=float)
            if b.ndim != 1 or len(b) < 2:
                raise ValueError("step_function needs at least two break points")
            if b[0] != 0.0:
                raise ValueError(f"step grid must start at 0, got {b[0]}")
            if not (np.diff(b) > 0).all():
                raise ValueError("step grid must be strictly increasing")
        elif self.kind == "smooth_basis":
            if self.bandwidth is None or not self.bandwidth > 0:
                raise ValueError(f"smooth_basis requires bandwidth > 0, got {self.bandwidth}")
            c = np.asarray(self.centers, dtype=float)
            if c.ndim != 1 or len(c) < 1 or not (np.diff(c) > 0).all():
                raise ValueError("smooth_basis centers must be strictly increasing")
        elif self.kind == "lennard_jones":
            if self.epsilon is None or not self.epsilon > 0:
                raise ValueError(f"lennard_jones requires epsilon > 0, got {self.epsilon}")
            if self.sigma is None or not self.sigma > 0:
                raise ValueError(f"lennard_jones requires sigma > 0, got {self.sigma}")

    def row_length(self) -> int:
        if self.kind in ("none", "lennard_jones"):
            return 0
        if self.kind in ("strauss", "cross_strauss"):
            return 1
        if self.kind == "step_function":
            return len(self.breaks) - 1
        return len(self.centers)

    def max_range(self) -> float:
        """Largest distance at which a pair can contribute (inf for smooth kernels)."""
        if self.kind in ("strauss", "cross_strauss"):
            return self.radius
        if self.kind == "step_function":
            return self.breaks[-1]
        if self.kind == "smooth_basis":
            # exp underflows to exactly 0 beyond ~39 bandwidths, so a finite
            # cutoff reproduces the untruncated sums bit for bit.
            return self.centers[-1] + 39.0 * self.bandwidth
        if self.kind == "lennard_jones":
            return self.cutoff
        return 0.0


@dataclass(frozen=True)
class ModelSpec:
    """Trend + interaction + optional hard-core baseline.

    ``mark_levels`` is 0 for unmarked models. ``coordinate_window``, when
    set, fixes the window used to rescale coordinates inside the trend
    basis; this keeps the trend function identical between a simulation on
    a dilated window and a fit on the target window.
    """

    trend: TrendBasis
    interaction: InteractionSpec
    hardcore_radius: Optional[float] = None
    mark_levels: int = 0
    coordinate_window: Optional[Window] = None

    def __post_init__(self):
        if self.mark_levels < 0:
            raise ValueError("mark_levels must be >= 0")
        if self.trend.per_mark and self.mark_levels < 1:
            raise ValueError("per-mark trend requires mark_levels >= 1")
        if self.interaction.kind == "cross_strauss" and self.mark_levels < 2:
            raise ValueError("cross_strauss requires mark_levels >= 2")
        if self.hardcore_radius is not None and not self.hardcore_radius > 0:
            raise ValueError(
                f"hardcore_radius must be > 0 when given, got {self.hardcore_radius}"
            )

    def trend_dim(self) -> int:
        blocks = self.mark_levels if self.trend.per_mark else 1
        return self.trend.n_functions() * blocks

    def parameter_dim(self) -> int:
        return self.trend_dim() + self.interaction.row_length()

    def _coord_window(self, pattern: PointPattern) -> Window:
        return self.coordinate_window if self.coordinate_window is not None else pattern.window


def _as_query_arrays(points, marks, self_indices, m):
    pts = np.asarray(points, dtype=float).reshape(m, 2)
    if marks is not None:
        marks = np.asarray(marks, dtype=np.int64).reshape(m)
    if self_indices is None:
        self_indices = np.full(m, -1, dtype=np.int64)
    else:
        self_indices = np.asarray(self_indices, dtype=np.int64).reshape(m)
    return pts, marks, self_indices


def _pair_d2_block(data_xy, query_block, self_idx_block):
    d2 = (query_block[:, 0:1] - data_xy[:, 0]) ** 2 + (
        query_block[:, 1:2] - data_xy[:, 1]
    ) ** 2
    has_self = self_idx_block >= 0
    if has_self.any():
        rows = np.flatnonzero(has_self)
        d2[rows, self_idx_block[rows]] = np.inf
    return d2


def _trend_block(spec: ModelSpec, pattern, points, marks):
    window = spec._coord_window(pattern)
    base = spec.trend.evaluate(window, points)
    if not spec.trend.per_mark:
        return base
    if marks is None:
        raise ValueError("per-mark trend requires a mark for every query location")
    m, q = base.shape
    out = np.zeros((m, q * spec.mark_levels))
    cols = marks[:, None] * q + np.arange(q)[None, :]
    np.put_along_axis(out, cols, base, axis=1)
    return out


def interaction_rows(spec: ModelSpec, pattern: PointPattern, points, marks=None, self_indices=None):
    """Interaction statistics for many query locations, shape (m, row_length).

    Pair sums run over the data pattern only, excluding the query's own
    index when supplied.
    """
    inter = spec.interaction
    pts, marks, self_idx = _as_query_arrays(
        points, marks, self_indices, np.asarray(points, dtype=float).reshape(-1, 2).shape[0]
    )
    m = len(pts)
    k = inter.row_length()
    out = np.zeros((m, k))
    if inter.kind in ("none", "lennard_jones") or m == 0 or len(pattern) == 0:
        return out
    data_xy = pattern.points
    if inter.kind == "cross_strauss":
        if pattern.marks is None or marks is None:
            raise ValueError("cross_strauss requires marked data and marked queries")
    if inter.kind == "step_function":
        breaks_sq = np.asarray(inter.breaks, dtype=float) ** 2
    if inter.kind == "smooth_basis":
        centers = np.asarray(inter.centers, dtype=float)
        cutoff_sq = inter.max_range() ** 2
        denom = 2.0 * inter.bandwidth**2
    for lo in range(0, m, _BLOCK):
        hi = min(lo + _BLOCK, m)
        d2 = _pair_d2_block(data_xy, pts[lo:hi], self_idx[lo:hi])
        if inter.kind == "strauss":
            out[lo:hi, 0] = np.count_nonzero(d2 < inter.radius**2, axis=1)
        elif inter.kind == "cross_strauss":
            opposite = pattern.marks[None, :] != marks[lo:hi, None]
            out[lo:hi, 0] = np.count_nonzero((d2 < inter.radius**2) & opposite, axis=1)
        elif inter.kind == "step_function":
            rows, cols = np.nonzero(d2 < breaks_sq[-1])
            bins = np.searchsorted(breaks_sq, d2[rows, cols], side="right") - 1
            counts = np.bincount(rows * k + bins, minlength=(hi - lo) * k)
            out[lo:hi] = counts.reshape(hi - lo, k)
        else:  # smooth_basis
            rows, cols = np.nonzero(d2 < cutoff_sq)
            if rows.size:
                d = np.sqrt(d2[rows, cols])
                kern = np.exp(-((d[:, None] - centers[None, :]) ** 2) / denom)
                block = np.zeros((hi - lo, k))
                np.add.at(block, rows, kern)
                out[lo:hi] = block
    return out


def statistic_rows(spec: ModelSpec, pattern: PointPattern, points, marks=None, self_indices=None):
    """Statistic rows [trend block | interaction block] for many locations."""
    if spec.interaction.kind == "lennard_jones":
        raise ValueError(
            "lennard_jones interaction is simulation-only and cannot enter a design row"
        )
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    _, marks_arr, self_idx = _as_query_arrays(points, marks, self_indices, len(pts))
    trend = _trend_block(spec, pattern, pts, marks_arr)
    inter = interaction_rows(spec, pattern, pts, marks_arr, self_idx)
    return np.hstack([trend, inter])


def statistic_row(spec: ModelSpec, pattern: PointPattern, u, u_mark=None, self_index=None):
    """Statistic row for a single location; equals the change in the global
    statistic vector when the point is added (removed points excluded via
    self_index)."""
    marks = None if u_mark is None else [u_mark]
    self_indices = None if self_index is None else [self_index]
    return statistic_rows(spec, pattern, [u], marks, self_indices)[0]


def interaction_row(spec: ModelSpec, pattern: PointPattern, u, self_index=None):
    """Pair-distance feature row for step_function or smooth_basis models."""
    if spec.interaction.kind not in ("step_function", "smooth_basis"):
        raise ValueError(
            f"interaction_row is defined for step_function/smooth_basis specs, "
            f"not {spec.interaction.kind!r}"
        )
    self_indices = None if self_index is None else [self_index]
    return interaction_rows(spec, pattern, [u], None, self_indices)[0]


def hardcore_violation(spec: ModelSpec, pattern: PointPattern, points, self_indices=None):
    """Boolean per query: some data point (other than self) strictly within
    the hard-core radius."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    m = len(pts)
    if spec.hardcore_radius is None or len(pattern) == 0 or m == 0:
        return np.zeros(m, dtype=bool)
    _, _, self_idx = _as_query_arrays(points, None, self_indices, m)
    h2 = spec.hardcore_radius**2
    out = np.zeros(m, dtype=bool)
    for lo in range(0, m, _BLOCK):
        hi = min(lo + _BLOCK, m)
        d2 = _pair_d2_block(pattern.points, pts[lo:hi], self_idx[lo:hi])
        out[lo:hi] = (d2 < h2).any(axis=1)
    return out


def _lj_log_pair_sum(inter: InteractionSpec, pattern: PointPattern, u, self_index=None):
    """Sum of Lennard-Jones pair potentials from u to the data, truncated at cutoff."""
    if len(pattern) == 0:
        return 0.0
    u = np.asarray(u, dtype=float)
    d2 = (pattern.points[:, 0] - u[0]) ** 2 + (pattern.points[:, 1] - u[1]) ** 2
    if self_index is not None:
        d2[self_index] = np.inf
    d2 = d2[d2 < inter.cutoff**2]
    if d2.size == 0:
        return 0.0
    s6 = (inter.sigma**2 / d2) ** 3
    return float(4.0 * inter.epsilon * np.sum(s6 * s6 - s6))


def conditional_intensity(spec: ModelSpec, theta, pattern: PointPattern, u, u_mark=None, self_index=None):
    """Ratio of model densities with and without a point at u.

    Zero under a hard-core violation. For lennard_jones specs theta covers
    only the trend block and the pair interaction enters through the closed
    form of the potential.
    """
    theta = np.asarray(theta, dtype=float).reshape(-1)
    if len(theta) != spec.parameter_dim():
        raise ValueError(
            f"theta has length {len(theta)}, model expects {spec.parameter_dim()}"
        )
    if hardcore_violation(spec, pattern, [u], None if self_index is None else [self_index])[0]:
        return 0.0
    if spec.interaction.kind == "lennard_jones":
        marks = None if u_mark is None else [u_mark]
        trend = _trend_block(
            spec, pattern, np.asarray(u, dtype=float).reshape(1, 2),
            None if u_mark is None else np.asarray(marks, dtype=np.int64),
        )[0]
        log_lam = float(trend @ theta) - _lj_log_pair_sum(
            spec.interaction, pattern, u, self_index
        )
        return float(np.exp(log_lam))
    row = statistic_row(spec, pattern, u, u_mark, self_index)
    return float(np.exp(row @ theta))


def lennard_jones_curve(epsilon, sigma, r_grid):
    """Interaction function exp(-potential) of the Lennard-Jones pair model.

    The curve peaks at 2**(1/6) * sigma, the model's characteristic range.
    """
    if not epsilon > 0 or not sigma > 0:
        raise ValueError("epsilon and sigma must be positive")
    r = np.asarray(r_grid, dtype=float)
    if (r <= 0).any():
        raise ValueError("lennard_jones_curve requires r > 0")
    with np.errstate(over="ignore"):
        s6 = (sigma / r) ** 6
        return np.exp(-4.0 * epsilon * (s6 * s6 - s6))
