"""Dummy-point generation and assembly of the logistic design (y, X, o).

The observed points and a set of dummy locations drawn from a known
intensity are concatenated (data first, original order) into a binary
regression problem: response 1 for data rows, 0 for dummy rows, statistic
rows as covariates, and per-row offsets log[H(u)/rho(u)]. Interaction
statistics are always evaluated against the full data pattern, even for
rows later dropped by a border-correction fit window.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InfeasibleDataError
from .geometry import PointPattern, Window
from .model import ModelSpec, hardcore_violation, statistic_rows

__all__ = [
    "DummyScheme",
    "LogisticDesign",
    "default_dummy_intensity",
    "generate_dummy",
    "build_design",
    "write_design_csv",
]


@dataclass(frozen=True)
class DummyScheme:
    """How dummy locations are drawn: homogeneous Poisson or stratified grid."""

    kind: str
    rho: Optional[float] = None
    nx: Optional[int] = None
    ny: Optional[int] = None

    @classmethod
    def poisson(cls, rho):
        return cls(kind="poisson", rho=float(rho))

    @classmethod
    def stratified(cls, nx, ny):
        return cls(kind="stratified", nx=int(nx), ny=int(ny))

    def __post_init__(self):
        if self.kind == "poisson":
            if self.rho is None or not self.rho > 0:
                raise ValueError(f"poisson scheme requires rho > 0, got {self.rho}")
        elif self.kind == "stratified":
            if self.nx is None or self.ny is None or self.nx < 1 or self.ny < 1:
                raise ValueError(
                    f"stratified scheme requires nx, ny >= 1, got {self.nx}, {self.ny}"
                )
        else:
            raise ValueError(f"unknown dummy scheme kind {self.kind!r}")

    def intensity(self, window: Window) -> float:
        """Dummy intensity per unit area (per mark level for marked models)."""
        if self.kind == "poisson":
            return self.rho
        return self.nx * self.ny / window.volume()


def default_dummy_intensity(n_data: int, window: Window) -> float:
    """About four dummy points per data point, floored at 100 points total."""
    v = window.volume()
    return max(4.0 * n_data / v, 100.0 / v)


def generate_dummy(window: Window, scheme: DummyScheme, seed) -> PointPattern:
    """Draw a dummy pattern: Poisson counts with uniform locations, or one
    uniform point per cell of an nx-by-ny grid."""
    rng = np.random.default_rng(seed)
    if scheme.kind == "poisson":
        m = rng.poisson(scheme.rho * window.volume())
        xs = rng.uniform(window.xmin, window.xmax, size=m)
        ys = rng.uniform(window.ymin, window.ymax, size=m)
        return PointPattern(np.column_stack([xs, ys]), window)
    wx = (window.xmax - window.xmin) / scheme.nx
    wy = (window.ymax - window.ymin) / scheme.ny
    ix, iy = np.meshgrid(np.arange(scheme.nx), np.arange(scheme.ny), indexing="ij")
    u = rng.uniform(size=(scheme.nx * scheme.ny, 2))
    xs = window.xmin + (ix.ravel() + u[:, 0]) * wx
    ys = window.ymin + (iy.ravel() + u[:, 1]) * wy
    # Clip guards the closed-boundary invariant against rounding at the far edge.
    xs = np.minimum(xs, window.xmax)
    ys = np.minimum(ys, window.ymax)
    return PointPattern(np.column_stack([xs, ys]), window)


@dataclass(frozen=True)
class LogisticDesign:
    """The (y, X, o) triple plus per-row metadata.

    Data rows come first in their original order, dummy rows after. ``marks``
    is -1 on rows of unmarked models.
    """

    y: np.ndarray
    X: np.ndarray
    offsets: np.ndarray
    locations: np.ndarray
    marks: np.ndarray
    is_data: np.ndarray

    def __post_init__(self):
        def frozen(a, dtype):
            a = np.array(a, dtype=dtype)
            a.flags.writeable = False
            return a

        object.__setattr__(self, "y", frozen(self.y, float))
        object.__setattr__(self, "X", frozen(np.atleast_2d(self.X), float))
        object.__setattr__(self, "offsets", frozen(self.offsets, float))
        object.__setattr__(self, "locations", frozen(np.reshape(self.locations, (-1, 2)), float))
        object.__setattr__(self, "marks", frozen(self.marks, np.int64))
        object.__setattr__(self, "is_data", frozen(self.is_data, bool))

    @property
    def n_rows(self) -> int:
        return len(self.y)

    @property
    def n_data(self) -> int:
        return int(self.y.sum())

    @property
    def n_dummy(self) -> int:
        return self.n_rows - self.n_data


def _is_marked(spec: ModelSpec) -> bool:
    return spec.mark_levels >= 1 and (
        spec.trend.per_mark or spec.interaction.kind == "cross_strauss"
    )


def build_design(
    spec: ModelSpec,
    data: PointPattern,
    dummy: PointPattern,
    scheme: DummyScheme,
    fit_window: Optional[Window] = None,
) -> LogisticDesign:
    """Assemble the logistic design from data and dummy patterns.

    For marked models an unmarked dummy pattern is replicated once per mark
    level (location-major order), with the scheme intensity read as
    per-mark. ``fit_window`` implements border correction: rows located
    outside it are dropped while the statistics still see the full data
    pattern. Dummy rows violating the hard core are dropped; a hard-core
    violation between two data points is an error.
    """
    if data.window != dummy.window:
        raise ValueError("data and dummy patterns must share the same window")
    marked = _is_marked(spec)
    if marked and data.marks is None:
        raise ValueError("model uses marks but the data pattern is unmarked")
    if marked and data.marks is not None and data.marks.size:
        if data.marks.max() >= spec.mark_levels:
            raise ValueError(
                f"data mark {data.marks.max()} out of range for {spec.mark_levels} levels"
            )

    n = len(data)
    if spec.hardcore_radius is not None and n > 0:
        if hardcore_violation(spec, data, data.points, np.arange(n)).any():
            raise InfeasibleDataError(
                "two data points lie within the hard-core radius of each other"
            )

    rho = scheme.intensity(data.window)

    d_xy = dummy.points
    if marked:
        if dummy.marks is None:
            d_xy = np.repeat(dummy.points, spec.mark_levels, axis=0)
            d_marks = np.tile(np.arange(spec.mark_levels), len(dummy))
        else:
            d_marks = dummy.marks
    else:
        d_marks = np.full(len(d_xy), -1, dtype=np.int64)

    locations = np.vstack([data.points.reshape(-1, 2), d_xy.reshape(-1, 2)])
    if marked:
        marks = np.concatenate([data.marks, d_marks])
    else:
        marks = np.full(len(locations), -1, dtype=np.int64)
    self_idx = np.concatenate(
        [np.arange(n), np.full(len(locations) - n, -1)]
    ).astype(np.int64)
    y = np.concatenate([np.ones(n), np.zeros(len(locations) - n)])

    keep = np.ones(len(locations), dtype=bool)
    if spec.hardcore_radius is not None:
        violated = hardcore_violation(spec, data, locations, self_idx)
        keep &= ~violated  # data rows already checked clean above
    if fit_window is not None:
        keep &= fit_window.contains(locations)

    locations = locations[keep]
    marks = marks[keep]
    self_idx = self_idx[keep]
    y = y[keep]

    X = statistic_rows(
        spec, data, locations, marks if marked else None, self_idx
    )
    offsets = np.full(len(locations), -math.log(rho))
    if not np.isfinite(X).all():
        raise ValueError("design matrix contains non-finite entries")
    return LogisticDesign(
        y=y,
        X=X,
        offsets=offsets,
        locations=locations,
        marks=marks,
        is_data=y.astype(bool),
    )


def write_design_csv(design: LogisticDesign, path, comments=()) -> None:
    """Export the design as ``y,o,x1..xp`` for cross-checks with GLM software."""
    p = design.X.shape[1]
    lines = [f"# {c}" for c in comments]
    lines.append("y,o," + ",".join(f"x{j + 1}" for j in range(p)))
    for i in range(design.n_rows):
        xs = ",".join(repr(v) for v in design.X[i])
        lines.append(f"{int(design.y[i])},{design.offsets[i]!r},{xs}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
