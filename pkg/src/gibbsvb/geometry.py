"""Planar rectangular windows, point patterns, and fixed-radius neighbor queries.

All range comparisons use squared distances against a squared radius, with the
strict convention ``d < r`` ("within radius r" excludes points at exactly r).
Every container in this module is immutable after construction, so values can
be shared freely between threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

__all__ = [
    "Point",
    "Window",
    "PointPattern",
    "CellGrid",
    "pair_distance",
    "count_neighbors",
    "build_cell_grid",
    "read_pattern_csv",
    "write_pattern_csv",
]


class Point(NamedTuple):
    """A planar location. Any 2-sequence is accepted where a Point is expected."""

    x: float
    y: float


@dataclass(frozen=True)
class Window:
    """Axis-aligned rectangle with strictly positive extent in both axes."""

    xmin: float
    xmax: float
    ymin: float
    ymax: float

    def __post_init__(self):
        bounds = (self.xmin, self.xmax, self.ymin, self.ymax)
        if not all(math.isfinite(b) for b in bounds):
            raise ValueError(f"window bounds must be finite, got {bounds}")
        if self.xmax <= self.xmin or self.ymax <= self.ymin:
            raise ValueError(
                f"window must satisfy xmax > xmin and ymax > ymin, got {bounds}"
            )

    def volume(self) -> float:
        return (self.xmax - self.xmin) * (self.ymax - self.ymin)

    def dilate(self, r: float) -> "Window":
        """Expand the rectangle by r on all four sides (r >= 0)."""
        if r < 0:
            raise ValueError(f"dilation radius must be non-negative, got {r}")
        return Window(self.xmin - r, self.xmax + r, self.ymin - r, self.ymax + r)

    def erode(self, r: float) -> "Window":
        """Shrink the rectangle by r on all four sides (r >= 0)."""
        if r < 0:
            raise ValueError(f"erosion radius must be non-negative, got {r}")
        return Window(self.xmin + r, self.xmax - r, self.ymin + r, self.ymax - r)

    def contains(self, xy) -> np.ndarray:
        """Closed-boundary membership test, vectorized over (..., 2) arrays."""
        xy = np.asarray(xy, dtype=float)
        x, y = xy[..., 0], xy[..., 1]
        return (x >= self.xmin) & (x <= self.xmax) & (y >= self.ymin) & (y <= self.ymax)

    def as_tuple(self):
        return (self.xmin, self.xmax, self.ymin, self.ymax)


class PointPattern:
    """A finite point configuration inside a window, optionally with integer marks.

    Parameters
    ----------
    points : array-like, shape (n, 2)
        Planar coordinates. Every point must lie inside `window` (closed
        boundary).
    window : Window
        Observation window the pattern lives in.
    marks : array-like of int, optional
        One small non-negative integer per point (e.g. a type label).
    """

    def __init__(self, points, window: Window, marks=None):
        pts = np.array(points, dtype=float).reshape(-1, 2)
        if pts.size and not np.isfinite(pts).all():
            raise ValueError("point coordinates must be finite")
        if pts.size and not window.contains(pts).all():
            outside = np.flatnonzero(~window.contains(pts))
            raise ValueError(
                f"{outside.size} point(s) fall outside the window, first at "
                f"index {outside[0]}: {tuple(pts[outside[0]])}"
            )
        if marks is not None:
            marks = np.asarray(marks)
            if marks.shape != (len(pts),):
                raise ValueError(
                    f"marks must align with points: {marks.shape} vs {len(pts)} points"
                )
            if marks.size and (marks < 0).any():
                raise ValueError("marks must be non-negative integers")
            marks = marks.astype(np.int64)
            marks.flags.writeable = False
        pts.flags.writeable = False
        self.points = pts
        self.marks = marks
        self.window = window

    def n(self) -> int:
        return len(self.points)

    def __len__(self) -> int:
        return len(self.points)

    def __repr__(self):
        marked = "" if self.marks is None else ", marked"
        return f"PointPattern(n={len(self)}{marked}, window={self.window.as_tuple()})"


def pair_distance(a, b) -> float:
    """Euclidean distance between two planar points."""
    ax, ay = float(a[0]), float(a[1])
    bx, by = float(b[0]), float(b[1])
    dx, dy = ax - bx, ay - by
    return math.sqrt(dx * dx + dy * dy)


def _check_radius(r):
    if not r > 0:
        raise ValueError(f"radius must be positive, got {r}")


def _count_in(points, marks, u, r, exclude_index, mark_filter):
    if len(points) == 0:
        return 0
    d2 = (points[:, 0] - u[0]) ** 2 + (points[:, 1] - u[1]) ** 2
    hit = d2 < r * r
    if exclude_index is not None:
        hit[exclude_index] = False
    if mark_filter is not None:
        if marks is None:
            raise ValueError("mark_filter given but the pattern is unmarked")
        hit &= marks == mark_filter
    return int(np.count_nonzero(hit))


def count_neighbors(
    pattern: PointPattern, u, r, exclude_index=None, mark_filter=None
) -> int:
    """Number of pattern points strictly within distance r of u.

    `exclude_index`, when given, skips that pattern point (used when u is
    itself a member of the pattern). `mark_filter` restricts the count to
    points carrying that mark.
    """
    _check_radius(r)
    u = np.asarray(u, dtype=float)
    return _count_in(pattern.points, pattern.marks, u, r, exclude_index, mark_filter)


class CellGrid:
    """Uniform-bucket spatial index for fixed-radius neighbor counting.

    Cells have side >= the build radius, so a query ball of radius <= r is
    always covered by the 3x3 block of cells around the query point. Counts
    agree exactly with the naive all-points scan.
    """

    def __init__(self, pattern: PointPattern, r):
        _check_radius(r)
        self.pattern = pattern
        self.r = float(r)
        w = pattern.window
        width = w.xmax - w.xmin
        height = w.ymax - w.ymin
        self.nx = max(1, int(width / r))
        self.ny = max(1, int(height / r))
        self.csx = width / self.nx
        self.csy = height / self.ny
        cells = {}
        for i, (x, y) in enumerate(pattern.points):
            key = self._cell_of(x, y)
            cells.setdefault(key, []).append(i)
        self._cells = {k: np.asarray(v, dtype=np.intp) for k, v in cells.items()}

    def _cell_of(self, x, y):
        w = self.pattern.window
        ix = min(int((x - w.xmin) / self.csx), self.nx - 1) if x >= w.xmin else 0
        iy = min(int((y - w.ymin) / self.csy), self.ny - 1) if y >= w.ymin else 0
        return max(ix, 0), max(iy, 0)

    def count_neighbors(self, u, r=None, exclude_index=None, mark_filter=None) -> int:
        """Same contract as the module-level count_neighbors, via the index."""
        r = self.r if r is None else float(r)
        _check_radius(r)
        if r > self.r:
            raise ValueError(
                f"query radius {r} exceeds the build radius {self.r} of this index"
            )
        u = np.asarray(u, dtype=float)
        ix, iy = self._cell_of(u[0], u[1])
        candidates = []
        for cx in range(max(ix - 1, 0), min(ix + 1, self.nx - 1) + 1):
            for cy in range(max(iy - 1, 0), min(iy + 1, self.ny - 1) + 1):
                idx = self._cells.get((cx, cy))
                if idx is not None:
                    candidates.append(idx)
        if not candidates:
            return 0
        idx = np.concatenate(candidates)
        pts = self.pattern.points[idx]
        d2 = (pts[:, 0] - u[0]) ** 2 + (pts[:, 1] - u[1]) ** 2
        hit = d2 < r * r
        if exclude_index is not None:
            hit &= idx != exclude_index
        if mark_filter is not None:
            if self.pattern.marks is None:
                raise ValueError("mark_filter given but the pattern is unmarked")
            hit &= self.pattern.marks[idx] == mark_filter
        return int(np.count_nonzero(hit))


def build_cell_grid(pattern: PointPattern, r) -> CellGrid:
    """Build a bucket index over the pattern for radius-r neighbor queries."""
    return CellGrid(pattern, r)


def write_pattern_csv(pattern: PointPattern, path, comments=()) -> None:
    """Write a pattern as CSV with header ``x,y`` or ``x,y,mark``.

    Coordinates are written with shortest round-trip precision, so reading
    the file back reproduces them bit-exactly. `comments` are emitted as
    leading ``#`` lines.
    """
    lines = [f"# {c}" for c in comments]
    if pattern.marks is None:
        lines.append("x,y")
        lines.extend(f"{x!r},{y!r}" for x, y in pattern.points)
    else:
        lines.append("x,y,mark")
        lines.extend(
            f"{x!r},{y!r},{m}" for (x, y), m in zip(pattern.points, pattern.marks)
        )
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_pattern_csv(path, window: Window) -> PointPattern:
    """Read a pattern written by write_pattern_csv; the window is supplied here."""
    with open(path) as fh:
        rows = [line.strip() for line in fh]
    rows = [r for r in rows if r and not r.startswith("#")]
    if not rows:
        raise ValueError(f"{path}: empty pattern file")
    header = [h.strip() for h in rows[0].split(",")]
    if header not in (["x", "y"], ["x", "y", "mark"]):
        raise ValueError(f"{path}: expected header 'x,y' or 'x,y,mark', got {rows[0]!r}")
    marked = len(header) == 3
    pts, marks = [], []
    for row in rows[1:]:
        fields = row.split(",")
        pts.append((float(fields[0]), float(fields[1])))
        if marked:
            marks.append(int(fields[2]))
    pts = np.asarray(pts, dtype=float).reshape(-1, 2)
    return PointPattern(pts, window, marks=marks if marked else None)
