"""Synthetic pattern generation: homogeneous Poisson draws and pairwise
Gibbs models via a birth-death Metropolis-Hastings chain.

Each proposal either inserts a uniformly placed point (accepted with
probability min{1, lambda(u; w) V / (n+1)}) or deletes a uniformly chosen
point (accepted with probability min{1, n / (V lambda(x; w\\x))}), where
lambda is the model's conditional intensity. Only the final state after the
requested number of proposals is returned, so replicates are independent
chains.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericalError, UnstableModelError
from .geometry import PointPattern, Window
from .model import ModelSpec

__all__ = ["McmcOptions", "sample_poisson", "sample_gibbs", "pack_range_rule"]


@dataclass(frozen=True)
class McmcOptions:
    burn_in_steps: int = 100_000
    initial_pattern: str = "poisson"  # or "empty"
    seed: int = 0

    def __post_init__(self):
        if self.burn_in_steps < 0:
            raise ValueError("burn_in_steps must be >= 0")
        if self.initial_pattern not in ("poisson", "empty"):
            raise ValueError(f"unknown initial_pattern {self.initial_pattern!r}")


def sample_poisson(window: Window, intensity, seed) -> PointPattern:
    """Homogeneous Poisson pattern: Poisson(intensity * area) uniform points."""
    if not intensity > 0:
        raise ValueError(f"intensity must be positive, got {intensity}")
    rng = np.random.default_rng(seed)
    n = rng.poisson(intensity * window.volume())
    xs = rng.uniform(window.xmin, window.xmax, size=n)
    ys = rng.uniform(window.ymin, window.ymax, size=n)
    return PointPattern(np.column_stack([xs, ys]), window)


def pack_range_rule(intensity_guess) -> float:
    """Interaction-range heuristic: 0.7 times the hard-packing maximum
    2*sqrt(2/(pi^2 * intensity))."""
    if not intensity_guess > 0:
        raise ValueError(f"intensity_guess must be positive, got {intensity_guess}")
    return 0.7 * 2.0 * math.sqrt(2.0 / (math.pi**2 * intensity_guess))


def _validate_stability(spec: ModelSpec, theta):
    kind = spec.interaction.kind
    k = spec.interaction.row_length()
    if k == 0:
        return
    weights = theta[spec.trend_dim():]
    if kind in ("strauss", "cross_strauss"):
        if weights[0] > 0:
            raise UnstableModelError(
                f"{kind} interaction parameter must be <= 0 for a well-defined "
                f"model, got {weights[0]}"
            )
    elif kind in ("step_function", "smooth_basis"):
        # Bounded positive pair interactions of finite range are not
        # integrable in an unbounded-count window unless a hard core caps n.
        if spec.hardcore_radius is None and (weights > 0).any():
            raise UnstableModelError(
                f"{kind} weights must be <= 0 without a hard core; "
                f"max weight {weights.max()}"
            )


def _trend_evaluator(spec: ModelSpec, theta, window: Window):
    """Scalar log-trend at (x, y, mark) using the model's coordinate frame."""
    cw = spec.coordinate_window if spec.coordinate_window is not None else window
    q = spec.trend.n_functions()
    kind = spec.trend.kind
    degree = spec.trend.degree
    per_mark = spec.trend.per_mark

    def block(mark):
        if per_mark:
            start = mark * q
            return theta[start : start + q]
        return theta[:q]

    if kind == "constant":
        def ev(x, y, mark):
            return block(mark)[0]
    elif kind == "poly-y":
        def ev(x, y, mark):
            ty = 2.0 * (y - cw.ymin) / (cw.ymax - cw.ymin) - 1.0
            coef = block(mark)
            out = coef[degree]
            for j in range(degree - 1, -1, -1):
                out = out * ty + coef[j]
            return out
    else:  # poly-xy
        def ev(x, y, mark):
            tx = 2.0 * (x - cw.xmin) / (cw.xmax - cw.xmin) - 1.0
            ty = 2.0 * (y - cw.ymin) / (cw.ymax - cw.ymin) - 1.0
            coef = block(mark)
            out = 0.0
            idx = 0
            for total in range(degree + 1):
                for i in range(total + 1):
                    out += coef[idx] * tx**i * ty ** (total - i)
                    idx += 1
            return out

    return ev


def sample_gibbs(spec: ModelSpec, theta, window: Window, options: McmcOptions) -> PointPattern:
    """Birth-death Metropolis-Hastings draw from a pairwise Gibbs model.

    Strauss-type interactions must be repulsive (non-positive interaction
    coefficients); lennard_jones uses its closed-form pair potential with
    the spec's truncation cutoff. Marked models propose a uniform mark
    alongside each birth location and use V * mark_levels as the proposal
    volume, matching a unit-rate-per-level reference process.
    """
    theta = np.asarray(theta, dtype=float).reshape(-1)
    if len(theta) != spec.parameter_dim():
        raise ValueError(
            f"theta has length {len(theta)}, model expects {spec.parameter_dim()}"
        )
    _validate_stability(spec, theta)

    rng = np.random.default_rng(options.seed)
    vol = window.volume()
    inter = spec.interaction
    kind = inter.kind
    marked = spec.mark_levels >= 1 and (
        spec.trend.per_mark or kind == "cross_strauss"
    )
    levels = spec.mark_levels if marked else 1
    # Reference measure is unit rate per mark level, so the proposal volume
    # factor for marked models is V * levels.
    log_vol = math.log(vol * levels)
    trend_at = _trend_evaluator(spec, theta, window)
    weights = theta[spec.trend_dim():]
    h2 = spec.hardcore_radius**2 if spec.hardcore_radius is not None else None

    if kind in ("strauss", "cross_strauss"):
        r2 = inter.radius**2
        w0 = weights[0]
    elif kind == "step_function":
        breaks_sq = np.asarray(inter.breaks, dtype=float) ** 2
        rmax2 = breaks_sq[-1]
    elif kind == "smooth_basis":
        centers = np.asarray(inter.centers, dtype=float)
        denom = 2.0 * inter.bandwidth**2
        cutoff2 = inter.max_range() ** 2
    elif kind == "lennard_jones":
        sig2 = inter.sigma**2
        lj_cut2 = inter.cutoff**2
        four_eps = 4.0 * inter.epsilon

    cap = 256
    px = np.empty(cap)
    py = np.empty(cap)
    pm = np.zeros(cap, dtype=np.int64)
    n = 0

    def grow():
        nonlocal cap, px, py, pm
        cap *= 2
        px = np.resize(px, cap)
        py = np.resize(py, cap)
        pm = np.resize(pm, cap)

    def log_intensity(ux, uy, umark, skip):
        """log lambda(u; state \\ skip); -inf on a hard-core violation."""
        value = trend_at(ux, uy, umark)
        if n == 0 or (n == 1 and skip == 0):
            return value
        d2 = (px[:n] - ux) ** 2 + (py[:n] - uy) ** 2
        if skip >= 0:
            d2[skip] = np.inf
        if h2 is not None and (d2 < h2).any():
            return -np.inf
        if kind == "strauss":
            value += w0 * np.count_nonzero(d2 < r2)
        elif kind == "cross_strauss":
            value += w0 * np.count_nonzero((d2 < r2) & (pm[:n] != umark))
        elif kind == "step_function":
            close = d2[d2 < rmax2]
            if close.size:
                bins = np.searchsorted(breaks_sq, close, side="right") - 1
                value += float(weights[bins].sum())
        elif kind == "smooth_basis":
            close = d2[d2 < cutoff2]
            if close.size:
                d = np.sqrt(close)
                kern = np.exp(-((d[:, None] - centers[None, :]) ** 2) / denom)
                value += float(kern.sum(axis=0) @ weights)
        elif kind == "lennard_jones":
            close = d2[d2 < lj_cut2]
            if close.size:
                s6 = (sig2 / close) ** 3
                value -= four_eps * float(np.sum(s6 * s6 - s6))
        if not np.isfinite(value) and value != -np.inf:
            raise NumericalError(
                f"conditional intensity evaluated to a non-finite value: {value}"
            )
        return value

    # Initial state
    if options.initial_pattern == "poisson":
        q = spec.trend.n_functions()
        for mark in range(levels):
            intercept = theta[mark * q] if (marked and spec.trend.per_mark) else theta[0]
            count = rng.poisson(math.exp(intercept) * vol)
            while n + count > cap:
                grow()
            px[n : n + count] = rng.uniform(window.xmin, window.xmax, size=count)
            py[n : n + count] = rng.uniform(window.ymin, window.ymax, size=count)
            pm[n : n + count] = mark
            n += count

    for _ in range(options.burn_in_steps):
        if rng.random() < 0.5:  # birth
            ux = rng.uniform(window.xmin, window.xmax)
            uy = rng.uniform(window.ymin, window.ymax)
            umark = int(rng.integers(levels)) if marked else 0
            loglam = log_intensity(ux, uy, umark, -1)
            if loglam == -np.inf:
                continue
            if math.log(rng.random()) < loglam + log_vol - math.log(n + 1):
                if n == cap:
                    grow()
                px[n] = ux
                py[n] = uy
                pm[n] = umark
                n += 1
        else:  # death
            if n == 0:
                continue
            i = int(rng.integers(n))
            loglam = log_intensity(px[i], py[i], int(pm[i]), i)
            accept = loglam == -np.inf or (
                math.log(rng.random()) < math.log(n) - log_vol - loglam
            )
            if accept:
                n -= 1
                px[i] = px[n]
                py[i] = py[n]
                pm[i] = pm[n]

    points = np.column_stack([px[:n].copy(), py[:n].copy()])
    marks = pm[:n].copy() if marked else None
    return PointPattern(points, window, marks=marks)
