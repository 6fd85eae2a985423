"""Posterior consumption: coefficient sampling, pointwise curve envelopes,
evidence-ratio model comparison, interaction-function reconstruction, and
smoothing priors for step/basis weights.

Because the fitted posterior is Gaussian, every functional summary here
reduces to simulating a Gaussian vector and mapping the draws through the
relevant basis, which replaces the parametric-bootstrap resimulation of the
point process itself.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .errors import NumericalError
from .model import ModelSpec
from .vb import GaussianDistribution

__all__ = [
    "CurveEnvelope",
    "SmoothingPrior",
    "RangeEstimate",
    "sample_theta",
    "trend_envelope",
    "bayes_factor",
    "build_smoothing_prior",
    "interaction_curve_samples",
    "interaction_curve",
    "characteristic_range",
    "write_envelope_csv",
]


@dataclass(frozen=True)
class CurveEnvelope:
    """Pointwise posterior band of a curve on a strictly increasing grid."""

    grid: np.ndarray
    lower: np.ndarray
    mean: np.ndarray
    upper: np.ndarray
    level: float

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        if grid.ndim != 1 or (np.diff(grid) <= 0).any():
            raise ValueError("envelope grid must be strictly increasing")
        if not ((self.lower <= self.mean + 1e-12).all() and (self.mean <= self.upper + 1e-12).all()):
            raise ValueError("envelope must satisfy lower <= mean <= upper pointwise")


class RangeEstimate(NamedTuple):
    mean: float
    lower: float
    upper: float
    boundary_flag: bool


@dataclass(frozen=True)
class SmoothingPrior:
    """Squared-exponential covariance over weight coordinates with optional pins.

    ``boundary_conditions`` is a sequence of (grid index, pinned value)
    pairs; None selects the default of pinning the last weight to 0 (no
    interaction at the largest range). kernel_scale is the prior variance,
    length_scale the correlation range; length_scale None means twice the
    grid spacing, a weakly informative default.
    """

    kernel_scale: float = 4.0
    length_scale: Optional[float] = None
    boundary_conditions: Optional[tuple] = None

    def __post_init__(self):
        if not self.kernel_scale > 0:
            raise ValueError("kernel_scale must be > 0")
        if self.length_scale is not None and not self.length_scale > 0:
            raise ValueError("length_scale must be > 0")


def sample_theta(posterior: GaussianDistribution, count: int, seed) -> np.ndarray:
    """Independent posterior draws, shape (count, p), via Cholesky factorization."""
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    cov = posterior.covariance
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        try:
            bump = 1e-12 * max(1.0, float(np.trace(cov)) / posterior.dim)
            chol = np.linalg.cholesky(cov + bump * np.eye(posterior.dim))
        except np.linalg.LinAlgError as exc:
            raise NumericalError("posterior covariance factorization failed") from exc
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((count, posterior.dim))
    return posterior.mean + z @ chol.T


def _envelope_from_curves(grid, curves, level) -> CurveEnvelope:
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must be in (0, 1), got {level}")
    alpha = (1.0 - level) / 2.0
    lower = np.quantile(curves, alpha, axis=0)
    upper = np.quantile(curves, 1.0 - alpha, axis=0)
    return CurveEnvelope(
        grid=np.asarray(grid, dtype=float),
        lower=lower,
        mean=curves.mean(axis=0),
        upper=upper,
        level=level,
    )


def trend_envelope(
    spec: ModelSpec,
    posterior: GaussianDistribution,
    grid,
    level: float = 0.95,
    count: int = 1000,
    seed=0,
    include_intercept: bool = False,
):
    """Pointwise envelopes of the log-trend as a function of the y coordinate.

    Returns one CurveEnvelope per mark level (a single-element list for
    unmarked models). With include_intercept False the constant basis
    function is dropped from the evaluated curve, showing the trend shape
    only.
    """
    if spec.trend.kind not in ("constant", "poly-y"):
        raise ValueError(
            "trend_envelope needs a trend that is a function of the y coordinate"
        )
    if spec.coordinate_window is None:
        raise ValueError(
            "spec.coordinate_window must be set so the trend basis has a fixed frame"
        )
    grid = np.asarray(grid, dtype=float).reshape(-1)
    xy = np.column_stack([np.zeros_like(grid), grid])
    basis = spec.trend.evaluate(spec.coordinate_window, xy)
    if not include_intercept:
        basis = basis[:, 1:]
    draws = sample_theta(posterior, count, seed)
    q = spec.trend.n_functions()
    blocks = spec.mark_levels if spec.trend.per_mark else 1
    out = []
    for mark in range(blocks):
        start = mark * q if spec.trend.per_mark else 0
        coef = draws[:, start : start + q]
        if not include_intercept:
            coef = coef[:, 1:]
        curves = coef @ basis.T
        out.append(_envelope_from_curves(grid, curves, level))
    return out


def bayes_factor(elbo_model_1: float, elbo_model_0: float) -> float:
    """exp(difference of evidence lower bounds): an approximate Bayes factor.

    Both bounds must come from fits to the same data with the same dummy
    configuration; the ratio inherits whatever slack the bounds have.
    """
    return float(np.exp(elbo_model_1 - elbo_model_0))


def build_smoothing_prior(
    grid,
    prior_spec: SmoothingPrior,
    trend_prior: Optional[GaussianDistribution] = None,
) -> GaussianDistribution:
    """Gaussian prior over interaction weights with smoothing correlations.

    Builds a squared-exponential covariance over the weight coordinates
    (step-bin midpoints or basis centers), then conditions on the pinned
    boundary weights. Pinned coordinates keep their exact values with (up
    to a 1e-8 stabilizing jitter) zero variance. When ``trend_prior`` is
    given the result is the block-diagonal joint prior [trend | weights]
    ready for fitting.
    """
    grid = np.asarray(grid, dtype=float).reshape(-1)
    if len(grid) < 1 or (np.diff(grid) <= 0).any():
        raise ValueError("weight grid must be strictly increasing")
    k = len(grid)
    spacing = float(np.diff(grid).mean()) if k > 1 else 1.0
    ell = prior_spec.length_scale if prior_spec.length_scale is not None else 2.0 * spacing
    cov = prior_spec.kernel_scale * np.exp(
        -((grid[:, None] - grid[None, :]) ** 2) / (2.0 * ell**2)
    )
    pins = prior_spec.boundary_conditions
    if pins is None:
        pins = ((k - 1, 0.0),)
    pin_idx = np.asarray([i for i, _ in pins], dtype=int)
    pin_val = np.asarray([v for _, v in pins], dtype=float)
    if len(pins) and (pin_idx < 0).any() or (pin_idx >= k).any():
        raise ValueError("pinned index out of range for the weight grid")
    mean = np.zeros(k)
    if len(pin_idx):
        free = np.setdiff1d(np.arange(k), pin_idx)
        kpp = cov[np.ix_(pin_idx, pin_idx)]
        kfp = cov[np.ix_(free, pin_idx)]
        kff = cov[np.ix_(free, free)]
        try:
            solve = np.linalg.solve(kpp + 1e-12 * np.eye(len(pin_idx)), np.column_stack([pin_val]))
            gain = np.linalg.solve(kpp + 1e-12 * np.eye(len(pin_idx)), kfp.T).T
        except np.linalg.LinAlgError as exc:
            raise NumericalError("pinned-coordinate block is singular") from exc
        cond_mean = kfp @ solve[:, 0]
        cond_cov = kff - gain @ kfp.T
        mean = np.zeros(k)
        mean[pin_idx] = pin_val
        mean[free] = cond_mean
        cov = np.zeros((k, k))
        cov[np.ix_(free, free)] = (cond_cov + cond_cov.T) / 2.0
    cov = cov + 1e-8 * np.eye(k)
    eigs = np.linalg.eigvalsh(cov)
    if eigs.min() <= 0:
        raise NumericalError(
            f"smoothing prior covariance not positive definite (min eig {eigs.min():.3e})"
        )
    if trend_prior is not None:
        p = trend_prior.dim + k
        mean_full = np.concatenate([trend_prior.mean, mean])
        cov_full = np.zeros((p, p))
        cov_full[: trend_prior.dim, : trend_prior.dim] = trend_prior.covariance
        cov_full[trend_prior.dim :, trend_prior.dim :] = cov
        return GaussianDistribution(mean_full, cov_full)
    return GaussianDistribution(mean, cov)


def _interaction_basis(spec: ModelSpec, r_grid) -> np.ndarray:
    inter = spec.interaction
    r = np.asarray(r_grid, dtype=float).reshape(-1)
    if inter.kind == "step_function":
        breaks = np.asarray(inter.breaks, dtype=float)
        bins = np.searchsorted(breaks, r, side="right") - 1
        k = len(breaks) - 1
        h = np.zeros((len(r), k))
        inside = (bins >= 0) & (bins < k)
        h[np.flatnonzero(inside), bins[inside]] = 1.0
        return h
    if inter.kind == "smooth_basis":
        centers = np.asarray(inter.centers, dtype=float)
        return np.exp(-((r[:, None] - centers[None, :]) ** 2) / (2.0 * inter.bandwidth**2))
    raise ValueError(
        f"interaction curves are defined for step_function/smooth_basis specs, "
        f"not {inter.kind!r}"
    )


def interaction_curve_samples(spec: ModelSpec, theta_samples, r_grid) -> np.ndarray:
    """Natural-scale interaction function exp(sum_k h_k(r) w_k) per posterior draw."""
    theta_samples = np.atleast_2d(np.asarray(theta_samples, dtype=float))
    h = _interaction_basis(spec, r_grid)
    k = spec.interaction.row_length()
    weights = theta_samples[:, theta_samples.shape[1] - k :]
    return np.exp(weights @ h.T)


def interaction_curve(spec: ModelSpec, theta_samples, r_grid, level: float = 0.95) -> CurveEnvelope:
    """Pointwise envelope of the reconstructed interaction function."""
    curves = interaction_curve_samples(spec, theta_samples, r_grid)
    return _envelope_from_curves(np.asarray(r_grid, dtype=float), curves, level)


def characteristic_range(curve_samples, r_grid) -> RangeEstimate:
    """Distribution of the per-draw argmax of the interaction function.

    Ties resolve to the smallest r. The boundary flag is raised when more
    than half the draws peak at an end of the grid, a sign the grid is too
    short.
    """
    curves = np.atleast_2d(np.asarray(curve_samples, dtype=float))
    r = np.asarray(r_grid, dtype=float).reshape(-1)
    if curves.shape[1] != len(r):
        raise ValueError("curve samples and r_grid lengths differ")
    idx = curves.argmax(axis=1)
    at_boundary = (idx == 0) | (idx == len(r) - 1)
    ranges = r[idx]
    return RangeEstimate(
        mean=float(ranges.mean()),
        lower=float(np.quantile(ranges, 0.025)),
        upper=float(np.quantile(ranges, 0.975)),
        boundary_flag=bool(at_boundary.mean() > 0.5),
    )


def write_envelope_csv(envelope: CurveEnvelope, path, comments=()) -> None:
    """Emit ``grid,lower,mean,upper`` rows, plot-ready."""
    lines = [f"# {c}" for c in comments]
    lines.append("grid,lower,mean,upper")
    for g, lo, me, up in zip(envelope.grid, envelope.lower, envelope.mean, envelope.upper):
        lines.append(f"{g!r},{lo!r},{me!r},{up!r}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
