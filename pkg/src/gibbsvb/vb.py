"""Variational Bayes for logistic regression with offsets.

The logistic log-likelihood term -log(1 + exp(eta)) is replaced by its
quadratic tangential lower bound

    -log(1 + exp(eta)) >= lambda(xi) * eta**2 - eta/2 + gamma(xi),

which is exact at xi = |eta|. With a Gaussian prior the bounded joint
density is Gaussian in the coefficients, so each E-step is a closed-form
posterior update; the M-step resets every variational parameter xi_i to its
tangency point. Iterating the two monotonically increases a closed-form
evidence lower bound, which doubles as an approximate marginal likelihood
for model comparison.

A Newton/IRLS maximum-likelihood fitter (with offsets) is included as an
independent cross-check.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular
from scipy.special import expit

from .errors import NumericalError
from .quadrature import LogisticDesign

__all__ = [
    "GaussianDistribution",
    "VariationalState",
    "FitOptions",
    "flat_prior",
    "lambda_xi",
    "gamma_xi",
    "log_bound",
    "update_posterior",
    "update_xi",
    "elbo",
    "fit",
    "IrlsResult",
    "irls_fit",
    "fit_to_dict",
    "posterior_from_dict",
]


@dataclass(frozen=True)
class GaussianDistribution:
    """Mean vector and symmetric positive-definite covariance matrix."""

    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        mean = np.array(self.mean, dtype=float).reshape(-1)
        cov = np.array(self.covariance, dtype=float)
        if cov.shape != (len(mean), len(mean)):
            raise ValueError(
                f"covariance shape {cov.shape} does not match mean length {len(mean)}"
            )
        scale = max(1.0, float(np.abs(cov).max()))
        if not np.allclose(cov, cov.T, rtol=0.0, atol=1e-10 * scale):
            raise ValueError("covariance must be symmetric (tolerance 1e-10)")
        try:
            np.linalg.cholesky(cov)
        except np.linalg.LinAlgError as exc:
            raise ValueError("covariance must be positive definite") from exc
        mean.flags.writeable = False
        cov.flags.writeable = False
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)

    @property
    def dim(self) -> int:
        return len(self.mean)


def flat_prior(p: int, variance: float = 1e9) -> GaussianDistribution:
    """Zero-mean prior with diagonal covariance 1e9, the conventional 'flat' prior."""
    return GaussianDistribution(np.zeros(p), np.eye(p) * variance)


@dataclass(frozen=True)
class VariationalState:
    """Variational parameters, matched Gaussian posterior, and the bound trace."""

    xi: np.ndarray
    posterior: GaussianDistribution
    elbo: float = float("nan")
    iteration: int = 0
    elbo_trace: tuple = ()
    converged: bool = False


@dataclass(frozen=True)
class FitOptions:
    max_iterations: int = 200
    elbo_rel_tolerance: float = 1e-8
    xi_init: str = "ones"  # or "from-offsets"
    jitter: float = 1e-8

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not self.elbo_rel_tolerance > 0:
            raise ValueError("elbo_rel_tolerance must be > 0")
        if self.xi_init not in ("ones", "from-offsets"):
            raise ValueError(f"unknown xi_init {self.xi_init!r}")
        if self.jitter < 0:
            raise ValueError("jitter must be >= 0")


def lambda_xi(xi):
    """Curvature -tanh(xi/2)/(4 xi) of the tangent bound; -1/8 at xi = 0.

    Strictly increasing on xi > 0 with values in (-1/8, 0).
    """
    xi = np.asarray(xi, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(xi == 0.0, -0.125, -np.tanh(xi / 2.0) / (4.0 * xi))
    return out if out.ndim else float(out)


def gamma_xi(xi):
    """Constant term of the tangent bound, making it exact at |eta| = xi."""
    xi = np.asarray(xi, dtype=float)
    out = xi / 2.0 - np.logaddexp(0.0, xi) + 0.25 * xi * np.tanh(xi / 2.0)
    return out if out.ndim else float(out)


def log_bound(x, o, theta_eta, xi):
    """Quadratic lower bound on -log(1 + exp(eta)) at eta = x*theta_eta + o."""
    eta = np.asarray(x, dtype=float) * theta_eta + o
    out = lambda_xi(xi) * eta**2 - eta / 2.0 + gamma_xi(xi)
    return out if np.ndim(out) else float(out)


def _prior_precision(prior: GaussianDistribution):
    chol0 = cholesky(prior.covariance, lower=True)
    p = prior.dim
    prec = cho_solve((chol0, True), np.eye(p))
    prec = (prec + prec.T) / 2.0
    logdet0 = 2.0 * float(np.sum(np.log(np.diag(chol0))))
    return prec, logdet0


def _factor_precision(a, jitter):
    """Cholesky of a posterior precision matrix, retrying once with jitter."""
    try:
        return cholesky(a, lower=True)
    except np.linalg.LinAlgError:
        pass
    if jitter > 0:
        try:
            return cholesky(a + jitter * np.eye(len(a)), lower=True)
        except np.linalg.LinAlgError:
            pass
    diag = np.diag(a)
    raise NumericalError(
        "posterior precision factorization failed; diagonal range "
        f"[{diag.min():.3e}, {diag.max():.3e}], jitter {jitter:.1e}"
    )


def update_posterior(
    prior: GaussianDistribution, design: LogisticDesign, xi, jitter: float = 0.0
) -> GaussianDistribution:
    """Closed-form Gaussian posterior for fixed variational parameters.

    Precision: prior precision - 2 X' Lambda(xi) X (positive definite since
    lambda < 0). Mean: covariance @ [X'(y - 1/2 + 2 lambda*o) + prior
    precision @ prior mean].
    """
    X, y, o = design.X, design.y, design.offsets
    xi = np.asarray(xi, dtype=float).reshape(-1)
    if len(xi) != design.n_rows:
        raise ValueError(f"xi has length {len(xi)}, design has {design.n_rows} rows")
    lam = lambda_xi(xi)
    prec0, _ = _prior_precision(prior)
    a = prec0 + X.T @ (X * (-2.0 * lam)[:, None])
    a = (a + a.T) / 2.0
    b = X.T @ (y - 0.5 + 2.0 * lam * o) + prec0 @ prior.mean
    chol = _factor_precision(a, jitter)
    cov = cho_solve((chol, True), np.eye(len(a)))
    cov = (cov + cov.T) / 2.0
    mean = cho_solve((chol, True), b)
    return GaussianDistribution(mean, cov)


def update_xi(design: LogisticDesign, posterior: GaussianDistribution):
    """Tangency-point update: xi_i = sqrt(x_i' Sigma x_i + (x_i' mu + o_i)^2).

    Computed row by row; no N-by-N matrix is ever formed.
    """
    X, o = design.X, design.offsets
    s = X @ posterior.mean + o
    q = np.einsum("ij,ij->i", X @ posterior.covariance, X)
    return np.sqrt(np.maximum(q, 0.0) + s**2)


def elbo(prior: GaussianDistribution, design: LogisticDesign, state: VariationalState) -> float:
    """Closed-form evidence lower bound at the state's (xi, posterior) pair."""
    X, y, o = design.X, design.y, design.offsets
    xi = state.xi
    post = state.posterior
    prec0, logdet0 = _prior_precision(prior)
    chol_post = np.linalg.cholesky(post.covariance)
    logdet_post = 2.0 * float(np.sum(np.log(np.diag(chol_post))))
    v = solve_triangular(chol_post, post.mean, lower=True)
    quad_post = float(v @ v)
    chol0 = cholesky(prior.covariance, lower=True)
    w = solve_triangular(chol0, prior.mean, lower=True)
    quad0 = float(w @ w)
    lam = lambda_xi(xi)
    return (
        0.5 * logdet_post
        - 0.5 * logdet0
        + float(np.sum(gamma_xi(xi)))
        + 0.5 * quad_post
        - 0.5 * quad0
        + float(o @ (lam * o))
        + float((y - 0.5) @ o)
    )


def fit(
    prior: GaussianDistribution,
    design: LogisticDesign,
    options: Optional[FitOptions] = None,
) -> VariationalState:
    """EM loop: posterior update, bound evaluation, tangency update.

    Stops when the relative bound increase drops below the tolerance or
    after max_iterations (returned state flagged non-converged). The bound
    trace is non-decreasing.
    """
    options = options or FitOptions()
    if prior.dim != design.X.shape[1]:
        raise ValueError(
            f"prior dimension {prior.dim} does not match design width {design.X.shape[1]}"
        )
    if options.xi_init == "ones":
        xi = np.ones(design.n_rows)
    else:
        xi = np.abs(design.offsets).copy()
    trace = []
    converged = False
    post = None
    value = float("nan")
    for it in range(1, options.max_iterations + 1):
        post = update_posterior(prior, design, xi, jitter=options.jitter)
        value = elbo(prior, design, VariationalState(xi=xi, posterior=post))
        if not np.isfinite(value):
            raise NumericalError(f"evidence bound became non-finite at iteration {it}")
        trace.append(value)
        if it > 1:
            prev = trace[-2]
            rel = (value - prev) / max(abs(prev), 1e-300)
            if rel < options.elbo_rel_tolerance:
                converged = True
                break
        if it < options.max_iterations:
            xi = update_xi(design, post)
    return VariationalState(
        xi=xi,
        posterior=post,
        elbo=value,
        iteration=len(trace),
        elbo_trace=tuple(trace),
        converged=converged,
    )


class IrlsResult(NamedTuple):
    theta: np.ndarray
    converged: bool
    message: str


def irls_fit(design: LogisticDesign, max_iterations: int = 100, tol: float = 1e-10) -> IrlsResult:
    """Maximum-likelihood logistic regression with offsets via damped Newton.

    Serves as the non-Bayesian reference fitter. Perfect separation is
    reported through the converged flag and a diverging-norm message, not
    an exception.
    """
    X, y, o = design.X, design.y, design.offsets
    n, p = X.shape
    if n <= p:
        raise ValueError(f"need more rows than parameters, got {n} rows, {p} parameters")
    theta = np.zeros(p)

    def loglik(t):
        eta = X @ t + o
        return float(y @ eta - np.logaddexp(0.0, eta).sum())

    ll = loglik(theta)
    for _ in range(max_iterations):
        eta = X @ theta + o
        mu = expit(eta)
        w = mu * (1.0 - mu)
        grad = X.T @ (y - mu)
        hess = X.T @ (X * w[:, None])
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            return IrlsResult(theta, False, "singular information matrix")
        scale = 1.0
        for _ in range(30):
            candidate = theta + scale * step
            ll_new = loglik(candidate)
            if ll_new >= ll - 1e-12:
                break
            scale /= 2.0
        theta = theta + scale * step
        ll = ll_new
        if np.linalg.norm(theta) > 1e4:
            return IrlsResult(
                theta,
                False,
                f"coefficient norm diverging ({np.linalg.norm(theta):.3e}); "
                "data may be perfectly separated",
            )
        if np.max(np.abs(scale * step)) < tol * (1.0 + np.max(np.abs(theta))):
            return IrlsResult(theta, True, "converged")
    return IrlsResult(theta, False, "maximum iterations reached")


def fit_to_dict(state: VariationalState, options: Optional[FitOptions] = None) -> dict:
    """JSON-ready summary: posterior, bound trace, iterations, options echo."""
    out = {
        "posterior_mean": state.posterior.mean.tolist(),
        "posterior_covariance": state.posterior.covariance.tolist(),
        "elbo": state.elbo,
        "elbo_trace": list(state.elbo_trace),
        "iterations": state.iteration,
        "converged": state.converged,
    }
    if options is not None:
        out["options"] = {
            "max_iterations": options.max_iterations,
            "elbo_rel_tolerance": options.elbo_rel_tolerance,
            "xi_init": options.xi_init,
            "jitter": options.jitter,
        }
    return out


def posterior_from_dict(payload: dict) -> GaussianDistribution:
    return GaussianDistribution(
        np.asarray(payload["posterior_mean"], dtype=float),
        np.asarray(payload["posterior_covariance"], dtype=float),
    )
