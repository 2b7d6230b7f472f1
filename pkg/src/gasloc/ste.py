"""Bayesian source estimation over a grid of candidate cells.

Each free interior cell is a source hypothesis.  Measured features are
compared against the features each hypothesis predicts, under a Gaussian
error model whose weight grows with the number of measurements as n/(n+1).
The posterior starts uniform (zero on obstacles and the boundary ring) and
is recomputed from that prior every iteration, because rank features
reorder the entire measurement history whenever new data arrives.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .world import Cell, Environment, ValidationError

CONTINUE = "continue"
CONVERGED = "converged"
MAX_ITER = "max_iter"

# default feature-error std devs; residuals of hit features are in {-1,0,1},
# rank residuals in (-1, 1).  The value feature has no natural scale -- its
# sigma must come from the data scale (see noise_for).
DEFAULT_SIGMA = {"fixed_hit": 0.3, "adaptive_hit": 0.3, "rank": 0.2}


class EstimationError(RuntimeError):
    """Degenerate posterior: prior support and likelihood mass are disjoint."""


@dataclass(frozen=True)
class NoiseModel:
    """Std devs of the measured-feature and estimated-feature errors."""

    sigma_M: float
    sigma_E: float

    def __post_init__(self):
        if self.sigma_M < 0 or self.sigma_E < 0:
            raise ValidationError("noise std devs must be >= 0")
        if self.combined_variance <= 0:
            raise ValidationError("sigma_M^2 + sigma_E^2 must be > 0")

    @property
    def combined_variance(self) -> float:
        return self.sigma_M**2 + self.sigma_E**2


def noise_for(feature_kind: str, value_scale: float | None = None) -> NoiseModel:
    """Default noise model per feature kind.

    The value feature compares raw magnitudes, so its sigma is set from the
    scale of the data at hand (pass e.g. a fraction of the field maximum).
    """
    if feature_kind == "value":
        if value_scale is None or value_scale <= 0:
            raise ValidationError("value feature needs a positive value_scale")
        return NoiseModel(sigma_M=value_scale, sigma_E=value_scale)
    if feature_kind not in DEFAULT_SIGMA:
        raise ValidationError(f"unknown feature kind {feature_kind!r}")
    s = DEFAULT_SIGMA[feature_kind]
    return NoiseModel(sigma_M=s, sigma_E=s)


class Posterior:
    """Probability grid over cells, zero outside the hypothesis support."""

    __slots__ = ("probability",)

    def __init__(self, probability: np.ndarray):
        p = np.asarray(probability, dtype=float)
        if p.ndim != 2:
            raise ValidationError("posterior grid must be 2-D")
        p = p.copy()
        p.setflags(write=False)
        self.probability = p

    @property
    def entropy(self) -> float:
        p = self.probability[self.probability > 0]
        return float(-np.sum(p * np.log(p)))

    @property
    def argmax_cell(self) -> Cell:
        flat = int(np.argmax(self.probability))  # first max = lowest index
        row, col = divmod(flat, self.probability.shape[1])
        return (col, row)

    def validate(self, support: np.ndarray | None = None) -> None:
        p = self.probability
        if np.any(p < 0):
            raise ValidationError("negative probability")
        total = float(p.sum())
        if abs(total - 1.0) > 1e-12:
            raise ValidationError(f"posterior sums to {total!r}, not 1")
        if support is not None and np.any(p[~support] != 0.0):
            raise ValidationError("probability mass outside the support")
        n = int(np.count_nonzero(p)) if support is None else int(support.sum())
        if not -1e-12 <= self.entropy <= math.log(max(n, 1)) + 1e-12:
            raise ValidationError("entropy outside [0, log n]")


def make_prior(env: Environment) -> Posterior:
    """Uniform prior over free interior cells, zero elsewhere."""
    support = env.interior_mask()
    n = int(support.sum())
    if n == 0:
        raise ValidationError("environment has no interior free cells")
    p = np.where(support, 1.0 / n, 0.0)
    return Posterior(p)


def log_likelihood(M, E_j, noise: NoiseModel, n: int | None = None) -> float:
    """Log of the measurement likelihood for one hypothesis, up to a constant.

    -(1/2) * sum_i (n/(n+1)) * (e_i - m_i)^2 / (sigma_E^2 + sigma_M^2);
    the damping factor n/(n+1) softens early updates when few measurements
    exist.
    """
    m = np.asarray(M, dtype=float)
    e = np.asarray(E_j, dtype=float)
    if m.ndim != 1 or m.shape != e.shape:
        raise ValidationError("feature sequences must be 1-D and equal length")
    if n is None:
        n = m.size
    if n < 1:
        raise ValidationError("need at least one measurement")
    w = n / (n + 1.0)
    return float(-0.5 * w * np.sum((e - m) ** 2) / noise.combined_variance)


def log_likelihood_many(M, E, noise: NoiseModel, n: int | None = None) -> np.ndarray:
    """Log-likelihood for a stack of hypotheses: E is (N, n), M is (n,)."""
    m = np.asarray(M, dtype=float)
    e = np.asarray(E, dtype=float)
    if e.ndim != 2 or m.ndim != 1 or e.shape[1] != m.size:
        raise ValidationError("expected E of shape (N, n) and M of shape (n,)")
    if n is None:
        n = m.size
    if n < 1:
        raise ValidationError("need at least one measurement")
    w = n / (n + 1.0)
    resid = e - m[None, :]
    return -0.5 * w * np.einsum("ij,ij->i", resid, resid) / noise.combined_variance


def update_posterior(prior: Posterior, log_likelihoods: np.ndarray) -> Posterior:
    """posterior_j ∝ prior_j * exp(log_likelihood_j), renormalized.

    Stabilized by subtracting the max log-likelihood over the support before
    exponentiating.  Cells with zero prior stay exactly zero.
    """
    ll = np.asarray(log_likelihoods, dtype=float)
    if ll.shape != prior.probability.shape:
        raise ValidationError("log-likelihood grid shape mismatch")
    support = prior.probability > 0
    if not np.all(np.isfinite(ll[support])):
        raise ValidationError("non-finite log-likelihood on a support cell")
    out = np.zeros_like(prior.probability)
    shifted = ll[support] - ll[support].max()
    out[support] = prior.probability[support] * np.exp(shifted)
    total = out.sum()
    if not total > 0:
        raise EstimationError("posterior vanished: prior and likelihood disjoint")
    out /= total
    return Posterior(out)


@dataclass(frozen=True)
class TerminationConfig:
    """None fields are resolved against a concrete environment."""

    entropy_threshold: float | None = None    # default 0.1 * log(n_support)
    confinement_radius: float | None = None   # meters; default 4 cell diagonals
    max_iterations: int = 30
    mass_fraction: float = 0.9
    cell_size: float | None = None

    def resolved(self, env: Environment, n_support: int) -> "TerminationConfig":
        return replace(
            self,
            entropy_threshold=(self.entropy_threshold if self.entropy_threshold is not None
                               else 0.1 * math.log(n_support)),
            confinement_radius=(self.confinement_radius if self.confinement_radius is not None
                                else 4.0 * math.sqrt(2.0) * env.cell_size),
            cell_size=env.cell_size,
        )


def mass_bounding_diagonal(posterior: Posterior, mass_fraction: float, cell_size: float) -> float:
    """Diagonal (meters) of the bounding box of the smallest set of
    highest-probability cells that jointly hold >= mass_fraction of mass."""
    p = posterior.probability.ravel()
    order = np.argsort(p)[::-1]
    csum = np.cumsum(p[order])
    k = int(np.searchsorted(csum, mass_fraction)) + 1
    chosen = order[:k]
    w = posterior.probability.shape[1]
    rows, cols = divmod(chosen, w)
    dx = (cols.max() - cols.min()) * cell_size
    dy = (rows.max() - rows.min()) * cell_size
    return float(math.hypot(dx, dy))


def check_termination(posterior: Posterior, iteration: int, config: TerminationConfig) -> str:
    """One of CONTINUE, CONVERGED, MAX_ITER.

    Converged requires BOTH low entropy and spatial confinement of the
    high-probability region.
    """
    if config.entropy_threshold is None or config.confinement_radius is None \
            or config.cell_size is None:
        raise ValidationError("termination config not resolved against an environment")
    if posterior.entropy < config.entropy_threshold:
        diag = mass_bounding_diagonal(posterior, config.mass_fraction, config.cell_size)
        if diag < config.confinement_radius:
            return CONVERGED
    if iteration >= config.max_iterations:
        return MAX_ITER
    return CONTINUE


def estimate_source(posterior: Posterior) -> Cell:
    """The highest-probability cell; ties go to the lowest cell index."""
    return posterior.argmax_cell
