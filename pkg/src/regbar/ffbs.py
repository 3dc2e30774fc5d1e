"""Forward filtering and backward sampling for one country's barrier path.

The latent path follows a random walk with known innovation variance, and
each year contributes ``n_t`` unit-variance pseudo-observations whose sum
is ``s_t`` (the augmented per-firm values aggregate into these two
sufficient statistics). The filter is the scalar conjugate recursion; the
backward pass draws the whole path jointly from the smoothing
distribution, optionally restricted to a sign half-line for anchor
countries.

All functions accept statistics of shape (T,) for a single series or
(B, T) for a batch of independent series sharing the same configuration.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .distributions import TruncationInterval, sample_truncated_normal
from .errors import DomainError

ANCHOR_SIGNS = ("positive", "negative")


@dataclass(frozen=True)
class EvolutionConfig:
    """Random-walk evolution and time-zero prior for the barrier path."""

    evolution_variance: float = 1.0
    initial_mean: float = 0.0
    initial_variance: float = 25.0

    def __post_init__(self):
        if not self.evolution_variance > 0:
            raise DomainError("evolution_variance must be positive")
        if not self.initial_variance > 0:
            raise DomainError("initial_variance must be positive")


@dataclass(frozen=True)
class SliceStatistics:
    """Per-year observation count and sum of augmented latent values.

    counts[..., t] is the number of non-missing firms for the country in
    year t; sums[..., t] is the sum of their latent values. Years with a
    zero count must carry a zero sum.
    """

    counts: np.ndarray
    sums: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.counts)
        sums = np.asarray(self.sums, dtype=float)
        if counts.shape != sums.shape:
            raise DomainError("counts and sums must share a shape")
        if counts.shape[-1] < 1:
            raise DomainError("need at least one year of statistics")
        if np.any(counts < 0):
            raise DomainError("counts must be non-negative")
        if np.any(sums[counts == 0] != 0.0):
            raise DomainError("years with zero count must have zero sum")
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "sums", sums)

    @property
    def n_years(self):
        return self.counts.shape[-1]


@dataclass(frozen=True)
class FilterMoments:
    """Kalman recursion state: predicted and filtered mean/variance per year."""

    predicted_mean: np.ndarray
    predicted_var: np.ndarray
    filtered_mean: np.ndarray
    filtered_var: np.ndarray


def forward_filter(stats, cfg):
    """Run the conjugate forward recursion over the statistics.

    Each year predicts a_t = m_{t-1}, R_t = V_{t-1} + evolution variance,
    then updates with n_t unit-variance observations summing to s_t:
    1/V_t = 1/R_t + n_t and m_t = V_t (a_t / R_t + s_t). Years with no
    observations propagate the prediction unchanged.
    """
    counts = np.asarray(stats.counts, dtype=float)
    sums = np.asarray(stats.sums, dtype=float)
    w = cfg.evolution_variance
    T = counts.shape[-1]
    lead = counts.shape[:-1]

    a = np.empty(counts.shape)
    R = np.empty(counts.shape)
    m = np.empty(counts.shape)
    V = np.empty(counts.shape)

    m_prev = np.full(lead, cfg.initial_mean, dtype=float)
    v_prev = np.full(lead, cfg.initial_variance, dtype=float)
    for t in range(T):
        a[..., t] = m_prev
        R[..., t] = v_prev + w
        V[..., t] = R[..., t] / (1.0 + counts[..., t] * R[..., t])
        m[..., t] = V[..., t] * (a[..., t] / R[..., t] + sums[..., t])
        m_prev = m[..., t]
        v_prev = V[..., t]
    return FilterMoments(a, R, m, V)


def backward_sample(moments, cfg, rng):
    """Draw one full path jointly from the smoothing distribution.

    Samples the final year from its filtered posterior, then walks
    backward through the Gaussian conditionals given the year just drawn.
    The evolution variance is already baked into the predicted variances,
    so only the moments are consulted here.
    """
    return _backward_sample(moments, rng, -np.inf, np.inf)


def sample_country_path(stats, cfg, anchor, rng):
    """Filter then backward-sample; anchors restrict every draw's sign.

    anchor is None, "positive", or "negative". With an anchor set, each
    backward conditional is truncated to the corresponding half-line, so
    the whole returned path respects the sign convention.
    """
    lower, upper = anchor_bounds(anchor)
    moments = forward_filter(stats, cfg)
    return _backward_sample(moments, rng, lower, upper)


def anchor_bounds(anchor):
    """Map an anchor sign to truncation bounds for every path draw."""
    if anchor is None:
        return -np.inf, np.inf
    if anchor == "positive":
        return 0.0, np.inf
    if anchor == "negative":
        return -np.inf, 0.0
    raise DomainError(f"anchor must be one of {ANCHOR_SIGNS}, got {anchor!r}")


def _backward_sample(moments, rng, lower, upper):
    """Backward pass; lower/upper may be scalars or per-series arrays."""
    m = moments.filtered_mean
    V = moments.filtered_var
    R = moments.predicted_var
    T = m.shape[-1]

    path = np.empty(m.shape)
    path[..., T - 1] = sample_truncated_normal(
        m[..., T - 1], np.sqrt(V[..., T - 1]), TruncationInterval(lower, upper), rng
    )
    for t in range(T - 2, -1, -1):
        gain = V[..., t] / R[..., t + 1]
        mean = m[..., t] + gain * (path[..., t + 1] - moments.predicted_mean[..., t + 1])
        var = (1.0 - gain) * V[..., t]
        path[..., t] = sample_truncated_normal(
            mean, np.sqrt(var), TruncationInterval(lower, upper), rng
        )
    return path
