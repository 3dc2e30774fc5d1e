"""Convergence diagnostics and posterior summaries over retained draws."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DomainError, ParseError

QUANTILE_LEVELS = (0.05, 0.50, 0.95)
QUANTILE_METHOD = "linear"

SUMMARY_HEADER = "country,year,mean,sd,q05,q50,q95,rhat,ess"


def split_rhat(chains):
    """Split potential-scale-reduction statistic over >= 2 chains.

    Each chain is halved (dropping one trailing draw if the length is
    odd), then the usual between/within variance ratio is computed over
    the half-chains. Degenerate cases: zero within- and between-chain
    variance gives 1.0; zero within with spread between gives +inf.
    """
    x = np.asarray(chains, dtype=float)
    if x.ndim != 2 or x.shape[0] < 2:
        raise DomainError("need >= 2 chains of draws")
    if x.shape[1] < 4:
        raise DomainError("need chain length >= 4 to split")
    half = x.shape[1] // 2
    halves = np.concatenate([x[:, :half], x[:, half : 2 * half]], axis=0)
    m, n = halves.shape
    within = halves.var(axis=1, ddof=1).mean()
    between = n * halves.mean(axis=1).var(ddof=1)
    if within == 0.0:
        return 1.0 if between == 0.0 else np.inf
    var_plus = (n - 1) / n * within + between / n
    return float(np.sqrt(var_plus / within))


def effective_sample_size(draws):
    """Autocorrelation-based ESS with Geyer's monotone pair truncation.

    Accepts one sequence of shape (n,) or a per-chain matrix (m, n); with
    several chains the between-chain spread deflates the estimate as
    usual. A constant input returns the total number of draws. The
    estimator is noisy, so values slightly above the draw count are
    possible; callers wanting a bound should clip.
    """
    x = np.atleast_2d(np.asarray(draws, dtype=float))
    m, n = x.shape
    if n < 8:
        raise DomainError("need at least 8 draws")

    acov = np.empty((m, n))
    for c in range(m):
        acov[c] = _autocovariance(x[c])
    chain_var = acov[:, 0] * n / (n - 1.0)
    within = chain_var.mean()
    if m > 1:
        var_plus = within * (n - 1.0) / n + x.mean(axis=1).var(ddof=1)
    else:
        var_plus = acov[0, 0]
    if var_plus == 0.0 or within == 0.0:
        return float(m * n)

    rho = 1.0 - (within - acov.mean(axis=0)) / var_plus
    rho[0] = 1.0

    # Geyer pairs: sum consecutive lags, keep positive, force monotone.
    tau = -1.0
    prev_pair = np.inf
    for k in range(0, n - 1, 2):
        pair = rho[k] + rho[k + 1]
        if pair <= 0.0:
            break
        pair = min(pair, prev_pair)
        tau += 2.0 * pair
        prev_pair = pair
    tau = max(tau, 1.0 / np.log10(m * n + 10.0))
    return float(m * n / tau)


@dataclass
class PosteriorSummary:
    """Per-(country, year) posterior statistics over retained draws."""

    countries: list[str]
    years: list[int]
    mean: np.ndarray
    sd: np.ndarray
    q05: np.ndarray
    q50: np.ndarray
    q95: np.ndarray
    rhat: np.ndarray
    ess: np.ndarray
    metadata: dict = field(default_factory=dict)

    def validate(self, total_draws=None):
        if not (np.all(self.q05 <= self.q50) and np.all(self.q50 <= self.q95)):
            raise DomainError("quantiles out of order")
        if np.any(self.ess <= 0):
            raise DomainError("ESS must be positive")
        if total_draws is not None and np.any(self.ess > total_draws):
            raise DomainError("ESS exceeds total draw count")
        finite = np.isfinite(self.rhat)
        if np.any(self.rhat[finite] < 1.0 - 1e-8):
            raise DomainError("R-hat below 1")

    def to_csv(self, dest):
        lines = [SUMMARY_HEADER]
        for j, country in enumerate(self.countries):
            for t, year in enumerate(self.years):
                lines.append(
                    f"{country},{year},{self.mean[j, t]},{self.sd[j, t]},"
                    f"{self.q05[j, t]},{self.q50[j, t]},{self.q95[j, t]},"
                    f"{self.rhat[j, t]},{self.ess[j, t]}"
                )
        text = "\n".join(lines) + "\n"
        if isinstance(dest, (str, Path)):
            Path(dest).write_text(text, encoding="utf-8")
        else:
            dest.write(text)
        return text

    @classmethod
    def from_csv(cls, source):
        if isinstance(source, (str, Path)):
            lines = Path(source).read_text(encoding="utf-8").splitlines()
        else:
            lines = [line.rstrip("\n") for line in source]
        if not lines or lines[0] != SUMMARY_HEADER:
            raise ParseError(f"expected header {SUMMARY_HEADER}", 1)
        countries, years, rows = [], [], {}
        for line in lines[1:]:
            if not line.strip():
                continue
            country, year, *stats = line.split(",")
            year = int(year)
            if country not in countries:
                countries.append(country)
            if year not in years:
                years.append(year)
            rows[(country, year)] = [float(v) for v in stats]
        arrays = [
            np.array([[rows[(c, y)][k] for y in years] for c in countries])
            for k in range(7)
        ]
        return cls(countries, years, *arrays)


def summarize_posterior(store):
    """Pooled posterior statistics per country-year from a draw store.

    Quantiles use linear interpolation between order statistics; R-hat
    needs at least two chains and is NaN otherwise; ESS is clipped to the
    total number of retained draws.
    """
    if store.draws.size == 0:
        raise DomainError("empty draw store")
    n_chains, n_kept, J, T = store.draws.shape
    total = n_chains * n_kept
    mean = np.empty((J, T))
    sd = np.empty((J, T))
    q05 = np.empty((J, T))
    q50 = np.empty((J, T))
    q95 = np.empty((J, T))
    rhat = np.full((J, T), np.nan)
    ess = np.empty((J, T))
    for j in range(J):
        for t in range(T):
            series = store.series(j, t)
            pooled = series.ravel()
            mean[j, t] = pooled.mean()
            sd[j, t] = pooled.std(ddof=1) if pooled.size > 1 else 0.0
            q05[j, t], q50[j, t], q95[j, t] = np.quantile(
                pooled, QUANTILE_LEVELS, method=QUANTILE_METHOD
            )
            if n_chains >= 2 and n_kept >= 4:
                rhat[j, t] = split_rhat(series)
            ess[j, t] = min(effective_sample_size(series), float(total))
    summary = PosteriorSummary(
        countries=list(store.countries),
        years=list(store.years),
        mean=mean,
        sd=sd,
        q05=q05,
        q50=q50,
        q95=q95,
        rhat=rhat,
        ess=ess,
        metadata={
            "quantile_method": QUANTILE_METHOD,
            "quantile_levels": list(QUANTILE_LEVELS),
            "draws_per_series": total,
        },
    )
    summary.validate(total_draws=total)
    return summary


def _autocovariance(x):
    """Biased autocovariance at all lags via FFT."""
    n = x.size
    centered = x - x.mean()
    size = 2 ** int(np.ceil(np.log2(2 * n)))
    spectrum = np.fft.rfft(centered, size)
    acov = np.fft.irfft(spectrum * np.conjugate(spectrum), size)[:n]
    return acov.real / n
