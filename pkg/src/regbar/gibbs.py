"""The full sampler: latent augmentation, cutoff updates, barrier paths.

A sweep visits three blocks in fixed order, each a draw from its exact
full conditional:

  (a) every non-missing cell's latent value, from a unit-variance normal
      around the country-year barrier truncated to the region its
      observation code allows under the current cutoffs;
  (b) every dyad's report and entry cutoffs, from their normal priors
      truncated to the interval pinned down by the dyad's latent values
      (and by each other, realizing the ordered joint prior);
  (c) every country's barrier path, jointly via the forward filter and
      backward sampler, with anchor countries' draws restricted to their
      half-line.

All blocks are vectorized over cells / dyads / countries; chains draw from
independent counter-based substreams of one master seed, so runs are
bit-reproducible regardless of scheduling.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .distributions import TruncationInterval, sample_truncated_normal
from .errors import DomainError, EmptyPanelError, InternalStateError, ParseError
from .ffbs import (
    ANCHOR_SIGNS,
    EvolutionConfig,
    SliceStatistics,
    forward_filter,
    _backward_sample,
)
from .panel import MISSING, Panel

DEFAULT_ANCHORS = {"Russia": "positive", "Singapore": "negative"}

THETA_UPDATES = ("ffbs", "single_site")


@dataclass(frozen=True)
class CutoffPair:
    """One dyad's report and entry cutoffs; entry strictly above report."""

    report: float
    entry: float

    def __post_init__(self):
        if not self.entry > self.report:
            raise DomainError(
                f"entry cutoff must exceed report cutoff "
                f"({self.entry} <= {self.report})"
            )


@dataclass(frozen=True)
class PriorConfig:
    """Priors and identification settings for one fit.

    anchors maps country name to "positive" or "negative". Left as None,
    the conventional pair (Russia positive, Singapore negative) is applied
    to whichever of the two appears in the panel; an explicit mapping must
    name countries that exist in the panel.
    """

    cutoff_prior_sd: float = 5.0
    evolution: EvolutionConfig = field(default_factory=EvolutionConfig)
    anchors: dict | None = None
    observation_variance: float = 1.0

    def __post_init__(self):
        if not self.cutoff_prior_sd > 0:
            raise DomainError("cutoff_prior_sd must be positive")
        if self.observation_variance != 1.0:
            raise DomainError(
                "observation_variance is fixed at 1.0; the model's scale "
                "identification depends on it"
            )
        if self.anchors is not None:
            for sign in self.anchors.values():
                if sign not in ANCHOR_SIGNS:
                    raise DomainError(f"anchor sign must be one of {ANCHOR_SIGNS}")

    def resolve_anchors(self, panel):
        """Country-name -> sign map restricted/validated against a panel."""
        if self.anchors is None:
            return {
                name: sign
                for name, sign in DEFAULT_ANCHORS.items()
                if name in panel.countries
            }
        missing = [c for c in self.anchors if c not in panel.countries]
        if missing:
            raise DomainError(f"anchor countries not in panel: {missing}")
        return dict(self.anchors)


@dataclass(frozen=True)
class SamplerConfig:
    """Chain schedule: counts, burn-in, thinning, master seed."""

    n_chains: int = 2
    n_sweeps: int = 2000
    burn_in: int = 500
    thin: int = 2
    seed: int = 0
    keep_cutoffs: bool = False
    theta_update: str = "ffbs"

    def __post_init__(self):
        if self.n_chains < 1:
            raise DomainError("n_chains must be >= 1")
        if self.n_sweeps < 1:
            raise DomainError("n_sweeps must be >= 1")
        if not 0 <= self.burn_in < self.n_sweeps:
            raise DomainError("burn_in must satisfy 0 <= burn_in < n_sweeps")
        if self.thin < 1:
            raise DomainError("thin must be >= 1")
        if self.theta_update not in THETA_UPDATES:
            raise DomainError(f"theta_update must be one of {THETA_UPDATES}")

    def kept_sweeps(self):
        return [
            s
            for s in range(1, self.n_sweeps + 1)
            if s > self.burn_in and (s - self.burn_in - 1) % self.thin == 0
        ]


@dataclass
class ChainState:
    """One chain's current parameter values and random stream."""

    barriers: np.ndarray        # (J, T)
    latent: np.ndarray          # (I, J, T); NaN at missing cells
    report_cutoffs: np.ndarray  # (I, J)
    entry_cutoffs: np.ndarray   # (I, J)
    rng: np.random.Generator
    sweep_index: int = 0


def sample_latent(code, barrier, report_cutoff, entry_cutoff, rng):
    """Latent value(s) from N(barrier, 1) truncated to the code's region.

    Code 1 lives below the report cutoff, code 2 between the cutoffs,
    code 3 above the entry cutoff. Broadcasts over array inputs.
    """
    code = np.asarray(code)
    rep = np.asarray(report_cutoff, dtype=float)
    ent = np.asarray(entry_cutoff, dtype=float)
    lower = np.where(code == 1, -np.inf, np.where(code == 2, rep, ent))
    upper = np.where(code == 1, rep, np.where(code == 2, ent, np.inf))
    return sample_truncated_normal(
        barrier, 1.0, TruncationInterval(lower, upper), rng
    )


def sample_report_cutoff(codes, latent, entry_cutoff, prior, rng):
    """One dyad's report cutoff given its history and entry cutoff.

    The prior normal is truncated to (max latent over code-1 years,
    min latent over code-2 years) intersected with everything below the
    entry cutoff; empty code sets contribute infinite bounds.
    """
    codes = np.asarray(codes)
    latent = np.asarray(latent, dtype=float)
    lower = _masked_max(latent, codes == 1)
    upper = min(_masked_min(latent, codes == 2), float(entry_cutoff))
    if not lower < upper:
        raise InternalStateError(
            f"empty report-cutoff interval [{lower}, {upper})"
        )
    return sample_truncated_normal(
        0.0, prior.cutoff_prior_sd, TruncationInterval(lower, upper), rng
    )


def sample_entry_cutoff(codes, latent, report_cutoff, prior, rng):
    """Mirror of sample_report_cutoff for the entry cutoff.

    Truncates the prior to (max latent over code-2 years, min latent over
    code-3 years) intersected with everything above the report cutoff.
    """
    codes = np.asarray(codes)
    latent = np.asarray(latent, dtype=float)
    lower = max(_masked_max(latent, codes == 2), float(report_cutoff))
    upper = _masked_min(latent, codes == 3)
    if not lower < upper:
        raise InternalStateError(
            f"empty entry-cutoff interval [{lower}, {upper})"
        )
    return sample_truncated_normal(
        0.0, prior.cutoff_prior_sd, TruncationInterval(lower, upper), rng
    )


def init_chain_state(panel, prior, rng):
    """Deterministic starting point plus one latent-augmentation pass.

    Barriers start at zero and every dyad at cutoffs (-1, +1), which
    satisfy the ordering invariant for any panel; the latent lattice is
    then filled by one pass of its conditional.
    """
    I, J, T = panel.n_firms, panel.n_countries, panel.n_years
    state = ChainState(
        barriers=np.zeros((J, T)),
        latent=np.full((I, J, T), np.nan),
        report_cutoffs=np.full((I, J), -1.0),
        entry_cutoffs=np.full((I, J), 1.0),
        rng=rng,
    )
    _update_latent(state, panel)
    return state


def gibbs_sweep(state, panel, prior, theta_update="ffbs"):
    """One full scan: latent values, cutoffs, barrier paths."""
    _update_latent(state, panel)
    _update_cutoffs(state, panel, prior)
    _update_barriers(state, panel, prior, theta_update)
    state.sweep_index += 1
    return state


def run_chains(panel, prior, cfg, n_workers=1):
    """Run the configured chains and collect retained draws.

    Each chain owns an independent substream spawned from the master
    seed, so results are identical whether chains run serially or in
    parallel worker processes.
    """
    if panel.n_firms == 0 or panel.n_countries == 0 or panel.n_years == 0:
        raise EmptyPanelError("cannot fit an empty panel")
    prior.resolve_anchors(panel)  # validate before any work
    children = np.random.SeedSequence(cfg.seed).spawn(cfg.n_chains)
    args = [(panel, prior, cfg, child) for child in children]
    if n_workers > 1 and cfg.n_chains > 1:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            results = list(pool.map(_run_single_chain_star, args))
    else:
        results = [_run_single_chain_star(a) for a in args]

    draws = np.stack([r[0] for r in results])
    cutoff_draws = None
    if cfg.keep_cutoffs:
        cutoff_draws = np.stack([r[1] for r in results])
    return DrawStore(
        countries=list(panel.countries),
        years=list(panel.years),
        draws=draws,
        kept_sweeps=cfg.kept_sweeps(),
        cutoff_draws=cutoff_draws,
        firms=list(panel.firms) if cfg.keep_cutoffs else None,
    )


@dataclass
class DrawStore:
    """Retained draws across chains.

    draws has shape (n_chains, n_kept, J, T); cutoff draws, when retained,
    have shape (n_chains, n_kept, I, J, 2) with report before entry.
    """

    countries: list[str]
    years: list[int]
    draws: np.ndarray
    kept_sweeps: list[int]
    cutoff_draws: np.ndarray | None = None
    firms: list[str] | None = None

    @property
    def n_chains(self):
        return self.draws.shape[0]

    @property
    def n_kept(self):
        return self.draws.shape[1]

    def pooled(self):
        """All chains' draws stacked: (n_chains * n_kept, J, T)."""
        return self.draws.reshape(-1, *self.draws.shape[2:])

    def series(self, j, t):
        """Per-chain draw matrix (n_chains, n_kept) for one country-year."""
        return self.draws[:, :, j, t]

    def to_csv(self, dest):
        text_lines = ["chain,sweep,country,year,theta"]
        for c in range(self.n_chains):
            for k, sweep in enumerate(self.kept_sweeps):
                for j, country in enumerate(self.countries):
                    for t, year in enumerate(self.years):
                        text_lines.append(
                            f"{c},{sweep},{country},{year},{self.draws[c, k, j, t]}"
                        )
        text = "\n".join(text_lines) + "\n"
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
        if not lines or lines[0] != "chain,sweep,country,year,theta":
            raise ParseError("expected header chain,sweep,country,year,theta", 1)
        chains, sweeps, countries, years = [], [], [], []
        values = {}
        for lineno, line in enumerate(lines[1:], start=2):
            if not line.strip():
                continue
            parts = line.split(",")
            if len(parts) != 5:
                raise ParseError(f"expected 5 fields, got {len(parts)}", lineno)
            c, sweep, country, year, value = parts
            c, sweep, year = int(c), int(sweep), int(year)
            if c not in chains:
                chains.append(c)
            if sweep not in sweeps:
                sweeps.append(sweep)
            if country not in countries:
                countries.append(country)
            if year not in years:
                years.append(year)
            values[(c, sweep, country, year)] = float(value)
        draws = np.array(
            [
                [
                    [[values[(c, s, j, t)] for t in years] for j in countries]
                    for s in sweeps
                ]
                for c in chains
            ]
        )
        return cls(
            countries=countries, years=years, draws=draws, kept_sweeps=sweeps
        )


def latent_regions_hold(state, panel):
    """True when every latent value sits in its code's region.

    Holds by construction immediately after the latent block of a sweep,
    under the cutoffs current at that draw.
    """
    codes = panel.codes
    u = state.latent
    rep = state.report_cutoffs[:, :, None]
    ent = state.entry_cutoffs[:, :, None]
    ok1 = (codes != 1) | (u <= rep)
    ok2 = (codes != 2) | ((u > rep) & (u <= ent))
    ok3 = (codes != 3) | (u > ent)
    obs = codes != MISSING
    return bool(np.all(ok1[obs]) and np.all(ok2[obs]) and np.all(ok3[obs]))


def cutoffs_ordered(state):
    return bool(np.all(state.entry_cutoffs > state.report_cutoffs))


def slice_statistics(state, panel):
    """Sufficient statistics for the barrier block from the current state."""
    obs = panel.codes != MISSING
    counts = obs.sum(axis=0)
    sums = np.where(obs, state.latent, 0.0).sum(axis=0)
    return SliceStatistics(counts, sums)


# ---------------------------------------------------------------------------
# sweep internals (vectorized over cells / dyads / countries)


def _update_latent(state, panel):
    codes = panel.codes
    obs = codes != MISSING
    rep = np.broadcast_to(state.report_cutoffs[:, :, None], codes.shape)
    ent = np.broadcast_to(state.entry_cutoffs[:, :, None], codes.shape)
    mean = np.broadcast_to(state.barriers[None, :, :], codes.shape)
    state.latent[obs] = sample_latent(
        codes[obs], mean[obs], rep[obs], ent[obs], state.rng
    )


def _update_cutoffs(state, panel, prior):
    codes = panel.codes
    u = state.latent
    max_u1 = _masked_max(u, codes == 1, axis=2)
    min_u2 = _masked_min(u, codes == 2, axis=2)
    max_u2 = _masked_max(u, codes == 2, axis=2)
    min_u3 = _masked_min(u, codes == 3, axis=2)

    lower = max_u1
    upper = np.minimum(min_u2, state.entry_cutoffs)
    if not np.all(lower < upper):
        raise InternalStateError("empty report-cutoff interval in sweep")
    state.report_cutoffs = sample_truncated_normal(
        0.0, prior.cutoff_prior_sd, TruncationInterval(lower, upper), state.rng
    )

    lower = np.maximum(max_u2, state.report_cutoffs)
    upper = min_u3
    if not np.all(lower < upper):
        raise InternalStateError("empty entry-cutoff interval in sweep")
    state.entry_cutoffs = sample_truncated_normal(
        0.0, prior.cutoff_prior_sd, TruncationInterval(lower, upper), state.rng
    )


def _anchor_bound_arrays(panel, prior):
    J = panel.n_countries
    lower = np.full(J, -np.inf)
    upper = np.full(J, np.inf)
    for name, sign in prior.resolve_anchors(panel).items():
        j = panel.countries.index(name)
        if sign == "positive":
            lower[j] = 0.0
        else:
            upper[j] = 0.0
    return lower, upper


def _update_barriers(state, panel, prior, theta_update):
    stats = slice_statistics(state, panel)
    lower, upper = _anchor_bound_arrays(panel, prior)
    if theta_update == "ffbs":
        moments = forward_filter(stats, prior.evolution)
        state.barriers = _backward_sample(moments, state.rng, lower, upper)
    elif theta_update == "single_site":
        _single_site_barrier_scan(state, stats, prior.evolution, lower, upper)
    else:
        raise DomainError(f"unknown theta_update {theta_update!r}")


def _single_site_barrier_scan(state, stats, evo, lower, upper):
    """Component-wise barrier update: one year at a time, both neighbors.

    Baseline sampler used to quantify what the joint path draw buys. Each
    year draws from its exact full conditional given the adjacent years,
    scanning forward; the virtual time-zero state is marginalized into
    the first year's prior term.
    """
    counts = np.asarray(stats.counts, dtype=float)
    sums = np.asarray(stats.sums, dtype=float)
    w = evo.evolution_variance
    T = counts.shape[-1]
    b = state.barriers
    for t in range(T):
        prec = counts[:, t].copy()
        num = sums[:, t].copy()
        if t == 0:
            prec += 1.0 / (evo.initial_variance + w)
            num += evo.initial_mean / (evo.initial_variance + w)
        else:
            prec += 1.0 / w
            num += b[:, t - 1] / w
        if t < T - 1:
            prec += 1.0 / w
            num += b[:, t + 1] / w
        b[:, t] = sample_truncated_normal(
            num / prec, np.sqrt(1.0 / prec), TruncationInterval(lower, upper),
            state.rng,
        )


def _run_single_chain_star(args):
    return _run_single_chain(*args)


def _run_single_chain(panel, prior, cfg, seed_seq):
    rng = np.random.Generator(np.random.Philox(seed_seq))
    state = init_chain_state(panel, prior, rng)
    kept = cfg.kept_sweeps()
    kept_set = set(kept)
    draws = np.empty((len(kept), panel.n_countries, panel.n_years))
    cutoffs = None
    if cfg.keep_cutoffs:
        cutoffs = np.empty((len(kept), panel.n_firms, panel.n_countries, 2))
    k = 0
    for s in range(1, cfg.n_sweeps + 1):
        gibbs_sweep(state, panel, prior, theta_update=cfg.theta_update)
        if s in kept_set:
            draws[k] = state.barriers
            if cutoffs is not None:
                cutoffs[k, :, :, 0] = state.report_cutoffs
                cutoffs[k, :, :, 1] = state.entry_cutoffs
            k += 1
    return draws, cutoffs


def _masked_max(values, mask, axis=None):
    """Max over masked entries; -inf where the mask selects nothing."""
    return np.where(mask, values, -np.inf).max(axis=axis)


def _masked_min(values, mask, axis=None):
    """Min over masked entries; +inf where the mask selects nothing."""
    return np.where(mask, values, np.inf).min(axis=axis)
