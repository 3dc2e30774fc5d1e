"""Synthetic panels with known parameters, for parameter-recovery runs.

Barrier paths follow the model's own random-walk prior, dyad cutoffs come
from the ordered cutoff prior, each cell draws a unit-variance latent
value around the country-year barrier, and the three-branch decision rule
turns latent values into observation codes. The raw latent lattice is kept
so every generated code can be re-derived and checked.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DomainError
from .ffbs import EvolutionConfig
from .panel import Panel

DEFAULT_START_YEAR = 2006


@dataclass(frozen=True)
class TruthSet:
    """Ground-truth parameters behind a synthetic panel."""

    barriers: np.ndarray        # (J, T) country-year barrier levels
    report_cutoffs: np.ndarray  # (I, J)
    entry_cutoffs: np.ndarray   # (I, J)
    seed: int

    def __post_init__(self):
        if not np.all(self.entry_cutoffs > self.report_cutoffs):
            raise DomainError("entry cutoffs must exceed report cutoffs")

    @property
    def n_firms(self):
        return self.report_cutoffs.shape[0]

    @property
    def n_countries(self):
        return self.barriers.shape[0]

    @property
    def n_years(self):
        return self.barriers.shape[1]


@dataclass(frozen=True)
class SyntheticPanel:
    """A generated panel together with its truth and raw latent lattice."""

    panel: Panel
    truth: TruthSet
    latent: np.ndarray  # (I, J, T); NaN where the firm-year was blanked


def simulate_barrier_paths(n_countries, n_years, cfg, rng, signs=None):
    """Random-walk barrier paths for the data years 1..T.

    The virtual time-zero level is drawn from the configured initial
    prior and the walk starts from it, so the first returned year already
    includes one innovation. ``signs`` optionally maps country index to
    +1 or -1; constrained countries are redrawn until the whole path has
    the requested sign (for anchor-compatible fixtures).
    """
    if n_countries < 1 or n_years < 1:
        raise DomainError("need at least one country and one year")
    sd0 = np.sqrt(cfg.initial_variance)
    sdw = np.sqrt(cfg.evolution_variance)

    def draw(count):
        start = rng.normal(cfg.initial_mean, sd0, size=count)
        steps = rng.normal(0.0, sdw, size=(count, n_years))
        return start[:, None] + np.cumsum(steps, axis=1)

    paths = draw(n_countries)
    if signs:
        for j, sign in signs.items():
            while not np.all(np.sign(paths[j]) == sign):
                paths[j] = draw(1)[0]
    return paths


def simulate_decision(latent_value, report_cutoff, entry_cutoff):
    """Three-branch decision rule; broadcasts over array inputs.

    Values at or below the report cutoff give code 1, values at or below
    the entry cutoff give code 2, anything above gives code 3.
    """
    value = np.asarray(latent_value, dtype=float)
    rep = np.asarray(report_cutoff, dtype=float)
    ent = np.asarray(entry_cutoff, dtype=float)
    if not np.all(ent > rep):
        raise DomainError("entry cutoff must exceed report cutoff")
    codes = np.where(value <= rep, 1, np.where(value <= ent, 2, 3))
    if codes.ndim == 0:
        return int(codes)
    return codes.astype(np.int8)


def sample_ordered_cutoffs(n_firms, n_countries, prior_sd, rng):
    """Dyad cutoff pairs from iid normal priors, redrawn until ordered."""
    rep = rng.normal(0.0, prior_sd, size=(n_firms, n_countries))
    ent = rng.normal(0.0, prior_sd, size=(n_firms, n_countries))
    bad = ent <= rep
    while bad.any():
        n = int(bad.sum())
        rep[bad] = rng.normal(0.0, prior_sd, size=n)
        ent[bad] = rng.normal(0.0, prior_sd, size=n)
        bad = ent <= rep
    return rep, ent


def make_truth(n_firms, n_countries, n_years, seed, cfg=None, prior_sd=5.0,
               signs=None, rng=None):
    """Draw a full TruthSet from the model's own priors."""
    cfg = cfg or EvolutionConfig()
    if rng is None:
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    barriers = simulate_barrier_paths(n_countries, n_years, cfg, rng, signs=signs)
    rep, ent = sample_ordered_cutoffs(n_firms, n_countries, prior_sd, rng)
    return TruthSet(barriers, rep, ent, seed)


def simulate_dataset(n_firms, n_countries, n_years, missing_rate, seed,
                     start_year=DEFAULT_START_YEAR, signs=None, cfg=None,
                     prior_sd=5.0):
    """Truth plus generated panel from one master seed.

    The truth draw and the panel noise use independent substreams, so the
    two stages stay uncorrelated under a shared seed.
    """
    truth_child, panel_child = np.random.SeedSequence(seed).spawn(2)
    truth_rng = np.random.Generator(np.random.Philox(truth_child))
    truth = make_truth(
        n_firms, n_countries, n_years, seed,
        cfg=cfg, prior_sd=prior_sd, signs=signs, rng=truth_rng,
    )
    panel_rng = np.random.Generator(np.random.Philox(panel_child))
    return generate_panel(truth, missing_rate, panel_rng, start_year=start_year)


def generate_panel(truth, missing_rate, rng, start_year=DEFAULT_START_YEAR,
                   firms=None, countries=None):
    """Generate a panel from the truth via the decision rule.

    Each cell's latent value is the country-year barrier plus unit
    Gaussian noise; codes follow simulate_decision. Whole firm-years are
    then blanked independently at ``missing_rate``.
    """
    if not 0.0 <= missing_rate < 1.0:
        raise DomainError("missing_rate must be in [0, 1)")
    I, J, T = truth.n_firms, truth.n_countries, truth.n_years
    firms = firms or [f"f{i:04d}" for i in range(I)]
    countries = countries or [f"c{j:02d}" for j in range(J)]
    years = list(range(start_year, start_year + T))

    latent = truth.barriers[None, :, :] + rng.standard_normal((I, J, T))
    codes = simulate_decision(
        latent, truth.report_cutoffs[:, :, None], truth.entry_cutoffs[:, :, None]
    )

    if missing_rate > 0.0:
        blanked = rng.random((I, T)) < missing_rate
        codes = np.where(blanked[:, None, :], 0, codes).astype(np.int8)
        latent = np.where(blanked[:, None, :], np.nan, latent)

    panel = Panel(firms, countries, years, codes)
    return SyntheticPanel(panel=panel, truth=truth, latent=latent)


def save_truth(truth, panel, directory):
    """Write the truth next to its panel: barrier and cutoff CSVs."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    barrier_path = directory / "truth_barriers.csv"
    with barrier_path.open("w", encoding="utf-8") as fh:
        fh.write("country,year,barrier\n")
        for j, country in enumerate(panel.countries):
            for t, year in enumerate(panel.years):
                fh.write(f"{country},{year},{truth.barriers[j, t]}\n")
    cutoff_path = directory / "truth_cutoffs.csv"
    with cutoff_path.open("w", encoding="utf-8") as fh:
        fh.write("firm_id,country,report_cutoff,entry_cutoff\n")
        for i, firm in enumerate(panel.firms):
            for j, country in enumerate(panel.countries):
                fh.write(
                    f"{firm},{country},{truth.report_cutoffs[i, j]},"
                    f"{truth.entry_cutoffs[i, j]}\n"
                )
    return barrier_path, cutoff_path


def load_truth_barriers(path):
    """Read a truth barrier CSV back into country/year-keyed arrays."""
    rows = Path(path).read_text(encoding="utf-8").splitlines()
    header, data = rows[0], rows[1:]
    if header != "country,year,barrier":
        raise DomainError(f"unexpected header {header!r}")
    countries, years, values = [], [], {}
    for row in data:
        country, year, value = row.split(",")
        year = int(year)
        if country not in countries:
            countries.append(country)
        if year not in years:
            years.append(year)
        values[(country, year)] = float(value)
    barriers = np.array(
        [[values[(c, y)] for y in years] for c in countries]
    )
    return countries, years, barriers
