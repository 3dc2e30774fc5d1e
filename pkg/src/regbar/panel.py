"""Observation lattice: ingestion, validation, and sample-construction filters.

A panel is a dense firm x country x year lattice of three-valued entry /
barrier-report codes, with whole cells allowed to be missing when a firm
filed nothing that year. Code semantics:

    1  entered the country, no barrier reported
    2  entered the country and reported a barrier
    3  did not enter the country

Internally the lattice is an int8 array where 0 marks a missing cell.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path

import numpy as np

from .errors import DomainError, EmptyPanelError, IntegrityError, ParseError

MISSING = 0

CSV_HEADER = ["firm_id", "country", "year", "code"]


class ObservationCode(IntEnum):
    ENTERED_NO_REPORT = 1
    ENTERED_REPORTED = 2
    NOT_ENTERED = 3


@dataclass
class Panel:
    """Dense I x J x T lattice of observation codes.

    codes[i, j, t] is the ObservationCode value for firm i, country j,
    year t, or 0 when the cell is missing. Years must be consecutive and
    identifiers unique.
    """

    firms: list[str]
    countries: list[str]
    years: list[int]
    codes: np.ndarray

    def __post_init__(self):
        self.codes = np.asarray(self.codes, dtype=np.int8)
        self.validate()

    def validate(self):
        if len(set(self.firms)) != len(self.firms):
            raise DomainError("firm identifiers must be unique")
        if len(set(self.countries)) != len(self.countries):
            raise DomainError("country identifiers must be unique")
        if len(set(self.years)) != len(self.years):
            raise DomainError("years must be unique")
        if any(b - a != 1 for a, b in zip(self.years, self.years[1:])):
            raise DomainError("years must be consecutive and increasing")
        expected = (len(self.firms), len(self.countries), len(self.years))
        if self.codes.shape != expected:
            raise DomainError(
                f"code lattice shape {self.codes.shape} != {expected}"
            )
        bad = ~np.isin(self.codes, (MISSING, 1, 2, 3))
        if bad.any():
            raise DomainError("codes must be 1, 2, 3, or 0 for missing")

    @property
    def n_firms(self):
        return len(self.firms)

    @property
    def n_countries(self):
        return len(self.countries)

    @property
    def n_years(self):
        return len(self.years)

    @property
    def observed(self):
        """Boolean lattice of non-missing cells."""
        return self.codes != MISSING

    def equals(self, other):
        return (
            self.firms == other.firms
            and self.countries == other.countries
            and self.years == other.years
            and np.array_equal(self.codes, other.codes)
        )


@dataclass(frozen=True)
class ExclusionConfig:
    """Knobs for the sample-construction filters."""

    never_entered_threshold: float = 0.95
    top_firm_count: int = 1500
    require_consistent_presence: bool = True

    def __post_init__(self):
        if not 0 < self.never_entered_threshold <= 1:
            raise DomainError("never_entered_threshold must be in (0, 1]")
        if self.top_firm_count < 1:
            raise DomainError("top_firm_count must be >= 1")


@dataclass(frozen=True)
class PanelSummary:
    n_firms: int
    n_countries: int
    n_years: int
    code_counts: dict = field(default_factory=dict)
    missing_cells: int = 0

    def to_text(self):
        lines = [
            f"firms={self.n_firms}",
            f"countries={self.n_countries}",
            f"years={self.n_years}",
        ]
        for code, count in sorted(self.code_counts.items()):
            lines.append(f"code{code}={count}")
        lines.append(f"missing={self.missing_cells}")
        return "\n".join(lines) + "\n"


def load_panel(source):
    """Build a Panel from delimiter-separated text.

    ``source`` is a path or a file-like / iterable of CSV lines with
    header firm_id,country,year,code. Every listed (firm, year) pair
    counts as a filing; its unlisted countries default to NOT_ENTERED.
    Firm-years with no rows at all stay missing.
    """
    lines = _read_lines(source)
    reader = csv.reader(lines)
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("empty input", line_number=1) from None
    if [h.strip() for h in header] != CSV_HEADER:
        raise ParseError(
            f"expected header {','.join(CSV_HEADER)}", line_number=1
        )

    cells = {}
    filings = set()
    for lineno, row in enumerate(reader, start=2):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != 4:
            raise ParseError(f"expected 4 fields, got {len(row)}", lineno)
        firm, country, year_text, code_text = (f.strip() for f in row)
        if not firm or not country:
            raise ParseError("empty firm or country identifier", lineno)
        try:
            year = int(year_text)
        except ValueError:
            raise ParseError(f"bad year {year_text!r}", lineno) from None
        try:
            code = int(code_text)
        except ValueError:
            raise ParseError(f"bad code {code_text!r}", lineno) from None
        if code not in (1, 2, 3):
            raise DomainError(f"line {lineno}: code must be 1, 2, or 3, got {code}")
        key = (firm, country, year)
        if key in cells and cells[key] != code:
            raise IntegrityError(
                f"line {lineno}: conflicting codes for {key}: "
                f"{cells[key]} vs {code}"
            )
        cells[key] = code
        filings.add((firm, year))

    if not cells:
        raise EmptyPanelError("no data rows in input")

    firms = sorted({f for f, _, _ in cells})
    countries = sorted({c for _, c, _ in cells})
    year_values = {y for _, _, y in cells}
    years = list(range(min(year_values), max(year_values) + 1))

    firm_index = {f: i for i, f in enumerate(firms)}
    country_index = {c: j for j, c in enumerate(countries)}
    year_index = {y: t for t, y in enumerate(years)}

    codes = np.zeros((len(firms), len(countries), len(years)), dtype=np.int8)
    for firm, year in filings:
        codes[firm_index[firm], :, year_index[year]] = ObservationCode.NOT_ENTERED
    for (firm, country, year), code in cells.items():
        codes[firm_index[firm], country_index[country], year_index[year]] = code

    return Panel(firms, countries, years, codes)


def save_panel(panel, dest):
    """Write every non-missing cell as a CSV row; inverse of load_panel."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for i, firm in enumerate(panel.firms):
        for j, country in enumerate(panel.countries):
            for t, year in enumerate(panel.years):
                code = int(panel.codes[i, j, t])
                if code != MISSING:
                    writer.writerow([firm, country, year, code])
    text = buf.getvalue()
    if isinstance(dest, (str, Path)):
        Path(dest).write_text(text, encoding="utf-8")
    else:
        dest.write(text)
    return text


def apply_exclusions(panel, cfg):
    """Run the three sample-construction filters and re-index the panel.

    Order: drop countries whose never-entered firm share strictly exceeds
    the threshold, keep the most active firms (entered country-year count,
    ties broken by identifier), then optionally drop firms with any
    missing firm-year.
    """
    codes = panel.codes
    entered = (codes == 1) | (codes == 2)

    # Countries: fraction of firms that never entered, strict inequality.
    entered_ever = entered.any(axis=2)  # (I, J)
    never_frac = 1.0 - entered_ever.mean(axis=0)
    keep_j = np.flatnonzero(never_frac <= cfg.never_entered_threshold)
    if keep_j.size == 0:
        raise EmptyPanelError("country filter removed every country")

    entered = entered[:, keep_j, :]
    codes = codes[:, keep_j, :]

    # Firms: rank by entered country-year count, firm id breaks ties.
    activity = entered.sum(axis=(1, 2))
    order = sorted(range(panel.n_firms), key=lambda i: (-activity[i], panel.firms[i]))
    keep_set = set(order[: cfg.top_firm_count])

    if cfg.require_consistent_presence:
        missing_any = (codes == MISSING).any(axis=(1, 2))
        keep_set = {i for i in keep_set if not missing_any[i]}

    keep_i = np.array(sorted(keep_set), dtype=int)
    if keep_i.size == 0:
        raise EmptyPanelError("firm filters removed every firm")

    return Panel(
        [panel.firms[i] for i in keep_i],
        [panel.countries[j] for j in keep_j],
        list(panel.years),
        codes[keep_i, :, :],
    )


def summarize_panel(panel):
    """Dimension and cell-count record for a panel."""
    counts = {
        int(code): int((panel.codes == code).sum()) for code in (1, 2, 3)
    }
    return PanelSummary(
        n_firms=panel.n_firms,
        n_countries=panel.n_countries,
        n_years=panel.n_years,
        code_counts=counts,
        missing_cells=int((panel.codes == MISSING).sum()),
    )


def _read_lines(source):
    """Path-likes are opened; anything else is treated as a line stream."""
    if isinstance(source, (str, Path)):
        return Path(source).read_text(encoding="utf-8").splitlines()
    return [line.rstrip("\n") for line in source]
