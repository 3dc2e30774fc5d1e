"""Build the observation panel from filing text.

Pipeline: split each filing into sentences, keep sentences that mention
both a regulation-related dictionary term and a country, attach external
classifier labels to those candidates, then aggregate to firm-country-year
codes: 2 when any positive-labeled candidate mentions the country, else 1
when the filing mentions the country anywhere, else 3.

The classifier itself is a pluggable boundary: labels arrive as a
sentence_id -> {0, 1} mapping (an always-zero baseline ships for pipeline
testing). Dictionary and gazetteer are editable plain-text files.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ConfigError, CoverageError, DomainError, ParseError
from .panel import ObservationCode, Panel

DEFAULT_DICTIONARY = (
    "regulation",
    "regulator",
    "regulatory",
    "law",
    "standard",
    "quota",
    "approval",
    "policy",
    "intellectual property",
    "requirement",
    "permit",
    "license",
)

# Trailing tokens (lowercased, with their dot) that suppress a sentence
# split after a period.
DEFAULT_ABBREVIATIONS = frozenset(
    {
        "inc.", "corp.", "co.", "ltd.", "llc.", "u.s.", "u.s.a.", "u.k.",
        "no.", "nos.", "mr.", "mrs.", "ms.", "dr.", "jr.", "sr.", "st.",
        "vs.", "etc.", "e.g.", "i.e.", "approx.", "dept.", "gov.", "prof.",
    }
)

_SPLIT_POINT = re.compile(r"[.!?]+(?=\s+[A-Z0-9])")
_TRAILING_TOKEN = re.compile(r"\S+\Z")


@dataclass(frozen=True)
class FilingDocument:
    """One firm-year filing's raw text."""

    firm_id: str
    year: int
    raw_text: str

    def __post_init__(self):
        if not self.firm_id:
            raise DomainError("firm_id must be non-empty")
        if not self.raw_text.strip():
            raise DomainError(f"empty filing text for {self.firm_id}/{self.year}")

    @property
    def doc_id(self):
        return f"{self.firm_id}_{self.year}"


@dataclass(frozen=True)
class Sentence:
    doc_id: str
    firm_id: str
    year: int
    ordinal: int
    text: str

    @property
    def sentence_id(self):
        return f"{self.doc_id}:{self.ordinal:04d}"


@dataclass(frozen=True)
class CandidateSentence:
    """A sentence that passed both the term and the country filter."""

    doc_id: str
    firm_id: str
    year: int
    ordinal: int
    text: str
    matched_terms: tuple
    matched_countries: tuple
    label: int | None = None

    def __post_init__(self):
        if not self.matched_terms or not self.matched_countries:
            raise DomainError("candidate sentences must match a term and a country")

    @property
    def sentence_id(self):
        return f"{self.doc_id}:{self.ordinal:04d}"


@dataclass(frozen=True)
class ConfusionCounts:
    true_positive: int
    false_positive: int
    false_negative: int
    true_negative: int

    def __post_init__(self):
        for name in ("true_positive", "false_positive", "false_negative", "true_negative"):
            if getattr(self, name) < 0:
                raise DomainError(f"{name} must be non-negative")

    @property
    def total(self):
        return (
            self.true_positive
            + self.false_positive
            + self.false_negative
            + self.true_negative
        )


@dataclass(frozen=True)
class ClassifierMetrics:
    """Rates under the standard conventions, recorded in the metadata.

    A rate whose denominator is zero is reported as None.
    """

    total_error_rate: float
    false_positive_rate: float | None
    false_negative_rate: float | None
    accuracy: float
    metadata: dict = field(default_factory=dict)

    def to_text(self):
        def fmt(v):
            return "undefined" if v is None else f"{v}"

        return (
            f"total_error_rate={self.total_error_rate}\n"
            f"false_positive_rate={fmt(self.false_positive_rate)}\n"
            f"false_negative_rate={fmt(self.false_negative_rate)}\n"
            f"accuracy={self.accuracy}\n"
            f"conventions={self.metadata.get('conventions', '')}\n"
        )


class Gazetteer:
    """Country-alias table with word-boundary matching.

    Aliases written in all capitals (e.g. "UK") match case-sensitively so
    ordinary words like "us" cannot fire; everything else matches
    case-insensitively. Multi-word aliases tolerate any whitespace run.
    """

    def __init__(self, entries):
        if not entries:
            raise ConfigError("gazetteer has no entries")
        self.entries = {canon: list(aliases) for canon, aliases in entries.items()}
        self._patterns = []
        for canon, aliases in self.entries.items():
            for alias in aliases:
                self._patterns.append((self._compile(alias), canon))

    @staticmethod
    def _compile(alias):
        body = r"\s+".join(re.escape(part) for part in alias.split())
        pattern = rf"(?<!\w){body}(?!\w)"
        letters = [c for c in alias if c.isalpha()]
        case_sensitive = bool(letters) and all(c.isupper() for c in letters)
        return re.compile(pattern, 0 if case_sensitive else re.IGNORECASE)

    def match(self, text):
        """Canonical names of every country the text mentions, sorted."""
        found = {canon for pattern, canon in self._patterns if pattern.search(text)}
        return sorted(found)

    @classmethod
    def from_file(cls, path):
        entries = {}
        for lineno, line in enumerate(
            Path(path).read_text(encoding="utf-8").splitlines(), start=1
        ):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = [p.strip() for p in line.split("|")]
            if not parts[0]:
                raise ParseError("gazetteer line has empty canonical name", lineno)
            entries[parts[0]] = [p for p in parts if p]
        return cls(entries)

    @classmethod
    def default(cls):
        with resources.as_file(
            resources.files("regbar.data").joinpath("gazetteer.txt")
        ) as path:
            return cls.from_file(path)


def split_sentences(doc, abbreviations=DEFAULT_ABBREVIATIONS):
    """Order-preserving sentence list for one filing.

    Splits after sentence-final punctuation followed by whitespace and an
    uppercase letter or digit, unless the token ending at a period is a
    known abbreviation. Text without such punctuation comes back as a
    single sentence; ordinals count from 0.
    """
    text = doc.raw_text
    cuts = []
    for m in _SPLIT_POINT.finditer(text):
        if text[m.end() - 1] == ".":
            token = _TRAILING_TOKEN.search(text[: m.end()])
            word = token.group(0).lstrip("([{\"'").lower()
            if word in abbreviations:
                continue
        cuts.append(m.end())
    pieces = []
    start = 0
    for cut in cuts:
        pieces.append(text[start:cut])
        start = cut
    pieces.append(text[start:])
    sentences = []
    for piece in pieces:
        stripped = piece.strip()
        if stripped:
            sentences.append(
                Sentence(doc.doc_id, doc.firm_id, doc.year, len(sentences), stripped)
            )
    return sentences


def filter_candidates(sentences, dictionary=None, gazetteer=None):
    """Keep sentences matching >= 1 dictionary term and >= 1 country.

    Terms match case-insensitively on word boundaries with simple plural
    folding (laws -> law, policies -> policy); multi-word terms match as
    phrases. Matches are recorded as the canonical term and country names.
    """
    terms = tuple(dictionary) if dictionary is not None else DEFAULT_DICTIONARY
    if not terms:
        raise ConfigError("dictionary is empty")
    gaz = gazetteer if gazetteer is not None else Gazetteer.default()
    patterns = [(re.compile(_term_pattern(t), re.IGNORECASE), t) for t in terms]

    candidates = []
    for s in sentences:
        matched_terms = tuple(t for pattern, t in patterns if pattern.search(s.text))
        if not matched_terms:
            continue
        countries = tuple(gaz.match(s.text))
        if not countries:
            continue
        candidates.append(
            CandidateSentence(
                doc_id=s.doc_id,
                firm_id=s.firm_id,
                year=s.year,
                ordinal=s.ordinal,
                text=s.text,
                matched_terms=matched_terms,
                matched_countries=countries,
            )
        )
    return candidates


def merge_labels(candidates, predictions):
    """Attach external 0/1 labels to candidates by sentence id."""
    missing = [c.sentence_id for c in candidates if c.sentence_id not in predictions]
    if missing:
        raise CoverageError(
            f"predictions missing for {len(missing)} sentence(s): "
            + ", ".join(missing[:10])
            + ("..." if len(missing) > 10 else "")
        )
    labeled = []
    for c in candidates:
        label = predictions[c.sentence_id]
        if label not in (0, 1):
            raise DomainError(
                f"label for {c.sentence_id} must be 0 or 1, got {label!r}"
            )
        labeled.append(replace(c, label=int(label)))
    return labeled


def index_country_mentions(docs, gazetteer=None):
    """Per filing, every country its full text mentions anywhere."""
    gaz = gazetteer if gazetteer is not None else Gazetteer.default()
    return {(doc.firm_id, doc.year): set(gaz.match(doc.raw_text)) for doc in docs}


def aggregate_to_panel(labeled, mention_index, countries=None):
    """Document-level aggregation of labeled candidates into a Panel.

    Every filing in the mention index becomes a firm-year; a country gets
    code 2 there if any positive candidate mentions it, code 1 if the
    filing mentions it at all, code 3 otherwise. The country universe
    defaults to everything mentioned anywhere in the corpus.
    """
    if not mention_index:
        raise DomainError("no filings to aggregate")
    unlabeled = [c.sentence_id for c in labeled if c.label is None]
    if unlabeled:
        raise DomainError(f"candidates missing labels: {unlabeled[:5]}")

    if countries is None:
        mentioned = set()
        for names in mention_index.values():
            mentioned.update(names)
        countries = sorted(mentioned)
    else:
        countries = list(countries)
    if not countries:
        raise DomainError("no countries mentioned and none supplied")

    firms = sorted({firm for firm, _ in mention_index})
    filing_years = [year for _, year in mention_index]
    years = list(range(min(filing_years), max(filing_years) + 1))
    firm_idx = {f: i for i, f in enumerate(firms)}
    country_idx = {c: j for j, c in enumerate(countries)}
    year_idx = {y: t for t, y in enumerate(years)}

    codes = np.zeros((len(firms), len(countries), len(years)), dtype=np.int8)
    for (firm, year), mentioned in mention_index.items():
        i, t = firm_idx[firm], year_idx[year]
        codes[i, :, t] = ObservationCode.NOT_ENTERED
        for name in mentioned:
            if name in country_idx:
                codes[i, country_idx[name], t] = ObservationCode.ENTERED_NO_REPORT
    for c in labeled:
        if c.label != 1:
            continue
        i, t = firm_idx[c.firm_id], year_idx[c.year]
        for name in c.matched_countries:
            if name in country_idx:
                codes[i, country_idx[name], t] = ObservationCode.ENTERED_REPORTED

    return Panel(firms, countries, years, codes)


def classifier_metrics(counts):
    """Error rates from a confusion matrix, standard conventions.

    total error = (FP + FN) / total; FPR = FP / (FP + TN);
    FNR = FN / (FN + TP); accuracy = 1 - total error.
    """
    if counts.total <= 0:
        raise DomainError("confusion matrix is empty")
    tp, fp = counts.true_positive, counts.false_positive
    fn, tn = counts.false_negative, counts.true_negative
    total_error = (fp + fn) / counts.total
    fpr = fp / (fp + tn) if (fp + tn) > 0 else None
    fnr = fn / (fn + tp) if (fn + tp) > 0 else None
    return ClassifierMetrics(
        total_error_rate=total_error,
        false_positive_rate=fpr,
        false_negative_rate=fnr,
        accuracy=1.0 - total_error,
        metadata={
            "conventions": (
                "total_error=(FP+FN)/total; FPR=FP/(FP+TN); FNR=FN/(FN+TP); "
                "accuracy=1-total_error"
            ),
        },
    )


def zero_baseline(candidates):
    """All-negative predictions; for exercising the pipeline only."""
    return {c.sentence_id: 0 for c in candidates}


def load_filings(directory, year_range=(1990, 2035)):
    """Read a directory of ``<firm_id>_<year>.txt`` filings."""
    directory = Path(directory)
    docs = []
    for path in sorted(directory.glob("*.txt")):
        stem = path.stem
        if "_" not in stem:
            raise ParseError(f"filing name {path.name!r} is not <firm_id>_<year>.txt")
        firm_id, year_text = stem.rsplit("_", 1)
        try:
            year = int(year_text)
        except ValueError:
            raise ParseError(
                f"filing name {path.name!r} has non-numeric year"
            ) from None
        if not year_range[0] <= year <= year_range[1]:
            raise DomainError(
                f"filing year {year} outside configured range {year_range}"
            )
        docs.append(FilingDocument(firm_id, year, path.read_text(encoding="utf-8")))
    return docs


def load_predictions(path):
    """Read a ``sentence_id,label`` CSV into a dict."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0].strip() != "sentence_id,label":
        raise ParseError("expected header sentence_id,label", 1)
    predictions = {}
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            sentence_id, label_text = line.rsplit(",", 1)
            predictions[sentence_id.strip()] = int(label_text)
        except ValueError:
            raise ParseError(f"bad prediction row {line!r}", lineno) from None
    return predictions


def load_dictionary(path):
    """Read one dictionary term per line; # starts a comment."""
    terms = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            terms.append(line)
    if not terms:
        raise ConfigError(f"dictionary file {path} has no terms")
    return terms


@dataclass(frozen=True)
class ExtractionResult:
    panel: Panel
    n_documents: int
    n_sentences: int
    n_candidates: int
    n_positive: int


def build_panel_from_filings(filings_dir, predictions, dictionary=None,
                             gazetteer=None, countries=None):
    """Full front end: filings directory + label map -> Panel.

    ``predictions`` is a sentence_id -> {0,1} mapping, a path to such a
    CSV, or the string "zero" for the all-negative baseline.
    """
    docs = load_filings(filings_dir)
    if not docs:
        raise DomainError(f"no filings found under {filings_dir}")
    gaz = gazetteer if gazetteer is not None else Gazetteer.default()
    sentences = []
    for doc in docs:
        sentences.extend(split_sentences(doc))
    candidates = filter_candidates(sentences, dictionary=dictionary, gazetteer=gaz)
    if predictions == "zero":
        predictions = zero_baseline(candidates)
    elif isinstance(predictions, (str, Path)):
        predictions = load_predictions(predictions)
    labeled = merge_labels(candidates, predictions)
    mention_index = index_country_mentions(docs, gaz)
    panel = aggregate_to_panel(labeled, mention_index, countries=countries)
    return ExtractionResult(
        panel=panel,
        n_documents=len(docs),
        n_sentences=len(sentences),
        n_candidates=len(candidates),
        n_positive=sum(c.label for c in labeled),
    )


def _term_pattern(term):
    words = term.split()
    if not words:
        raise ConfigError("dictionary contains an empty term")
    escaped = [re.escape(w) for w in words[:-1]]
    last = words[-1]
    if last.endswith("y") and len(last) > 1:
        folded = f"(?:{re.escape(last)}|{re.escape(last[:-1])}ies)"
    else:
        folded = rf"{re.escape(last)}(?:s|es)?"
    body = r"\s+".join(escaped + [folded])
    return rf"\b{body}\b"
