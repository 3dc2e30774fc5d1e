"""Command-line pipeline: extract, metrics, simulate, fit, recover,
diagnose, export-plot-data.

Each run resolves its parameters with precedence flags > config file >
defaults, records where every value came from, and writes a manifest
(resolved config, seed, package versions, input digests) next to its
outputs. Runs are seed-deterministic: identical manifests imply
bit-identical outputs. On failure, partially written outputs are removed
and the exit code is 1 (2 for usage problems).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .diagnostics import PosteriorSummary, summarize_posterior
from .errors import ConfigError, RegbarError
from .extraction import (
    ConfusionCounts,
    Gazetteer,
    build_panel_from_filings,
    classifier_metrics,
    load_dictionary,
)
from .gibbs import DrawStore, PriorConfig, SamplerConfig, run_chains
from .panel import load_panel, save_panel, summarize_panel
from .synthgen import save_truth, simulate_dataset


@dataclass(frozen=True)
class Param:
    name: str
    type: type = str
    default: object = None
    required: bool = False
    is_input: bool = False
    is_flag: bool = False
    choices: tuple = ()
    repeated: bool = False
    help: str = ""


_SIM_PARAMS = [
    Param("firms", int, 200, help="number of synthetic firms"),
    Param("countries", int, 20, help="number of synthetic countries"),
    Param("years", int, 10, help="number of synthetic years"),
    Param("missing-rate", float, 0.0, help="fraction of blanked firm-years"),
    Param("start-year", int, 2006, help="first calendar year"),
]

_FIT_PARAMS = [
    Param("chains", int, 2, help="number of chains"),
    Param("sweeps", int, 2000, help="sweeps per chain"),
    Param("burn-in", int, 500, help="sweeps discarded per chain"),
    Param("thin", int, 2, help="keep every thin-th post-burn-in sweep"),
    Param("workers", int, 1, help="worker processes for parallel chains"),
    Param("theta-update", str, "ffbs", choices=("ffbs", "single_site"),
          help="barrier update strategy"),
    Param("anchor", str, repeated=True,
          help="country:positive|negative sign anchor; 'none' disables the "
               "default Russia/Singapore pair"),
    Param("keep-cutoffs", is_flag=True, help="retain cutoff draws too"),
]

COMMANDS = {
    "extract": [
        Param("filings", str, required=True, is_input=True,
              help="directory of <firm_id>_<year>.txt filings"),
        Param("predictions", str, required=True,
              help="sentence_id,label CSV, or 'zero' for the baseline"),
        Param("dictionary", str, is_input=True, help="term list file"),
        Param("gazetteer", str, is_input=True, help="country alias file"),
        Param("out-dir", str, required=True),
    ],
    "metrics": [
        Param("tp", int, required=True, help="true positives"),
        Param("fp", int, required=True, help="false positives"),
        Param("fn", int, required=True, help="false negatives"),
        Param("tn", int, required=True, help="true negatives"),
        Param("out-dir", str, required=True),
    ],
    "simulate": _SIM_PARAMS + [
        Param("seed", int, 0),
        Param("out-dir", str, required=True),
    ],
    "fit": [
        Param("panel", str, required=True, is_input=True, help="panel CSV"),
        Param("seed", int, 0),
        Param("out-dir", str, required=True),
    ] + _FIT_PARAMS,
    "recover": _SIM_PARAMS + [
        Param("seed", int, 0),
        Param("out-dir", str, required=True),
    ] + _FIT_PARAMS,
    "diagnose": [
        Param("draws", str, required=True, is_input=True, help="draw store CSV"),
        Param("out-dir", str, required=True),
    ],
    "export-plot-data": [
        Param("summary", str, required=True, is_input=True, help="summary CSV"),
        Param("out-dir", str, required=True),
    ],
}


@dataclass
class RunConfig:
    command: str
    values: dict
    provenance: dict
    input_digests: dict = field(default_factory=dict)

    def manifest(self):
        return {
            "command": self.command,
            "parameters": {
                name: {"value": self.values[name], "source": self.provenance[name]}
                for name in sorted(self.values)
            },
            "input_digests": dict(sorted(self.input_digests.items())),
            "versions": {
                "regbar": __version__,
                "numpy": np.__version__,
                "scipy": scipy.__version__,
                "python": ".".join(map(str, sys.version_info[:3])),
            },
        }


def parse_config(argv):
    """Resolve argv (plus optional --config JSON file) into a RunConfig."""
    parser = _build_parser()
    args = parser.parse_args(argv)
    command = args.command
    params = COMMANDS[command]

    file_values = {}
    if args.config is not None:
        try:
            file_values = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {args.config}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from None
        unknown = set(file_values) - {p.name.replace("-", "_") for p in params}
        if unknown:
            raise ConfigError(f"unknown config keys for {command}: {sorted(unknown)}")

    values, provenance = {}, {}
    for p in params:
        attr = p.name.replace("-", "_")
        flag_value = getattr(args, attr)
        if flag_value is not None and flag_value != []:
            values[attr], provenance[attr] = flag_value, "flag"
        elif attr in file_values:
            values[attr] = _coerce(p, file_values[attr])
            provenance[attr] = "file"
        else:
            if p.required and p.default is None:
                raise ConfigError(f"missing required parameter --{p.name}")
            values[attr] = [] if p.repeated else (False if p.is_flag else p.default)
            provenance[attr] = "default"

    digests = {}
    for p in params:
        attr = p.name.replace("-", "_")
        if p.is_input and values[attr] is not None:
            path = Path(values[attr])
            if not path.exists():
                raise ConfigError(f"input path does not exist: {path}")
            digests[str(values[attr])] = _digest_path(path)

    return RunConfig(command, values, provenance, digests)


def dispatch(config):
    """Execute a resolved run; returns the artifact directory."""
    out_dir = Path(config.values["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    tracker = _OutputTracker(out_dir)
    try:
        handler = _HANDLERS[config.command]
        handler(config, tracker)
        tracker.write_json("manifest.json", config.manifest())
    except BaseException:
        tracker.remove_all()
        raise
    return out_dir


def main(argv=None):
    try:
        config = parse_config(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        dispatch(config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except RegbarError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


# ---------------------------------------------------------------------------
# command handlers


def _cmd_extract(config, tracker):
    v = config.values
    dictionary = load_dictionary(v["dictionary"]) if v["dictionary"] else None
    gazetteer = Gazetteer.from_file(v["gazetteer"]) if v["gazetteer"] else None
    result = build_panel_from_filings(
        v["filings"], v["predictions"], dictionary=dictionary, gazetteer=gazetteer
    )
    save_panel(result.panel, tracker.path("panel.csv"))
    summary = summarize_panel(result.panel)
    tracker.write_text(
        "extract_summary.txt",
        summary.to_text()
        + f"documents={result.n_documents}\n"
        + f"sentences={result.n_sentences}\n"
        + f"candidates={result.n_candidates}\n"
        + f"positive={result.n_positive}\n",
    )
    print(f"extracted panel: {summary.n_firms} firms x {summary.n_countries} "
          f"countries x {summary.n_years} years")


def _cmd_metrics(config, tracker):
    v = config.values
    counts = ConfusionCounts(v["tp"], v["fp"], v["fn"], v["tn"])
    metrics = classifier_metrics(counts)
    text = metrics.to_text()
    tracker.write_text("metrics.txt", text)
    print(text, end="")


def _cmd_simulate(config, tracker):
    v = config.values
    synthetic = _simulate(v)
    save_panel(synthetic.panel, tracker.path("panel.csv"))
    barrier_path, cutoff_path = save_truth(
        synthetic.truth, synthetic.panel, tracker.out_dir
    )
    tracker.register(barrier_path)
    tracker.register(cutoff_path)
    print(f"simulated panel: {synthetic.panel.n_firms} firms x "
          f"{synthetic.panel.n_countries} countries x {synthetic.panel.n_years} years")


def _cmd_fit(config, tracker):
    v = config.values
    panel = load_panel(v["panel"])
    store, summary = _fit(panel, v)
    store.to_csv(tracker.path("draws.csv"))
    summary.to_csv(tracker.path("summary.csv"))
    print(f"fit complete: {store.n_chains} chains x {store.n_kept} retained draws")


def _cmd_recover(config, tracker):
    v = config.values
    synthetic = _simulate(v)
    save_panel(synthetic.panel, tracker.path("panel.csv"))
    barrier_path, cutoff_path = save_truth(
        synthetic.truth, synthetic.panel, tracker.out_dir
    )
    tracker.register(barrier_path)
    tracker.register(cutoff_path)
    store, summary = _fit(synthetic.panel, v)
    store.to_csv(tracker.path("draws.csv"))
    summary.to_csv(tracker.path("summary.csv"))

    truth = synthetic.truth.barriers
    corr = float(np.corrcoef(summary.mean.ravel(), truth.ravel())[0, 1])
    covered = (summary.q05 <= truth) & (truth <= summary.q95)
    coverage = float(covered.mean())
    report = (
        f"correlation={corr}\n"
        f"coverage_90={coverage}\n"
        f"series={truth.size}\n"
    )
    finite = np.isfinite(summary.rhat)
    if finite.any():
        share = float((summary.rhat[finite] <= 1.1).mean())
        report += f"rhat_le_1.1_share={share}\n"
    tracker.write_text("recovery_report.txt", report)
    print(report, end="")


def _cmd_diagnose(config, tracker):
    store = DrawStore.from_csv(config.values["draws"])
    summary = summarize_posterior(store)
    summary.to_csv(tracker.path("diagnostics.csv"))
    worst = float(np.nanmax(summary.rhat)) if np.isfinite(summary.rhat).any() else float("nan")
    print(f"diagnostics written; max rhat={worst}")


def _cmd_export_plot_data(config, tracker):
    summary = PosteriorSummary.from_csv(config.values["summary"])
    lines = ["country,year,series,value"]
    for j, country in enumerate(summary.countries):
        for t, year in enumerate(summary.years):
            for name, values in (
                ("mean", summary.mean), ("q05", summary.q05),
                ("q50", summary.q50), ("q95", summary.q95),
            ):
                lines.append(f"{country},{year},{name},{values[j, t]}")
    tracker.write_text("plot_data.csv", "\n".join(lines) + "\n")
    print(f"plot data for {len(summary.countries)} countries written")


_HANDLERS = {
    "extract": _cmd_extract,
    "metrics": _cmd_metrics,
    "simulate": _cmd_simulate,
    "fit": _cmd_fit,
    "recover": _cmd_recover,
    "diagnose": _cmd_diagnose,
    "export-plot-data": _cmd_export_plot_data,
}


# ---------------------------------------------------------------------------
# shared pieces


def _simulate(v):
    return simulate_dataset(
        v["firms"], v["countries"], v["years"], v["missing_rate"],
        seed=v["seed"], start_year=v["start_year"],
    )


def _fit(panel, v):
    anchors = _parse_anchors(v.get("anchor") or [])
    prior = PriorConfig(anchors=anchors)
    cfg = SamplerConfig(
        n_chains=v["chains"],
        n_sweeps=v["sweeps"],
        burn_in=v["burn_in"],
        thin=v["thin"],
        seed=v["seed"],
        keep_cutoffs=v["keep_cutoffs"],
        theta_update=v["theta_update"],
    )
    store = run_chains(panel, prior, cfg, n_workers=v["workers"])
    return store, summarize_posterior(store)


def _parse_anchors(specs):
    """['none'] disables anchoring; [] means the default pair."""
    if not specs:
        return None
    if specs == ["none"]:
        return {}
    anchors = {}
    for spec in specs:
        if ":" not in spec:
            raise ConfigError(f"anchor must be country:sign, got {spec!r}")
        country, sign = spec.rsplit(":", 1)
        anchors[country] = sign
    return anchors


class _OutputTracker:
    """Records written artifacts so a failed run leaves nothing behind."""

    def __init__(self, out_dir):
        self.out_dir = Path(out_dir)
        self.created = []

    def path(self, name):
        p = self.out_dir / name
        self.created.append(p)
        return p

    def register(self, path):
        self.created.append(Path(path))

    def write_text(self, name, text):
        p = self.path(name)
        p.write_text(text, encoding="utf-8")
        return p

    def write_json(self, name, obj):
        return self.write_text(name, json.dumps(obj, indent=2, sort_keys=True) + "\n")

    def remove_all(self):
        for p in self.created:
            try:
                p.unlink(missing_ok=True)
            except OSError:
                pass


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="regbar",
        description="Country-year regulatory barrier estimation pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for command, params in COMMANDS.items():
        p = sub.add_parser(command)
        p.add_argument("--config", default=None, help="JSON file of parameter values")
        for param in params:
            flag = f"--{param.name}"
            if param.is_flag:
                p.add_argument(flag, action="store_const", const=True, default=None,
                               help=param.help)
            elif param.repeated:
                p.add_argument(flag, action="append", default=None, help=param.help)
            else:
                kwargs = {"type": param.type, "default": None, "help": param.help}
                if param.choices:
                    kwargs["choices"] = list(param.choices)
                p.add_argument(flag, **kwargs)
    return parser


def _coerce(param, value):
    if param.is_flag:
        if not isinstance(value, bool):
            raise ConfigError(f"{param.name} must be true/false in config file")
        return value
    if param.repeated:
        if not isinstance(value, list):
            raise ConfigError(f"{param.name} must be a list in config file")
        return [str(v) for v in value]
    try:
        coerced = param.type(value)
    except (TypeError, ValueError):
        raise ConfigError(
            f"{param.name} must be coercible to {param.type.__name__}, got {value!r}"
        ) from None
    if param.choices and coerced not in param.choices:
        raise ConfigError(f"{param.name} must be one of {param.choices}")
    return coerced


def _digest_path(path):
    h = hashlib.sha256()
    if path.is_dir():
        for child in sorted(path.rglob("*")):
            if child.is_file():
                h.update(child.name.encode("utf-8"))
                h.update(child.read_bytes())
    else:
        h.update(path.read_bytes())
    return h.hexdigest()


if __name__ == "__main__":
    sys.exit(main())
