"""Run configuration and data ingestion.

Configs are single JSON documents.  Unknown keys are rejected so that a
typo cannot silently disable an option, and every config round-trips
through :func:`write_config` / :func:`load_config` unchanged.
"""

from __future__ import annotations

import csv
import datetime
import json
from dataclasses import dataclass, field
from pathlib import Path

from sirsq.core import ConfigError, EpidemicParams, OutOfRangeError
from sirsq.network import WsConfig
from sirsq.similarity import CaseSeries

EXPERIMENTS = ("individual", "population", "network-evolve", "oracle-check", "compare")


class ParseError(ValueError):
    """The config file is not valid JSON or contains unknown keys."""

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail


class ValidationError(ValueError):
    """A config field is missing or has an unusable value."""

    def __init__(self, field_name: str, message: str = ""):
        super().__init__(f"{field_name}: {message}" if message else field_name)
        self.field = field_name


class MissingColumnError(ValueError):
    """The CSV lacks a required column (or any header at all)."""


class NonContiguousDatesError(ValueError):
    """The CSV dates are not uniform consecutive days."""


class NonNumericValueError(ValueError):
    """A CSV value cell could not be parsed as a number."""

    def __init__(self, row: int, message: str):
        super().__init__(f"row {row}: {message}")
        self.row = row


@dataclass(frozen=True)
class CompareConfig:
    sim_csv: str
    obs_csv: str
    shift: int = 0
    date_column: str = "date"
    value_column: str = "cases"
    sim_value_column: str = "i"

    def __post_init__(self):
        if self.shift < 0:
            raise ValidationError("compare.shift", f"must be >= 0, got {self.shift}")


@dataclass(frozen=True)
class RunConfig:
    """One batch run: an experiment name, model parameters, and the
    experiment-specific settings it needs."""

    experiment: str
    params: EpidemicParams
    seeds: tuple[int, ...]
    output_dir: str = "out"
    mean_degree: float = 5.0
    t_end: float = 4000.0
    window: tuple[float, float] | None = None
    initial: tuple[int, int, int] | str = "equilibrium"
    resample_dt: float = 1.0
    ws: WsConfig | None = None
    steps: int = 1500
    burn_in: int = 500
    protect_sweep: tuple[float, ...] = (0.0, 1.0, 2.0)
    m_arrival: int = 4
    k_init_sweep: tuple[int, ...] | None = None
    oracle_cap: int = 15
    workers: int = 1
    compare: CompareConfig | None = None

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValidationError(
                "experiment", f"must be one of {EXPERIMENTS}, got {self.experiment!r}"
            )
        if not self.seeds:
            raise ValidationError("seeds", "must list at least one seed")
        if any(int(s) != s or s < 0 for s in self.seeds):
            raise ValidationError("seeds", "must be nonnegative integers")
        if self.t_end <= 0:
            raise ValidationError("t_end", f"must be > 0, got {self.t_end}")
        if self.mean_degree <= 0:
            raise ValidationError("mean_degree", f"must be > 0, got {self.mean_degree}")
        if self.window is not None:
            lo, hi = self.window
            if not (0 <= lo < hi <= self.t_end):
                raise ValidationError(
                    "window", f"must satisfy 0 <= lo < hi <= t_end, got {self.window}"
                )
        if isinstance(self.initial, str):
            if self.initial != "equilibrium":
                raise ValidationError(
                    "initial", f"must be 'equilibrium' or a count triple, got {self.initial!r}"
                )
        else:
            if len(self.initial) != 3 or any(v < 0 for v in self.initial):
                raise ValidationError(
                    "initial", f"count triple must be three nonnegative ints, got {self.initial}"
                )
        if self.resample_dt <= 0:
            raise ValidationError("resample_dt", f"must be > 0, got {self.resample_dt}")
        if self.steps <= 0 or self.burn_in < 0 or self.steps <= self.burn_in:
            raise ValidationError(
                "steps", f"need steps > burn_in >= 0, got steps={self.steps}, burn_in={self.burn_in}"
            )
        if self.m_arrival < 1:
            raise ValidationError("m_arrival", f"must be >= 1, got {self.m_arrival}")
        if self.oracle_cap < 1:
            raise ValidationError("oracle_cap", f"must be >= 1, got {self.oracle_cap}")
        if self.workers < 1:
            raise ValidationError("workers", f"must be >= 1, got {self.workers}")
        if self.experiment in ("individual", "network-evolve") and self.ws is None:
            raise ValidationError("ws", f"required for the {self.experiment} experiment")
        if self.experiment == "compare" and self.compare is None:
            raise ValidationError("compare", "required for the compare experiment")
        if self.experiment in ("population", "oracle-check") and self.window is None:
            raise ValidationError("window", f"required for the {self.experiment} experiment")

    def effective_window(self) -> tuple[float, float]:
        if self.window is None:
            return (0.75 * self.t_end, self.t_end)
        return self.window

    def effective_k_sweep(self) -> tuple[int, ...]:
        if self.k_init_sweep is not None:
            return self.k_init_sweep
        assert self.ws is not None
        return (self.ws.k_init,)


_PARAM_KEYS = ("beta", "gamma", "alpha", "lambda_in", "revive_frac", "protect_intensity")
_WS_KEYS = ("n0", "k_init", "rewire_prob")
_COMPARE_KEYS = ("sim_csv", "obs_csv", "shift", "date_column", "value_column", "sim_value_column")
_TOP_KEYS = (
    "experiment", "params", "seeds", "output_dir", "mean_degree", "t_end",
    "window", "initial", "resample_dt", "ws", "steps", "burn_in",
    "protect_sweep", "m_arrival", "k_init_sweep", "oracle_cap", "workers", "compare",
)


def _reject_unknown(mapping: dict, allowed, where: str):
    unknown = sorted(set(mapping) - set(allowed))
    if unknown:
        raise ParseError(f"unknown key(s) in {where}: {', '.join(unknown)}")


def config_from_dict(doc: dict) -> RunConfig:
    if not isinstance(doc, dict):
        raise ParseError("config root must be a JSON object")
    _reject_unknown(doc, _TOP_KEYS, "config")
    for required in ("experiment", "params", "seeds"):
        if required not in doc:
            raise ValidationError(required, "missing")
    params_doc = doc["params"]
    if not isinstance(params_doc, dict):
        raise ValidationError("params", "must be an object")
    _reject_unknown(params_doc, _PARAM_KEYS, "params")
    try:
        params = EpidemicParams(**params_doc)
    except OutOfRangeError as exc:
        raise ValidationError(f"params.{exc.field}", str(exc)) from exc
    except TypeError as exc:
        raise ValidationError("params", str(exc)) from exc
    kwargs: dict = {}
    if "ws" in doc and doc["ws"] is not None:
        ws_doc = doc["ws"]
        if not isinstance(ws_doc, dict):
            raise ValidationError("ws", "must be an object")
        _reject_unknown(ws_doc, _WS_KEYS, "ws")
        try:
            kwargs["ws"] = WsConfig(**ws_doc)
        except (ConfigError, TypeError) as exc:
            raise ValidationError("ws", str(exc)) from exc
    if "compare" in doc and doc["compare"] is not None:
        cmp_doc = doc["compare"]
        if not isinstance(cmp_doc, dict):
            raise ValidationError("compare", "must be an object")
        _reject_unknown(cmp_doc, _COMPARE_KEYS, "compare")
        try:
            kwargs["compare"] = CompareConfig(**cmp_doc)
        except TypeError as exc:
            raise ValidationError("compare", str(exc)) from exc
    if "window" in doc and doc["window"] is not None:
        window = doc["window"]
        if not isinstance(window, (list, tuple)) or len(window) != 2:
            raise ValidationError("window", f"must be a [lo, hi] pair, got {window}")
        kwargs["window"] = (float(window[0]), float(window[1]))
    if "initial" in doc:
        initial = doc["initial"]
        if isinstance(initial, str):
            kwargs["initial"] = initial
        elif isinstance(initial, (list, tuple)) and len(initial) == 3:
            kwargs["initial"] = tuple(int(v) for v in initial)
        else:
            raise ValidationError("initial", f"must be 'equilibrium' or [s, i, r], got {initial}")
    if "seeds" in doc:
        seeds = doc["seeds"]
        if not isinstance(seeds, (list, tuple)):
            raise ValidationError("seeds", "must be a list")
        kwargs["seeds"] = tuple(int(s) for s in seeds)
    if "protect_sweep" in doc:
        kwargs["protect_sweep"] = tuple(float(v) for v in doc["protect_sweep"])
    if "k_init_sweep" in doc and doc["k_init_sweep"] is not None:
        kwargs["k_init_sweep"] = tuple(int(v) for v in doc["k_init_sweep"])
    for key in ("output_dir", "mean_degree", "t_end", "resample_dt", "steps",
                "burn_in", "m_arrival", "oracle_cap", "workers"):
        if key in doc:
            kwargs[key] = doc[key]
    try:
        return RunConfig(experiment=doc["experiment"], params=params, **kwargs)
    except (OutOfRangeError, ConfigError) as exc:
        raise ValidationError("config", str(exc)) from exc


def config_to_dict(cfg: RunConfig) -> dict:
    doc: dict = {
        "experiment": cfg.experiment,
        "params": {k: getattr(cfg.params, k) for k in _PARAM_KEYS},
        "seeds": list(cfg.seeds),
        "output_dir": cfg.output_dir,
        "mean_degree": cfg.mean_degree,
        "t_end": cfg.t_end,
        "initial": list(cfg.initial) if not isinstance(cfg.initial, str) else cfg.initial,
        "resample_dt": cfg.resample_dt,
        "steps": cfg.steps,
        "burn_in": cfg.burn_in,
        "protect_sweep": list(cfg.protect_sweep),
        "m_arrival": cfg.m_arrival,
        "oracle_cap": cfg.oracle_cap,
        "workers": cfg.workers,
    }
    if cfg.window is not None:
        doc["window"] = list(cfg.window)
    if cfg.ws is not None:
        doc["ws"] = {k: getattr(cfg.ws, k) for k in _WS_KEYS}
    if cfg.k_init_sweep is not None:
        doc["k_init_sweep"] = list(cfg.k_init_sweep)
    if cfg.compare is not None:
        doc["compare"] = {k: getattr(cfg.compare, k) for k in _COMPARE_KEYS}
    return doc


def load_config(path) -> RunConfig:
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    return config_from_dict(doc)


def write_config(cfg: RunConfig, path):
    Path(path).write_text(json.dumps(config_to_dict(cfg), indent=2) + "\n")


def ingest_case_csv(path, date_column: str, value_column: str) -> CaseSeries:
    """Read a dated daily case-count series.

    Dates must be ISO formatted, strictly consecutive days with no gaps or
    duplicates; gaps are rejected, never interpolated.
    """
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise MissingColumnError(f"{path}: no header row")
        for col in (date_column, value_column):
            if col not in reader.fieldnames:
                raise MissingColumnError(f"{path}: missing column {col!r}")
        dates: list[datetime.date] = []
        values: list[float] = []
        for row_num, row in enumerate(reader, start=2):
            raw_date = (row[date_column] or "").strip()
            try:
                date = datetime.date.fromisoformat(raw_date)
            except ValueError as exc:
                raise NonContiguousDatesError(
                    f"row {row_num}: unparseable date {raw_date!r}"
                ) from exc
            if dates and (date - dates[-1]).days != 1:
                raise NonContiguousDatesError(
                    f"row {row_num}: date {date} does not follow {dates[-1]} by one day"
                )
            raw_value = (row[value_column] or "").strip()
            try:
                value = float(raw_value)
            except ValueError as exc:
                raise NonNumericValueError(row_num, f"cannot parse {raw_value!r}") from exc
            dates.append(date)
            values.append(value)
    if len(values) < 2:
        raise NonContiguousDatesError(f"{path}: need at least two daily rows")
    return CaseSeries(values=values, t0_label=dates[0].isoformat())


def read_sim_series(path, value_column: str = "i") -> CaseSeries:
    """Read a simulated series from a resampled trajectory CSV (column ``t``
    plus count columns)."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or value_column not in reader.fieldnames:
            raise MissingColumnError(f"{path}: missing column {value_column!r}")
        values = []
        for row_num, row in enumerate(reader, start=2):
            try:
                values.append(float(row[value_column]))
            except ValueError as exc:
                raise NonNumericValueError(row_num, f"cannot parse {row[value_column]!r}") from exc
    if len(values) < 2:
        raise MissingColumnError(f"{path}: fewer than two rows")
    return CaseSeries(values=values)
