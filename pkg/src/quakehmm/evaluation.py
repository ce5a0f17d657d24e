"""Rolling daily forecasts over a test window and their verification.

Each day's forecast uses every event up to the forecast instant.  The first
forecast is seeded with the ``warmup_events`` most recent interevent times
and the history grows from there.
"""
from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats

from .catalog import Catalog, ObservationSequence
from .errors import ConfigurationError, DegenerateSplitError, InsufficientHistoryError
from .forecasting import interval_probabilities, next_state_weights, tilt_weights
from .hmm import HmmParams, forward_filter

DEFAULT_LOW_FRACTION = 9000 / 9693

SUMMARY_HEADER = ("group", "range_lo", "range_hi", "count", "mean", "median", "q1", "q3",
                  "observed_count", "observed_proportion")


@dataclass
class EvalConfig:
    forecast_start: dt.date
    forecast_end: dt.date
    warmup_events: int = 30
    forecast_time_of_day: float = 0.0
    horizons: list[float] = field(default_factory=lambda: [1.0, 5.0, 10.0])
    split_low_count: int | float | None = None
    regions: list[int] | None = None
    include_end: bool = True
    coverage_end: dt.date | None = None

    def __post_init__(self):
        for name in ("forecast_start", "forecast_end", "coverage_end"):
            value = getattr(self, name)
            if isinstance(value, str):
                setattr(self, name, dt.date.fromisoformat(value))
        if not self.forecast_start < self.forecast_end:
            raise ValueError("forecast_start must precede forecast_end")
        if not self.horizons or any(not h > 0 for h in self.horizons):
            raise ValueError("horizons must be positive")
        if self.warmup_events < 1:
            raise ValueError("warmup_events must be >= 1")
        if not 0.0 <= self.forecast_time_of_day < 1.0:
            raise ValueError("forecast_time_of_day is a fraction of a day in [0, 1)")
        self.horizons = [float(h) for h in self.horizons]

    @property
    def dates(self) -> list[dt.date]:
        n = (self.forecast_end - self.forecast_start).days + (1 if self.include_end else 0)
        return [self.forecast_start + dt.timedelta(days=i) for i in range(n)]

    def to_dict(self) -> dict:
        return {
            "forecast_start": self.forecast_start.isoformat(),
            "forecast_end": self.forecast_end.isoformat(),
            "warmup_events": self.warmup_events,
            "forecast_time_of_day": self.forecast_time_of_day,
            "horizons": self.horizons,
            "split_low_count": self.split_low_count,
            "regions": self.regions,
            "include_end": self.include_end,
            "coverage_end": None if self.coverage_end is None else self.coverage_end.isoformat(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EvalConfig":
        known = {k: d[k] for k in cls.__dataclass_fields__ if k in d}
        return cls(**known)


@dataclass
class DailyForecast:
    """One day's forecasts, keyed by ``(horizon, region)``; region ``None``
    means anywhere.  Outcomes are ``None`` when the horizon runs past the
    catalog's coverage."""

    date: dt.date
    t: int
    w: float
    prob_by_horizon: dict[tuple[float, int | None], float]
    outcome_by_horizon: dict[tuple[float, int | None], bool | None]
    events_on_day: int = 0

    def prob(self, horizon: float, region: int | None = None) -> float:
        return self.prob_by_horizon[(float(horizon), region)]

    def outcome(self, horizon: float, region: int | None = None) -> bool | None:
        return self.outcome_by_horizon[(float(horizon), region)]


@dataclass(frozen=True)
class GroupSummary:
    group: str
    range: tuple[float, float]
    count: int
    mean: float
    median: float
    q1: float
    q3: float
    observed_count: int
    observed_proportion: float

    def row(self) -> list:
        return [self.group, self.range[0], self.range[1], self.count, self.mean, self.median,
                self.q1, self.q3, self.observed_count, self.observed_proportion]


@dataclass(frozen=True)
class CalibrationBin:
    count: int
    mean_forecast: float
    observed_count: int
    observed_frequency: float
    lower: float
    upper: float

    @property
    def within(self) -> bool:
        return self.lower <= self.observed_frequency <= self.upper


def run_rolling_forecasts(catalog: Catalog, params: HmmParams, config: EvalConfig) -> list[DailyForecast]:
    times = catalog.times
    dates = config.dates
    day0 = catalog.day_number(config.forecast_start)
    day_starts = day0 + np.arange(len(dates), dtype=float)
    instants = day_starts + config.forecast_time_of_day

    seen = np.searchsorted(times, instants, side="right")
    if len(dates) == 0 or seen[0] == 0:
        raise InsufficientHistoryError(
            f"no events before the first forecast on {config.forecast_start}")

    use_regions = params.has_regions
    if use_regions and not catalog.has_regions:
        raise ConfigurationError("location model needs a region-labelled catalog")
    region_list: list[int] = []
    if use_regions:
        region_list = list(config.regions or range(1, params.n_regions + 1))

    # history starts warmup_events interevent times before the first forecast
    first = max(0, int(seen[0]) - 1 - config.warmup_events)
    hist_times = times[first:]
    labels = None
    if use_regions:
        labels = np.array(catalog.regions[first + 1:], dtype=np.int64)
    obs = ObservationSequence(np.diff(hist_times), labels)
    alpha, _ = forward_filter(params, obs)
    post = np.vstack([params.pi[None, :], next_state_weights(params, alpha)])

    t = seen - 1 - first
    w = instants - times[seen - 1]
    d = tilt_weights(post[t], params.means, w)

    coverage = times[-1]
    if config.coverage_end is not None:
        coverage = catalog.day_number(config.coverage_end) + 1.0

    def outcomes(event_times: np.ndarray, horizon: float) -> list[bool | None]:
        padded = np.append(event_times, np.inf)
        nxt_time = padded[np.searchsorted(event_times, instants, side="right")]
        hit = nxt_time <= instants + horizon
        avail = instants + horizon <= coverage
        return [bool(h) if a else None for h, a in zip(hit, avail)]

    probs: dict[tuple[float, int | None], np.ndarray] = {}
    outs: dict[tuple[float, int | None], list] = {}
    region_times = {v: times[np.array(catalog.regions) == v] for v in region_list}
    for h in config.horizons:
        probs[(h, None)] = interval_probabilities(d, params, h)
        outs[(h, None)] = outcomes(times, h)
        for v in region_list:
            probs[(h, v)] = interval_probabilities(d, params, h, v)
            outs[(h, v)] = outcomes(region_times[v], h)

    on_day = (np.searchsorted(times, day_starts + 1.0, side="left")
              - np.searchsorted(times, day_starts, side="left"))

    result = []
    for i, date in enumerate(dates):
        result.append(DailyForecast(
            date=date,
            t=int(t[i]),
            w=float(w[i]),
            prob_by_horizon={k: float(v[i]) for k, v in probs.items()},
            outcome_by_horizon={k: v[i] for k, v in outs.items()},
            events_on_day=int(on_day[i]),
        ))
    return result


def _median(x: np.ndarray) -> float:
    return float(np.median(x))


def hinges(sorted_values: np.ndarray) -> tuple[float, float]:
    """First and third quartiles as medians of the lower and upper halves
    (the middle value is excluded from both halves when ``n`` is odd)."""
    x = np.asarray(sorted_values, dtype=float)
    n = x.size
    if n == 1:
        return float(x[0]), float(x[0])
    half = n // 2
    return _median(x[:half]), _median(x[n - half:])


def resolve_split(split: int | float | None, total: int) -> int:
    if split is None:
        count = int(round(total * DEFAULT_LOW_FRACTION))
    elif isinstance(split, float) and 0 < split < 1:
        count = int(round(total * split))
    else:
        count = int(split)
    if count <= 0 or count >= total:
        raise DegenerateSplitError(f"low-group size {count} must lie in 1..{total - 1}")
    return count


def _evaluable(forecasts: Sequence[DailyForecast], horizon: float, region: int | None):
    key = (float(horizon), region)
    rows = [(f.prob_by_horizon[key], f.date, f.outcome_by_horizon[key]) for f in forecasts
            if f.outcome_by_horizon.get(key) is not None]
    rows.sort(key=lambda r: (r[0], r[1]))
    return rows


def _group(name: str, rows) -> GroupSummary:
    p = np.array([r[0] for r in rows])
    hits = sum(bool(r[2]) for r in rows)
    q1, q3 = hinges(p)
    return GroupSummary(name, (float(p[0]), float(p[-1])), len(rows), float(p.mean()),
                        _median(p), q1, q3, hits, hits / len(rows))


def summarize(forecasts: Sequence[DailyForecast], horizon: float,
              split: int | float | None = None,
              region: int | None = None) -> tuple[GroupSummary, GroupSummary]:
    """Split forecasts into low and high groups and compare with outcomes.

    Forecasts are ranked by probability (ties by date); the lowest ``split``
    form the low group.  A float ``split`` in (0, 1) is a fraction.
    """
    rows = _evaluable(forecasts, horizon, region)
    if not rows:
        raise DegenerateSplitError("no forecasts with available outcomes")
    k = resolve_split(split, len(rows))
    return _group("low", rows[:k]), _group("high", rows[k:])


def binomial_interval(n: int, p: float, level: float = 0.99) -> tuple[float, float]:
    """Central binomial interval for an observed proportion out of ``n`` trials."""
    tail = (1.0 - level) / 2.0
    lo = stats.binom.ppf(tail, n, p)
    hi = stats.binom.ppf(1.0 - tail, n, p)
    return float(lo) / n, float(hi) / n


def decile_calibration(forecasts: Sequence[DailyForecast], horizon: float,
                       region: int | None = None, n_bins: int = 10,
                       level: float = 0.99) -> list[CalibrationBin]:
    """Equal-count bins of ranked forecasts with binomial acceptance bands."""
    rows = _evaluable(forecasts, horizon, region)
    bins = []
    for chunk in np.array_split(np.arange(len(rows)), n_bins):
        if chunk.size == 0:
            continue
        p = np.array([rows[i][0] for i in chunk])
        hits = sum(bool(rows[i][2]) for i in chunk)
        lo, hi = binomial_interval(chunk.size, float(p.mean()), level)
        bins.append(CalibrationBin(int(chunk.size), float(p.mean()), hits, hits / chunk.size, lo, hi))
    return bins


def _keys(forecasts: Sequence[DailyForecast]) -> list[tuple[float, int | None]]:
    if not forecasts:
        return []
    return sorted(forecasts[0].prob_by_horizon,
                  key=lambda k: (k[1] is not None, k[1] or 0, k[0]))


def _key_name(key: tuple[float, int | None]) -> str:
    h, v = key
    name = f"N{format_number(h)}"
    return name if v is None else f"{name}_r{v}"


def format_number(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if x.is_integer() and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


def export_series(forecasts: Sequence[DailyForecast], catalog: Catalog | None = None):
    """Plot-ready tables.

    Returns ``(daily, sorted_by_key)``: ``daily`` is a list of CSV rows
    (header first) with one column per (horizon, region) probability and
    outcome plus an ``event`` indicator for days with at least one event;
    ``sorted_by_key`` maps a column name such as ``N1`` or ``N10_r2`` to rows
    of ``rank,date,probability`` in ascending probability order.
    """
    keys = _keys(forecasts)
    header = ["date", "t", "w"]
    header += [f"p_{_key_name(k)}" for k in keys]
    header += [f"outcome_{_key_name(k)}" for k in keys]
    header += ["event"]
    daily = [header]
    for f in forecasts:
        row = [f.date.isoformat(), str(f.t), repr(f.w)]
        row += [repr(f.prob_by_horizon[k]) for k in keys]
        row += ["" if f.outcome_by_horizon[k] is None else str(int(f.outcome_by_horizon[k]))
                for k in keys]
        row.append("1" if f.events_on_day else "0")
        daily.append(row)
    ranked = {}
    for k in keys:
        order = sorted(forecasts, key=lambda f: (f.prob_by_horizon[k], f.date))
        rows = [["rank", "date", "probability"]]
        rows += [[str(i + 1), f.date.isoformat(), repr(f.prob_by_horizon[k])]
                 for i, f in enumerate(order)]
        ranked[_key_name(k)] = rows
    return daily, ranked


def summary_rows(low: GroupSummary, high: GroupSummary) -> list[list[str]]:
    rows = [list(SUMMARY_HEADER)]
    for g in (low, high):
        rows.append([format_number(x) if not isinstance(x, str) else x for x in g.row()])
    return rows


def format_table(low: GroupSummary, high: GroupSummary, title: str) -> str:
    """Aligned text table with the forecast range, count, mean and median
    per group beside the observed count and proportion."""
    def f4(x):
        return f"{x:.4f}"

    head = ["", "range", "number", "mean", "median", "obs.number", "proportion"]
    body = [[g.group, f"({f4(g.range[0])}, {f4(g.range[1])})", str(g.count), f4(g.mean),
             f4(g.median), str(g.observed_count), f4(g.observed_proportion)]
            for g in (low, high)]
    widths = [max(len(r[i]) for r in [head] + body) for i in range(len(head))]
    line = lambda r: "  ".join(c.rjust(wd) for c, wd in zip(r, widths)).rstrip()
    rule = "-" * len(line(head))
    return "\n".join([title, rule, line(head), rule, *map(line, body), rule]) + "\n"


def interval_join_hits(catalog: Catalog, forecasts: Sequence[DailyForecast],
                       horizon: float, time_of_day: float = 0.0) -> int:
    """Count forecast days with an event in ``(d, d + horizon]`` by scanning
    every (day, event) pair.  Slow; a cross-check for the rolling outcomes."""
    times = catalog.times
    count = 0
    for f in forecasts:
        if f.outcome_by_horizon.get((float(horizon), None)) is None:
            continue
        start = catalog.day_number(f.date) + time_of_day
        if any(start < t <= start + horizon for t in times):
            count += 1
    return count

