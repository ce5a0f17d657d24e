"""Fit, forecast and evaluate exponential-emission HMMs on earthquake catalogs.

Exit codes: 0 ok, 2 input error, 3 domain error, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import datetime as dt
import json
import logging
import sys
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .catalog import (
    EAST_WEST,
    NORTH_SOUTH,
    SINGLE_REGION,
    Catalog,
    ObservationSequence,
    RegionPartition,
    assign_regions,
    catalog_rows,
    compute_principal_axes,
    load_catalog,
    to_observations,
)
from .errors import ConfigurationError, DomainError, InputError, NumericalError
from .estimation import FitConfig, fit
from .evaluation import (
    EvalConfig,
    export_series,
    format_number,
    format_table,
    run_rolling_forecasts,
    summarize,
    summary_rows,
)
from .fileio import sha256_file, write_csv, write_json, write_text
from .forecasting import (
    ForecastQuery,
    forecast_probability,
    post_event_weights,
    scheduled_weights,
)
from .hmm import HmmParams
from .simulation import SimConfig, simulate

log = logging.getLogger("quakehmm")

EXIT_OK, EXIT_INPUT, EXIT_DOMAIN, EXIT_NUMERICAL = 0, 2, 3, 4

SPLITS = {
    "east-west": ("quadrant-merge", EAST_WEST),
    "north-south": ("quadrant-merge", NORTH_SOUTH),
    "half-plane": ("half-plane", EAST_WEST),
    "single": ("single-region", SINGLE_REGION),
}


@dataclass
class RunManifest:
    command: str
    config: dict
    inputs: dict
    version: str = __version__

    def to_dict(self) -> dict:
        return asdict(self)


def _date_arg(text: str) -> dt.datetime:
    try:
        if "T" in text or " " in text:
            return dt.datetime.fromisoformat(text)
        return dt.datetime.combine(dt.date.fromisoformat(text), dt.time())
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an ISO date: {text!r}")


def _read_json(path: str | None) -> dict:
    if not path:
        return {}
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _load_params(path: str) -> HmmParams:
    try:
        return HmmParams.from_json(Path(path).read_text(encoding="utf-8"))
    except (KeyError, ValueError, TypeError) as exc:
        raise InputError(f"{path}: invalid parameter file: {exc}") from exc


def _label_catalog(catalog: Catalog, mode: str, partition_path: str | None,
                   out_dir: Path | None = None) -> Catalog:
    if mode == "none" or (mode == "auto" and not catalog.has_regions):
        return catalog
    if mode in ("column", "auto"):
        if not catalog.has_regions:
            raise ConfigurationError("region-mode 'column' needs a region column in the catalog")
        return catalog
    if mode == "partition":
        if not partition_path:
            raise ConfigurationError("region-mode 'partition' needs --partition")
        partition = RegionPartition.from_json(Path(partition_path).read_text(encoding="utf-8"))
    else:
        kind, merge = SPLITS[mode]
        partition = compute_principal_axes(catalog, merge, kind)
        if out_dir is not None:
            write_text(out_dir / "partition.json", partition.to_json() + "\n")
    return assign_regions(catalog, partition)


def _window(catalog: Catalog, start: dt.datetime | None, end: dt.datetime | None) -> Catalog:
    lo = None if start is None else catalog.day_number(start)
    hi = None if end is None else catalog.day_number(end)
    return catalog.between(lo, hi)


def cmd_fit(args) -> int:
    out_dir = Path(args.out_dir)
    catalog = load_catalog(args.catalog, args.min_magnitude)
    catalog = _label_catalog(catalog, args.region_mode, args.partition, out_dir)
    train = _window(catalog, args.train_start, args.train_end)
    obs = to_observations(train)
    if args.region_mode == "none":
        obs = obs.without_regions()
    config = FitConfig.from_dict(_read_json(args.config))
    result = fit(obs, args.n_states, config)

    write_json(out_dir / "params.json", result.params.to_dict())
    write_json(out_dir / "fit_result.json", result.to_dict())
    trace = [["iter", "log_likelihood"]] + [[str(i), repr(ll)] for i, ll in enumerate(result.trace)]
    write_csv(out_dir / "trace.csv", trace)
    manifest = RunManifest(
        "fit",
        {"n_states": args.n_states, "region_mode": args.region_mode,
         "min_magnitude": args.min_magnitude,
         "train_start": None if args.train_start is None else args.train_start.isoformat(),
         "train_end": None if args.train_end is None else args.train_end.isoformat(),
         "fit": config.to_dict()},
        _digests(args.catalog, args.config, args.partition),
    )
    write_json(out_dir / "manifest_fit.json", manifest.to_dict())
    if not args.quiet:
        p = result.params
        print(f"observations={len(obs)} log_likelihood={result.log_likelihood:.6f} "
              f"iterations={result.iterations} converged={str(result.converged).lower()}")
        print("lambda=" + ",".join(f"{x:.6f}" for x in p.means))
        print("pi=" + ",".join(f"{x:.6f}" for x in p.pi))
        for row in p.trans:
            print("trans=" + ",".join(f"{x:.6f}" for x in row))
        if p.has_regions:
            for row in p.region_dist:
                print("region_dist=" + ",".join(f"{x:.6f}" for x in row))
    if not result.converged:
        log.warning("fit stopped at max_iters=%d before reaching param_tol", config.max_iters)
    return EXIT_OK


def _digests(*paths) -> dict:
    return {str(p): sha256_file(p) for p in paths if p}


def _history_labels(params: HmmParams, catalog: Catalog) -> Catalog:
    if params.has_regions and not catalog.has_regions:
        raise ConfigurationError("location model needs region labels; use --region-mode")
    return catalog


def cmd_forecast(args) -> int:
    params = _load_params(args.params)
    catalog = load_catalog(args.catalog, args.min_magnitude)
    catalog = _history_labels(params, _label_catalog(catalog, args.region_mode, args.partition))
    when = catalog.day_number(args.date)
    history = catalog.between(None, when)
    if len(history) == 0:
        raise DomainError(f"forecast time {args.date.isoformat()} precedes the first event")
    if args.history_events is not None:
        history = Catalog(history.events[-(args.history_events + 1):], history.epoch)
    if len(history) >= 2:
        obs = to_observations(history)
        if not params.has_regions:
            obs = obs.without_regions()
    else:
        obs = ObservationSequence([])
    base = post_event_weights(params, obs)
    w = when - history.events[-1].time
    d = scheduled_weights(base, params, w)
    print(f"date={args.date.isoformat()}")
    print(f"t={base.history_len}")
    print(f"w={w:.6f}")
    print("c=" + ",".join(f"{x:.6f}" for x in base.weights))
    print("d=" + ",".join(f"{x:.6f}" for x in d.weights))
    regions = [args.region] if args.region is not None else [None]
    if args.region is None and params.has_regions:
        regions += list(range(1, params.n_regions + 1))
    for h in args.horizons:
        for v in regions:
            p = forecast_probability(d, params, ForecastQuery(h, v))
            tag = "" if v is None else f" region={v}"
            print(f"N={format_number(h)}{tag} P={p:.6f}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    out_dir = Path(args.out_dir)
    params = _load_params(args.params)
    catalog = load_catalog(args.catalog, args.min_magnitude)
    catalog = _history_labels(params, _label_catalog(catalog, args.region_mode, args.partition))
    # --config keys override the evaluation config file
    config = EvalConfig.from_dict({**_read_json(args.eval_config), **_read_json(args.config)})
    forecasts = run_rolling_forecasts(catalog, params, config)

    daily, ranked = export_series(forecasts, catalog)
    write_csv(out_dir / "daily_forecasts.csv", daily)
    for name, rows in ranked.items():
        write_csv(out_dir / f"sorted_{name}.csv", rows)

    regions = [None]
    if params.has_regions:
        regions += list(config.regions or range(1, params.n_regions + 1))
    tables = []
    for h in config.horizons:
        for v in regions:
            low, high = summarize(forecasts, h, config.split_low_count, v)
            name = f"N{format_number(h)}" + ("" if v is None else f"_r{v}")
            write_csv(out_dir / f"summary_{name}.csv", summary_rows(low, high))
            where = "anywhere" if v is None else f"in region {v}"
            title = (f"{low.count + high.count} daily forecasts of an event within "
                     f"{format_number(h)} day(s) {where}")
            tables.append(format_table(low, high, title))
    write_text(out_dir / "tables.txt", "\n".join(tables))

    manifest = RunManifest(
        "evaluate",
        {"eval": config.to_dict(), "region_mode": args.region_mode,
         "min_magnitude": args.min_magnitude},
        _digests(args.params, args.catalog, args.eval_config, args.config, args.partition),
    )
    write_json(out_dir / "manifest.json", manifest.to_dict())
    if not args.quiet:
        sys.stdout.write("\n".join(tables))
    return EXIT_OK


def cmd_simulate(args) -> int:
    params = _load_params(args.params)
    config = SimConfig(params, args.n_events, args.seed, epoch=args.epoch.date())
    catalog, states = simulate(config)
    out = Path(args.out) if args.out else Path(args.out_dir) / "simulated_catalog.csv"
    write_csv(out, catalog_rows(catalog, states))
    if not args.quiet:
        y = np.diff(catalog.times)
        mean = f"{y.mean():.6f}" if y.size else "nan"
        print(f"wrote {len(catalog)} events to {out}; mean interevent time {mean} days")
    return EXIT_OK


def cmd_regions(args) -> int:
    catalog = load_catalog(args.catalog, args.min_magnitude)
    window = _window(catalog, args.start, args.end)
    kind, merge = SPLITS[args.split]
    partition = compute_principal_axes(window, merge, kind)
    text = partition.to_json() + "\n"
    if args.out:
        write_text(args.out, text)
    labelled = assign_regions(catalog, partition)
    if not args.quiet:
        sys.stdout.write(text)
        counts = np.bincount(np.array(labelled.regions, dtype=int), minlength=partition.n_regions + 1)
        for v in range(1, partition.n_regions + 1):
            print(f"region={v} events={counts[v]}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="random seed")
    common.add_argument("--out-dir", default=argparse.SUPPRESS, help="output directory")
    common.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS)
    common.add_argument("--config", default=argparse.SUPPRESS, help="JSON override file")
    common.add_argument("--min-magnitude", type=float, default=argparse.SUPPRESS)

    parser = argparse.ArgumentParser(prog="quakehmm", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out-dir", default=".")
    parser.add_argument("--quiet", action="store_true", default=False)
    parser.add_argument("--config", default=None)
    parser.add_argument("--min-magnitude", type=float, default=4.0)
    sub = parser.add_subparsers(dest="command", required=True)

    # auto: use a region column when the catalog has one
    region_choices = ["none", "auto", "column", "partition", *SPLITS]

    p = sub.add_parser("fit", parents=[common], help="fit an HMM by Baum-Welch")
    p.add_argument("catalog")
    p.add_argument("--n-states", type=int, default=2)
    p.add_argument("--region-mode", choices=region_choices, default="none")
    p.add_argument("--partition", help="RegionPartition JSON for --region-mode partition")
    p.add_argument("--train-start", type=_date_arg)
    p.add_argument("--train-end", type=_date_arg)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("forecast", parents=[common], help="forecast from a fitted model")
    p.add_argument("params")
    p.add_argument("catalog")
    p.add_argument("--date", type=_date_arg, required=True)
    p.add_argument("--horizons", type=float, nargs="+", default=[1.0, 5.0, 10.0])
    p.add_argument("--region", type=int)
    p.add_argument("--history-events", type=int)
    p.add_argument("--region-mode", choices=region_choices, default="auto")
    p.add_argument("--partition")
    p.set_defaults(func=cmd_forecast)

    p = sub.add_parser("evaluate", parents=[common], help="rolling daily forecasts and summaries")
    p.add_argument("params")
    p.add_argument("catalog")
    p.add_argument("--eval-config", required=True)
    p.add_argument("--region-mode", choices=region_choices, default="auto")
    p.add_argument("--partition")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("simulate", parents=[common], help="simulate a synthetic catalog")
    p.add_argument("params")
    p.add_argument("--n-events", type=int, required=True)
    p.add_argument("--out", help="output CSV (default OUT_DIR/simulated_catalog.csv)")
    p.add_argument("--epoch", type=_date_arg, default=dt.datetime(1932, 1, 1))
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("regions", parents=[common], help="principal-axes region partition")
    p.add_argument("catalog")
    p.add_argument("--split", choices=list(SPLITS), default="east-west")
    p.add_argument("--start", type=_date_arg)
    p.add_argument("--end", type=_date_arg)
    p.add_argument("--out")
    p.set_defaults(func=cmd_regions)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: no such file: {exc.filename}", file=sys.stderr)
        return EXIT_INPUT
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
