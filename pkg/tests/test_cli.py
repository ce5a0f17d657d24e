import csv
import datetime as dt
import json
import math

import numpy as np
import pytest

from quakehmm.catalog import catalog_rows, catalog_from_times, load_catalog
from quakehmm.cli import main
from quakehmm.fileio import write_csv, write_json
from quakehmm.reference import TWO_STATE
from quakehmm.simulation import SimConfig, simulate


@pytest.fixture
def two_state_params(tmp_path):
    path = tmp_path / "params.json"
    write_json(path, TWO_STATE.to_dict())
    return path


def _catalog_file(tmp_path, catalog, name="catalog.csv"):
    path = tmp_path / name
    write_csv(path, catalog_rows(catalog))
    return path


def _read_rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.reader(fh))


def _probabilities(out):
    return {line.split()[0]: float(line.split("P=")[1])
            for line in out.splitlines() if line.startswith("N=") and "region" not in line}


def test_fit_writes_sorted_params(tmp_path, capsys):
    cat, _ = simulate(SimConfig(TWO_STATE, 400, seed=9))
    path = _catalog_file(tmp_path, cat)
    out = tmp_path / "fit"
    assert main(["--out-dir", str(out), "--quiet", "fit", str(path), "--n-states", "2"]) == 0
    params = json.loads((out / "params.json").read_text())
    assert params["n_states"] == 2
    assert params["lambda"][0] < params["lambda"][1]
    trace = _read_rows(out / "trace.csv")
    assert trace[0] == ["iter", "log_likelihood"]
    manifest = json.loads((out / "manifest_fit.json").read_text())
    assert manifest["command"] == "fit" and str(path) in manifest["inputs"]


def test_fit_single_state_is_sample_mean(tmp_path):
    times = [0.0, 1.0, 4.0, 4.5, 10.0, 18.0]
    path = _catalog_file(tmp_path, catalog_from_times(times, dt.date(2000, 1, 1)))
    assert main(["--out-dir", str(tmp_path), "--quiet", "fit", str(path), "--n-states", "1"]) == 0
    params = json.loads((tmp_path / "params.json").read_text())
    assert params["lambda"][0] == pytest.approx(18.0 / 5, rel=1e-9)


def test_missing_file_exit_code(tmp_path, capsys):
    missing = tmp_path / "nope.csv"
    assert main(["fit", str(missing)]) == 2
    assert str(missing) in capsys.readouterr().err


def test_bad_params_file_exit_code(tmp_path, capsys):
    bad = tmp_path / "params.json"
    bad.write_text("{not json")
    cat = _catalog_file(tmp_path, catalog_from_times([0.0, 1.0], dt.date(2000, 1, 1)))
    assert main(["forecast", str(bad), str(cat), "--date", "2000-01-05"]) == 2


def test_forecast_at_event_time(tmp_path, two_state_params, capsys):
    path = _catalog_file(tmp_path, catalog_from_times([0.0, 1.0, 3.0, 5.0], dt.date(2000, 1, 1)))
    assert main(["forecast", str(two_state_params), str(path), "--date", "2000-01-06"]) == 0
    out = capsys.readouterr().out
    assert "w=0.000000" in out and "t=3" in out
    p = _probabilities(out)
    assert set(p) == {"N=1", "N=5", "N=10"}
    assert p["N=1"] < p["N=5"] < p["N=10"]


def test_forecast_long_elapsed_matches_minimum(tmp_path, two_state_params, capsys):
    path = _catalog_file(tmp_path, catalog_from_times([0.0, 1.0, 3.0, 5.0], dt.date(2000, 1, 1)))
    assert main(["forecast", str(two_state_params), str(path), "--date", "2003-01-01",
                 "--horizons", "1", "100"]) == 0
    p = _probabilities(capsys.readouterr().out)
    assert p["N=1"] == pytest.approx(0.046287, abs=5e-4)
    floor = -math.expm1(-100 / 21.1)
    assert p["N=100"] >= round(floor, 6) and p["N=100"] == pytest.approx(0.9913, abs=5e-5)


def test_forecast_before_first_event(tmp_path, two_state_params, capsys):
    path = _catalog_file(tmp_path, catalog_from_times([0.0, 1.0], dt.date(2000, 1, 10)))
    assert main(["forecast", str(two_state_params), str(path), "--date", "2000-01-01"]) == 3
    assert "precedes" in capsys.readouterr().err


@pytest.fixture(scope="module")
def long_window(tmp_path_factory):
    root = tmp_path_factory.mktemp("window")
    cat, _ = simulate(SimConfig(TWO_STATE, 900, seed=31, epoch=dt.date(1975, 1, 1)))
    assert cat.date_of(cat.times[-1]).date() > dt.date(2009, 1, 10)
    cat_path = root / "catalog.csv"
    write_csv(cat_path, catalog_rows(cat))
    params = root / "params.json"
    write_json(params, TWO_STATE.to_dict())
    cfg = root / "eval.json"
    write_json(cfg, {"forecast_start": "1982-06-16", "forecast_end": "2008-12-28"})
    return cat_path, params, cfg


def test_evaluate_full_window_and_rerun(long_window, tmp_path, capsys):
    cat_path, params, cfg = long_window
    runs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert main(["--out-dir", str(out), "--quiet", "evaluate", str(params), str(cat_path),
                     "--eval-config", str(cfg)]) == 0
        runs.append(out)
    daily = _read_rows(runs[0] / "daily_forecasts.csv")
    assert len(daily) == 9693 + 1
    summary = _read_rows(runs[0] / "summary_N1.csv")
    assert summary[0][0] == "group" and [r[0] for r in summary[1:]] == ["low", "high"]
    assert int(summary[1][3]) == 9000
    names = sorted(p.name for p in runs[0].iterdir())
    assert names == sorted(p.name for p in runs[1].iterdir())
    assert {"manifest.json", "tables.txt", "sorted_N1.csv", "summary_N10.csv"} <= set(names)
    for name in names:
        assert (runs[0] / name).read_bytes() == (runs[1] / name).read_bytes()


def test_evaluate_single_horizon(long_window, tmp_path):
    cat_path, params, _ = long_window
    cfg = tmp_path / "eval.json"
    write_json(cfg, {"forecast_start": "1990-01-01", "forecast_end": "1990-12-31", "horizons": [1]})
    assert main(["--out-dir", str(tmp_path), "--quiet", "evaluate", str(params), str(cat_path),
                 "--eval-config", str(cfg)]) == 0
    assert sorted(p.name for p in tmp_path.glob("summary_*.csv")) == ["summary_N1.csv"]


def test_evaluate_without_history(tmp_path, two_state_params):
    path = _catalog_file(tmp_path, catalog_from_times([100.0, 101.0], dt.date(2000, 1, 1)))
    cfg = tmp_path / "eval.json"
    write_json(cfg, {"forecast_start": "2000-01-01", "forecast_end": "2000-02-01"})
    assert main(["--out-dir", str(tmp_path), "--quiet", "evaluate", str(two_state_params), str(path),
                 "--eval-config", str(cfg)]) == 3


def test_simulate_deterministic(tmp_path, two_state_params, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for out in (a, b):
        assert main(["--seed", "5", "simulate", str(two_state_params), "--n-events", "601",
                     "--out", str(out)]) == 0
    assert a.read_bytes() == b.read_bytes()
    rows = _read_rows(a)
    assert "true_state" in rows[0]
    cat = load_catalog(a)
    y = np.diff(cat.times)
    assert 1.4 < y.mean() < 21.1


def test_simulate_single_event(tmp_path, two_state_params):
    out = tmp_path / "one.csv"
    assert main(["--quiet", "simulate", str(two_state_params), "--n-events", "1", "--out", str(out)]) == 0
    assert len(_read_rows(out)) == 2


def test_regions_command(tmp_path, capsys):
    rng = np.random.default_rng(0)
    xy = rng.normal(size=(60, 2)) * [1.0, 0.3] + [-117.0, 34.0]
    path = tmp_path / "cat.csv"
    rows = [["date", "time", "magnitude", "latitude", "longitude"]]
    for i, (lon, lat) in enumerate(xy):
        day = dt.date(1990, 1, 1) + dt.timedelta(days=3 * i)
        rows.append([day.isoformat(), "00:00:00", "4.5", repr(float(lat)), repr(float(lon))])
    write_csv(path, rows)
    out = tmp_path / "partition.json"
    assert main(["--quiet", "regions", str(path), "--split", "east-west", "--out", str(out)]) == 0
    part = json.loads(out.read_text())
    assert part["mode"] == "quadrant-merge"
    assert abs(part["axis"][0]) > 0.9 and part["axis"][0] > 0
    assert math.isclose(part["center"][0], xy[:, 0].mean(), rel_tol=1e-12)


def test_evaluate_config_override(long_window, tmp_path):
    cat_path, params, cfg = long_window
    override = tmp_path / "override.json"
    write_json(override, {"forecast_start": "1990-01-01", "forecast_end": "1990-01-10", "horizons": [5]})
    out = tmp_path / "out"
    assert main(["--out-dir", str(out), "--quiet", "--config", str(override), "evaluate", str(params),
                 str(cat_path), "--eval-config", str(cfg)]) == 0
    assert len(_read_rows(out / "daily_forecasts.csv")) == 11
    assert sorted(p.name for p in out.glob("summary_*.csv")) == ["summary_N5.csv"]


def test_auto_region_mode_uses_region_column(tmp_path, capsys):
    from quakehmm.reference import EAST_WEST
    params = tmp_path / "ew.json"
    write_json(params, EAST_WEST.to_dict())
    cat, _ = simulate(SimConfig(EAST_WEST, 80, seed=2))
    path = _catalog_file(tmp_path, cat)
    assert main(["forecast", str(params), str(path), "--date", "1933-06-01", "--horizons", "1"]) == 0
    out = capsys.readouterr().out
    assert "N=1 region=1 P=" in out and "N=1 region=2 P=" in out
    plain = _catalog_file(tmp_path, catalog_from_times([0.0, 1.0, 2.0], dt.date(1932, 1, 1)), "plain.csv")
    assert main(["forecast", str(params), str(plain), "--date", "1932-01-05"]) == 2
