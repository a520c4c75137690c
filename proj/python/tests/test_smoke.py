import json

import numpy as np
import pytest

import gridcast as gc


def test_mape_and_depth():
    assert gc.mape([100.0, 200.0], [110.0, 180.0]) == pytest.approx(10.0)
    assert gc.tcn_num_layers(672, 2, 3) == 9
    assert gc.tcn_receptive_field(9, 3, 2) >= 672


def test_series_roundtrip(tmp_path):
    s = gc.synthetic("2020-01-01", "2020-01-15", seed=3)
    assert len(s) == 14 * 96
    assert s.start == "2020-01-01T00:00"
    path = tmp_path / "load.csv"
    gc.write_csv(str(path), s)
    back = gc.read_csv(str(path))
    np.testing.assert_allclose(back.values, s.values)
    cov = gc.covariates(s, ["2020-01-01"])
    assert cov.shape == (len(s), 10)
    assert cov[0, 9] == 1.0 and cov[96, 9] == 0.0


def test_csv_errors():
    with pytest.raises(ValueError):
        gc.parse_csv("timestamp,load_mw\nnot-a-time,3\n")


def test_fit_forecast_backtest_monitor(tmp_path):
    s = gc.synthetic("2020-01-01", "2020-03-01", seed=1)
    train, val, test = gc.split_by_dates(s, "2020-01-01", "2020-02-01", "2020-02-15", "2020-03-01")
    model = gc.Forecaster.build("nbeats", lookback=192, seed=2, overrides={"stacks": "2", "layer_width": "8"})
    stats = model.fit(train, val, max_epochs=2)
    assert stats["epochs"] >= 1
    fc = model.forecast_day(train)
    assert fc.shape == (96,)
    history = s.slice("2020-01-01", "2020-02-15")
    report = gc.backtest(model, history, test)
    assert len(report["dates"]) == 15
    assert report["overall_mape"] > 0
    result = gc.monitor(report, baseline_mape=report["overall_mape"], window_days=7, persistence_days=3)
    assert len(result["events"]) == 15 - 7 + 1
    assert result["decision"] in {"healthy", "watch", "retrain"}

    path = tmp_path / "model.json"
    model.save(str(path))
    again = gc.Forecaster.load(str(path))
    np.testing.assert_array_equal(again.forecast_day(train), fc)


def test_grid_and_cli(tmp_path):
    config = """seed = 4
[data]
synthetic = true
start = 2019-01-01
end = 2019-03-01
[split]
train_start = 2019-01-01
validation_start = 2019-02-01
test_start = 2019-02-15
end = 2019-03-01
[model]
families = psf, nbeats
flavors = 0
lookbacks = 192
nbeats.stacks = 2
nbeats.layer_width = 8
[training]
max_epochs = 2
[output]
record_wall_time = false
"""
    rows = gc.run_grid(config, out_dir=str(tmp_path / "out"))
    assert [r["model_id"] for r in rows] == [0, 1]
    assert {r["family"] for r in rows} == {"psf", "nbeats"}
    registry = (tmp_path / "out" / "registry.jsonl").read_text().splitlines()
    assert [json.loads(line)["model_id"] for line in registry] == [0, 1]

    code, out, _ = gc.cli(["report", "--registry", str(tmp_path / "out" / "registry.jsonl"), "--json"])
    assert code == 0
    assert len(json.loads(out)) == 2
    code, _, _ = gc.cli(["no-such-command"])
    assert code == 2
