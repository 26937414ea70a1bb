import json
import math

import numpy as np
import pytest

import selectrade as st


def test_version():
    assert st.__version__.count(".") == 2


def test_bound_closed_form():
    assert abs(st.bstar(0.0, 0.001, 1000) - (1 - 0.001 ** (1 / 1000))) < 1e-6
    assert st.binomial_tail(4, 2, 0.5) == pytest.approx(11 / 16)


def test_sgr_accepts_confident_rows():
    rng = np.random.default_rng(0)
    kappa = rng.uniform(0.5, 1.0, 2000)
    truth = rng.choice([-1, 1], 2000)
    right = rng.uniform(size=2000) < kappa
    predicted = np.where(right, truth, -truth)
    r = st.sgr(kappa, predicted, truth, target_risk=0.2)
    acc = r["accepted"]
    assert acc.dtype == bool and acc.shape == (2000,)
    assert np.all(kappa[acc] >= r["theta"])
    assert r["coverage"] == pytest.approx(acc.mean())
    assert r["bound"] >= r["risk"]


def test_mcc():
    assert st.mcc([[5, 0], [0, 7]]) == 1.0
    assert abs(st.mcc([[2, 1], [1, 2]]) - 1 / 3) < 1e-12


def test_simulate_slippage_is_linear():
    rng = np.random.default_rng(1)
    closes = 4000 + 0.25 * np.cumsum(rng.integers(-4, 5, 1000))
    pos = np.repeat(rng.integers(-5, 6, 100), 10)
    base = st.simulate(pos, closes, 0.25, 50.0, 0.0)
    cost = st.simulate(pos, closes, 0.25, 50.0, 0.3)
    assert cost["total_pnl"] - base["total_pnl"] == -0.3 * 0.25 * 50.0 * base["contracts_traded"]
    assert np.array_equal(np.cumsum(base["pnl"]), base["equity"])


def test_errors_become_value_errors():
    with pytest.raises(ValueError, match="off_tick_grid"):
        st.simulate([1, 0], [100.0, 100.1], 0.25, 50.0)
    assert st.sharpe([0.0, 0.0]) is None
    assert math.isclose(st.sharpe([1.0, 2.0, 3.0]), 2 / math.sqrt(2 / 3) * math.sqrt(12096))


def test_tiny_pipeline(tmp_path):
    config = {
        "seed": 4,
        "instruments": [
            {
                "symbol": "AAA",
                "tick_size": 0.25,
                "point_value": 50.0,
                "source": {
                    "type": "synthetic",
                    "start_date": "2016-01-01",
                    "end_date": "2016-01-31",
                    "signal_strength": 0.6,
                    "mean_trades_per_bar": 20,
                },
            }
        ],
        "labels": {"vol_window": 48},
        "walk_forward": {"initial_train": 500, "validation": 200, "test": 250, "max_folds": 1},
        "backtest": {"sizing_window": 24},
        "features": {"minmax_window": 48, "sma_windows": [6, 24, 48], "vap_long_window": 96, "vap_short_window": 6},
    }
    path = tmp_path / "c.json"
    path.write_text(json.dumps(config))
    summary = st.run_experiment(str(path), out=str(tmp_path / "run"))
    text = open(summary).read()
    assert "Sharpe ratio by slippage" in text
    assert (tmp_path / "run" / "manifest.json").exists()
