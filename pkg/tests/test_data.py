import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lstm_qcbm import data
from lstm_qcbm.data import GarchSpec, OhlcvBar, SplitSpec
from lstm_qcbm.errors import ConfigurationError, IngestionError


def bars_from_closes(closes, volume=10.0):
    out, prev = [], closes[0]
    for t, c in enumerate(closes):
        out.append(OhlcvBar(1000 + 60 * t, prev, max(prev, c) * 1.001, min(prev, c) * 0.999, c, volume + t))
        prev = c
    return out


def write_rows(path, rows):
    path.write_text("\n".join(["timestamp,open,high,low,close,volume", *rows]) + "\n")


def test_load_three_rows(tmp_path):
    p = tmp_path / "d.csv"
    write_rows(p, ["1,10,11,9,10.5,100", "2,10.5,12,10,11,50", "3,11,11.5,10.5,11,0"])
    bars = data.load_csv(p)
    assert [b.timestamp for b in bars] == [1, 2, 3]
    assert bars[1] == OhlcvBar(2, 10.5, 12.0, 10.0, 11.0, 50.0)


def test_load_rejects_low_above_high_with_row(tmp_path):
    p = tmp_path / "d.csv"
    write_rows(p, ["1,10,11,9,10.5,100", "2,10.5,10,12,11,50"])
    with pytest.raises(IngestionError) as err:
        data.load_csv(p)
    assert err.value.row == 3
    assert ":3:" in str(err.value)


@pytest.mark.parametrize(
    "rows",
    [
        ["1,10,11,9,10.5"],
        ["1,10,11,9,abc,1"],
        ["2,10,11,9,10.5,1", "1,10,11,9,10.5,1"],
        ["1,-10,11,9,10.5,1"],
        ["1,10,11,9,10.5,-1"],
    ],
)
def test_load_rejects_bad_rows(tmp_path, rows):
    p = tmp_path / "d.csv"
    write_rows(p, rows)
    with pytest.raises(IngestionError):
        data.load_csv(p)


def test_load_bad_header_and_missing_file(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("time,open,high,low,close,volume\n")
    with pytest.raises(IngestionError):
        data.load_csv(p)
    with pytest.raises(IngestionError):
        data.load_csv(tmp_path / "missing.csv")


def test_header_only_file(tmp_path):
    p = tmp_path / "d.csv"
    write_rows(p, [])
    bars = data.load_csv(p)
    assert bars == []
    assert data.build_windows(bars) == []


def test_csv_roundtrip(tmp_path):
    bars = data.synthesize_garch(GarchSpec(n_bars=50, seed=4))
    data.write_csv(tmp_path / "d.csv", bars)
    assert data.load_csv(tmp_path / "d.csv") == bars


def test_log_returns_examples():
    np.testing.assert_array_equal(data.log_returns(bars_from_closes([5.0] * 4)), 0)
    np.testing.assert_allclose(data.log_returns(bars_from_closes([100, 100 * math.e])), [1.0], rtol=1e-15)
    r = data.log_returns(bars_from_closes([100, 110, 99]))
    np.testing.assert_allclose(r, [0.09531018, -0.10536052], atol=1e-8)


def test_realized_volatility_examples():
    assert data.realized_volatility(np.full(7, 0.01), 1, 5) == 0
    c = 0.003
    alt = np.array([c, -c, c, -c, c])
    assert data.realized_volatility(alt, 0, 5) == pytest.approx(c * math.sqrt(24) / 5, rel=1e-12)
    r = np.random.default_rng(0).normal(size=9)
    assert data.realized_volatility(-3 * r, 2, 5) == pytest.approx(3 * data.realized_volatility(r, 2, 5))
    with pytest.raises(IndexError):
        data.realized_volatility(r, 6, 5)


@pytest.mark.parametrize("n_bars", [16, 17, 40, 200])
def test_window_count(n_bars):
    bars = data.synthesize_garch(GarchSpec(n_bars=n_bars, seed=1))
    windows = data.build_windows(bars, 10, 5)
    # brute force: anchors t with t-9 >= 0 and t+5 <= n_bars-2
    expected = sum(1 for t in range(n_bars - 1) if t - 9 >= 0 and t + 5 <= n_bars - 2)
    assert len(windows) == expected == max(n_bars - 1 - 10 - 5 + 1, 0)


def test_constant_closes_zero_targets():
    windows = data.build_windows(bars_from_closes([50.0] * 30), 10, 5)
    assert windows and all(w.target == 0 for w in windows)


def test_no_lookahead_brute_force():
    bars = data.synthesize_garch(GarchSpec(n_bars=120, seed=2))
    feats = ("log_return", "log_volume", "log_range", "close")
    windows = data.build_windows(bars, 10, 5, feats)
    rng = np.random.default_rng(0)
    for w in rng.choice(windows, size=15, replace=False):
        t = w.anchor
        for k in range(10):
            i = t - 9 + k  # return index; known once bar i+1 closes
            prev, cur = bars[i], bars[i + 1]
            assert i + 1 <= t + 1
            expected = [
                math.log(cur.close / prev.close),
                math.log1p(cur.volume),
                math.log(cur.high / cur.low),
                cur.close,
            ]
            np.testing.assert_allclose(w.features[k], expected, rtol=1e-12, atol=1e-14)
        future = [math.log(bars[j + 1].close / bars[j].close) for j in range(t + 1, t + 6)]
        assert w.target == pytest.approx(float(np.std(future)), rel=1e-12)


def test_unknown_feature():
    with pytest.raises(ConfigurationError):
        data.build_windows(bars_from_closes([1.0, 2.0, 3.0]), 1, 1, ["nope"])


def test_split_sizes_examples():
    assert [len(s) for s in data.chronological_split(list(range(100)), SplitSpec())] == [70, 20, 10]
    assert [len(s) for s in data.chronological_split(list(range(10)), SplitSpec())] == [7, 2, 1]


def test_split_purge_drops_boundary_windows():
    train, val, test = data.chronological_split(list(range(100)), SplitSpec(), purge=5)
    assert (train[-1], val[0], val[-1], test[0]) == (64, 70, 84, 90)


def test_split_rejects_empty_parts():
    with pytest.raises(ConfigurationError):
        data.chronological_split(list(range(3)), SplitSpec())
    with pytest.raises(ConfigurationError):
        SplitSpec(0.5, 0.2, 0.2)


@settings(max_examples=50, deadline=None)
@given(st.integers(10, 500), st.integers(0, 3))
def test_split_partition_and_order(n, purge):
    spec = SplitSpec()
    n_train, n_val, n_test = data.split_sizes(n, spec)
    if min(n_train - purge, n_val - purge, n_test) < 1:
        return
    train, val, test = data.chronological_split(list(range(n)), spec, purge)
    assert max(train) < min(val) <= max(val) < min(test)
    assert not (set(train) & set(val) or set(val) & set(test))
    if purge == 0:
        assert sorted(train + val + test) == list(range(n))


def make_windows(rng, n, offset=0.0):
    return [data.FeatureWindow(rng.normal(size=(4, 3)) * [1, 5, 0] + [0, 2, 7] + offset, 0.0, i) for i in range(n)]


def test_standardize_train_moments_and_constant_column():
    rng = np.random.default_rng(0)
    train, val, scaler = data.standardize(make_windows(rng, 40), make_windows(rng, 10))
    x = np.concatenate([w.features for w in train])
    np.testing.assert_allclose(x[:, :2].mean(axis=0), 0, atol=1e-9)
    np.testing.assert_allclose(x[:, :2].std(axis=0), 1, atol=1e-9)
    np.testing.assert_array_equal(x[:, 2], 0)
    assert len(val) == 10


def test_standardize_uses_train_statistics_only():
    rng = np.random.default_rng(1)
    train = make_windows(rng, 30)
    _, _, s1 = data.standardize(train, make_windows(rng, 10))
    _, _, s2 = data.standardize(train, make_windows(rng, 10, offset=100.0))
    np.testing.assert_array_equal(s1.mean, s2.mean)
    np.testing.assert_array_equal(s1.std, s2.std)


def test_stack_shapes():
    rng = np.random.default_rng(0)
    x, y = data.stack(make_windows(rng, 6))
    assert x.shape == (6, 4, 3) and y.shape == (6,)


def test_garch_constant_volatility():
    omega = 4e-6
    bars = data.synthesize_garch(GarchSpec(omega=omega, alpha_g=0.0, beta_g=0.0, n_bars=100_000, seed=3))
    r = np.diff(np.log([100.0] + [b.close for b in bars]))
    assert np.var(r) == pytest.approx(omega, rel=0.05)


def test_garch_unconditional_variance():
    spec = GarchSpec(n_bars=100_000, seed=5)
    eps, sigma = data.simulate_garch_returns(spec, np.random.default_rng(spec.seed))
    assert np.var(eps) == pytest.approx(spec.omega / (1 - spec.alpha_g - spec.beta_g), rel=0.10)


def test_garch_recursion():
    spec = GarchSpec(n_bars=50, seed=1)
    eps, sigma = data.simulate_garch_returns(spec, np.random.default_rng(0))
    for t in range(1, 50):
        assert sigma[t] ** 2 == pytest.approx(spec.omega + spec.alpha_g * eps[t - 1] ** 2 + spec.beta_g * sigma[t - 1] ** 2)


def test_garch_bars_valid_and_deterministic():
    spec = GarchSpec(n_bars=500, seed=8)
    bars = data.synthesize_garch(spec)
    assert bars == data.synthesize_garch(spec)
    assert all(b.violation() is None for b in bars)
    assert all(b.open == a.close for a, b in zip(bars, bars[1:]))
    assert bars[0].open == spec.base_price


def test_garch_rejects_nonstationary():
    with pytest.raises(ConfigurationError):
        GarchSpec(alpha_g=0.2, beta_g=0.8)


def test_garch_zero_bars_and_zero_omega():
    assert data.synthesize_garch(GarchSpec(n_bars=0)) == []
    flat = data.synthesize_garch(GarchSpec(omega=0.0, n_bars=10))
    assert all(b.close == 100.0 for b in flat)
