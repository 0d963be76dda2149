"""OHLCV ingestion, realized-volatility targets, windowing and splitting.

Index conventions: ``returns[i] = ln(close[i+1] / close[i])``, so return
``i`` becomes known at bar ``i + 1``. A window anchored at return index
``t`` uses returns ``t-T+1 .. t`` (and the matching bars) as features and the
realized volatility of returns ``t+1 .. t+H`` as its target.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigurationError, DataError, IngestionError

CSV_HEADER = ["timestamp", "open", "high", "low", "close", "volume"]
DEFAULT_FEATURES = ("log_return", "log_volume")


@dataclass(frozen=True)
class OhlcvBar:
    timestamp: int
    open: float
    high: float
    low: float
    close: float
    volume: float

    def violation(self) -> str | None:
        if min(self.open, self.high, self.low, self.close) <= 0:
            return "prices must be positive"
        if self.volume < 0:
            return "volume must be non-negative"
        if not self.low <= min(self.open, self.close):
            return f"low {self.low} above min(open, close)"
        if not max(self.open, self.close) <= self.high:
            return f"high {self.high} below max(open, close)"
        return None


@dataclass
class FeatureWindow:
    features: np.ndarray  # (T, F)
    target: float
    anchor: int  # return index of the last feature step


@dataclass(frozen=True)
class SplitSpec:
    train_frac: float = 0.70
    val_frac: float = 0.20
    test_frac: float = 0.10

    def __post_init__(self):
        fracs = (self.train_frac, self.val_frac, self.test_frac)
        if min(fracs) < 0 or abs(sum(fracs) - 1.0) > 1e-9:
            raise ConfigurationError(f"split fractions must be non-negative and sum to 1, got {fracs}")


@dataclass(frozen=True)
class GarchSpec:
    omega: float = 1e-6
    alpha_g: float = 0.1
    beta_g: float = 0.85
    n_bars: int = 5000
    seed: int = 0
    base_price: float = 100.0
    start_timestamp: int = 1_700_000_000
    bar_seconds: int = 300

    def __post_init__(self):
        if self.omega < 0 or self.alpha_g < 0 or self.beta_g < 0:
            raise ConfigurationError("GARCH coefficients must be non-negative")
        if self.alpha_g + self.beta_g >= 1:
            raise ConfigurationError(
                f"alpha_g + beta_g = {self.alpha_g + self.beta_g} >= 1 is not covariance-stationary"
            )
        if self.n_bars < 0:
            raise ConfigurationError("n_bars must be non-negative")


# ---------------------------------------------------------------- CSV I/O


def load_csv(path) -> list[OhlcvBar]:
    path = Path(path)
    if not path.exists():
        raise IngestionError("file not found", path)
    bars: list[OhlcvBar] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise IngestionError("missing header row", path, 1)
        if [h.strip() for h in header] != CSV_HEADER:
            raise IngestionError(f"header must be {','.join(CSV_HEADER)}", path, 1)
        for row_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(CSV_HEADER):
                raise IngestionError(f"expected {len(CSV_HEADER)} fields, got {len(row)}", path, row_no)
            try:
                bar = OhlcvBar(int(row[0]), *(float(v) for v in row[1:]))
            except ValueError as exc:
                raise IngestionError(f"malformed value ({exc})", path, row_no) from None
            problem = bar.violation()
            if problem:
                raise IngestionError(problem, path, row_no)
            if bars and bar.timestamp <= bars[-1].timestamp:
                raise IngestionError(
                    f"timestamp {bar.timestamp} not after {bars[-1].timestamp}", path, row_no
                )
            bars.append(bar)
    return bars


def write_csv(path, bars: Sequence[OhlcvBar]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for b in bars:
            writer.writerow(
                [b.timestamp, repr(b.open), repr(b.high), repr(b.low), repr(b.close), repr(b.volume)]
            )


# ---------------------------------------------------------------- features


def log_returns(bars: Sequence[OhlcvBar]) -> np.ndarray:
    closes = np.array([b.close for b in bars], dtype=np.float64)
    if closes.size < 2:
        raise DataError("need at least two bars for a return")
    if np.any(closes <= 0):
        raise DataError("close prices must be positive")
    return np.diff(np.log(closes))


def realized_volatility(returns, start: int, horizon: int = 5) -> float:
    """Population standard deviation of ``returns[start:start+horizon]``."""
    if horizon < 1 or start < 0 or start + horizon > len(returns):
        raise IndexError(
            f"window [{start}, {start + horizon}) outside returns of length {len(returns)}"
        )
    return float(np.std(np.asarray(returns[start : start + horizon], dtype=np.float64)))


def _feature_columns(bars: Sequence[OhlcvBar], returns: np.ndarray, names) -> np.ndarray:
    """Per-return-step raw feature matrix, row ``i`` aligned with ``returns[i]``."""
    later = bars[1:]
    builders = {
        "log_return": lambda: returns,
        "abs_log_return": lambda: np.abs(returns),
        "log_volume": lambda: np.log1p([b.volume for b in later]),
        "log_range": lambda: np.log([b.high / b.low for b in later]),
        "open": lambda: np.array([b.open for b in later]),
        "high": lambda: np.array([b.high for b in later]),
        "low": lambda: np.array([b.low for b in later]),
        "close": lambda: np.array([b.close for b in later]),
    }
    unknown = [n for n in names if n not in builders]
    if unknown or not names:
        raise ConfigurationError(f"unknown feature(s) {unknown}; choose from {sorted(builders)}")
    return np.column_stack([np.asarray(builders[n](), dtype=np.float64) for n in names])


def build_windows(
    bars: Sequence[OhlcvBar],
    lookback: int = 10,
    horizon: int = 5,
    feature_spec: Sequence[str] = DEFAULT_FEATURES,
) -> list[FeatureWindow]:
    feature_spec = tuple(feature_spec)
    if len(bars) < 2:
        _feature_columns([], np.empty(0), feature_spec)  # still validate names
        return []
    returns = log_returns(bars)
    feats = _feature_columns(bars, returns, feature_spec)
    windows = []
    for t in range(lookback - 1, len(returns) - horizon):
        windows.append(
            FeatureWindow(
                features=feats[t - lookback + 1 : t + 1].copy(),
                target=realized_volatility(returns, t + 1, horizon),
                anchor=t,
            )
        )
    return windows


# ---------------------------------------------------------------- splitting


def split_sizes(n: int, spec: SplitSpec) -> tuple[int, int, int]:
    n_train = math.floor(spec.train_frac * n + 1e-9)
    n_val = math.floor(spec.val_frac * n + 1e-9)
    return n_train, n_val, n - n_train - n_val


def chronological_split(windows: Sequence, spec: SplitSpec = SplitSpec(), purge: int = 0):
    """Contiguous train / validation / test blocks in the original order.

    ``purge`` drops that many windows from the end of the train and
    validation blocks so no target horizon reaches into the next block; pass
    the forecast horizon to get leak-free splits.
    """
    n_train, n_val, n_test = split_sizes(len(windows), spec)
    if min(n_train - purge, n_val - purge, n_test) < 1:
        raise ConfigurationError(
            f"{len(windows)} windows give split sizes {(n_train, n_val, n_test)} "
            f"(purge {purge}); every split must be non-empty"
        )
    train = list(windows[: n_train - purge])
    val = list(windows[n_train : n_train + n_val - purge])
    test = list(windows[n_train + n_val :])
    return train, val, test


# ---------------------------------------------------------------- scaling


@dataclass
class Standardizer:
    mean: np.ndarray
    std: np.ndarray

    def transform(self, windows: Sequence[FeatureWindow]) -> list[FeatureWindow]:
        return [
            FeatureWindow((w.features - self.mean) / self.std, w.target, w.anchor) for w in windows
        ]


def fit_standardizer(train_windows: Sequence[FeatureWindow], std_floor: float = 1e-12) -> Standardizer:
    if not train_windows:
        raise ConfigurationError("cannot standardize with an empty training set")
    stacked = np.concatenate([w.features for w in train_windows], axis=0)
    return Standardizer(stacked.mean(axis=0), np.maximum(stacked.std(axis=0), std_floor))


def standardize(train_windows, *other_sets):
    """Z-score features with training statistics; returns ``(train, *others, scaler)``."""
    scaler = fit_standardizer(train_windows)
    return (scaler.transform(train_windows), *(scaler.transform(s) for s in other_sets), scaler)


def stack(windows: Sequence[FeatureWindow]) -> tuple[np.ndarray, np.ndarray]:
    """``(X, y)`` arrays of shapes ``(N, T, F)`` and ``(N,)``."""
    if not windows:
        return np.empty((0, 0, 0)), np.empty(0)
    return np.stack([w.features for w in windows]), np.array([w.target for w in windows])


# ---------------------------------------------------------------- synthetic data


def simulate_garch_returns(spec: GarchSpec, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """GARCH(1,1) innovations and conditional standard deviations."""
    n = spec.n_bars
    persistence = spec.alpha_g + spec.beta_g
    var = spec.omega / (1.0 - persistence)
    z = rng.standard_normal(n)
    eps = np.empty(n)
    sigma = np.empty(n)
    prev_eps2 = var
    for t in range(n):
        var = spec.omega + spec.alpha_g * prev_eps2 + spec.beta_g * var
        sigma[t] = math.sqrt(var)
        eps[t] = sigma[t] * z[t]
        prev_eps2 = eps[t] * eps[t]
    return eps, sigma


def synthesize_garch(spec: GarchSpec) -> list[OhlcvBar]:
    """Synthetic bars whose close-to-close log returns follow GARCH(1,1).

    Bar ``t`` opens at the previous close (the base price for ``t = 0``) and
    closes at ``base * exp(eps_0 + ... + eps_t)``. Highs and lows extend
    beyond the open/close by a random fraction of ``|eps_t|``. Volume is
    log-normal and shares the latent volatility with returns: its log rises
    with both ``sigma_t`` and ``|eps_t|``.
    """
    rng = np.random.default_rng(spec.seed)
    eps, sigma = simulate_garch_returns(spec, rng)
    n = spec.n_bars
    uncond_sd = math.sqrt(spec.omega / (1.0 - spec.alpha_g - spec.beta_g))
    # relative volatility level; 1 for the degenerate omega = 0 series
    level = sigma / uncond_sd if uncond_sd > 0 else np.ones(n)
    scaled_move = np.abs(eps) / uncond_sd if uncond_sd > 0 else np.zeros(n)
    up = rng.uniform(0.0, 0.5, n)
    down = rng.uniform(0.0, 0.5, n)
    noise = rng.standard_normal(n)
    closes = spec.base_price * np.exp(np.cumsum(eps))
    bars = []
    prev_close = spec.base_price
    for t in range(n):
        o, c = float(prev_close), float(closes[t])
        move = abs(eps[t])
        bars.append(
            OhlcvBar(
                timestamp=spec.start_timestamp + t * spec.bar_seconds,
                open=o,
                high=float(max(o, c) * math.exp(up[t] * move)),
                low=float(min(o, c) * math.exp(-down[t] * move)),
                close=c,
                volume=float(
                    1e6 * math.exp(math.log(level[t]) + 0.5 * scaled_move[t] + 0.25 * noise[t])
                ),
            )
        )
        prev_close = c
    return bars
