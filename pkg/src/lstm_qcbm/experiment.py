"""Run configuration, dataset preparation and on-disk run artifacts.

A run directory holds everything needed to reproduce and inspect one
training run::

    config.json            resolved configuration
    dataset_manifest.json  data source, windowing, split sizes, scaler
    history.csv            per-epoch losses and circuit diagnostics
    coverage.csv           top-k probability mass, epochs 0..E (hybrid)
    snapshots.csv          Born probabilities at epoch 0 and E (hybrid)
    model.bin/.json        final classical weights
    qcbm.bin(.txt)         final circuit angles (hybrid)
    best/                  best-validation checkpoint
"""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import checkpoint, data, hybrid, qcbm
from .errors import ConfigurationError
from .figures import bar_chart, line_chart
from .metrics import MetricsRecord, format_report

log = logging.getLogger(__name__)

# Per-component entropy words mixed with the global seed, see ``sub_seed``.
SEED_COMPONENTS = {"data": 0x44415441, "init": 0x494E4954, "qcbm": 0x5143424D, "train": 0x5452414E}


def sub_seed(seed: int, component: str) -> int:
    """Derive a component seed: ``SeedSequence([seed, word])`` -> one uint32."""
    ss = np.random.SeedSequence([seed, SEED_COMPONENTS[component]])
    return int(ss.generate_state(1)[0])


@dataclass
class DataConfig:
    csv: str | None = None
    omega: float = 1e-6
    alpha_g: float = 0.1
    beta_g: float = 0.85
    n_bars: int = 5000
    garch_seed: int | None = None  # None -> derived from the run seed
    features: list[str] = field(default_factory=lambda: list(data.DEFAULT_FEATURES))
    lookback: int = 10
    horizon: int = 5
    split: list[float] = field(default_factory=lambda: [0.70, 0.20, 0.10])


@dataclass
class ModelConfig:
    hidden_dim: int = 32
    num_layers: int = 2
    alpha: float = 0.5


@dataclass
class QcbmSection:
    n_qubits: int = 12
    n_layers: int = 3
    shots: int = 256
    tau: float = 1.0
    init_scale: float = 0.1


@dataclass
class TrainingConfig:
    epochs: int = 300
    batch_size: int = 64
    lr: float = 1e-3
    cobyla_evals: int = 50
    prior_mode: str = "per-batch"
    max_norm: float | None = None


@dataclass
class RunConfig:
    data: DataConfig = field(default_factory=DataConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    qcbm: QcbmSection = field(default_factory=QcbmSection)
    training: TrainingConfig = field(default_factory=TrainingConfig)
    seed: int = 0
    out: str = "runs/default"

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"

    def garch_spec(self) -> data.GarchSpec:
        d = self.data
        seed = d.garch_seed if d.garch_seed is not None else sub_seed(self.seed, "data")
        return data.GarchSpec(omega=d.omega, alpha_g=d.alpha_g, beta_g=d.beta_g, n_bars=d.n_bars, seed=seed)


def _build(cls, values: dict, where: str):
    if not isinstance(values, dict):
        raise ConfigurationError(f"{where}: expected an object")
    known = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(values) - set(known))
    if unknown:
        raise ConfigurationError(f"{where}: unknown key(s) {unknown}")
    kwargs = {}
    for name, value in values.items():
        sub = {"data": DataConfig, "model": ModelConfig, "qcbm": QcbmSection, "training": TrainingConfig}
        if cls is RunConfig and name in sub:
            kwargs[name] = _build(sub[name], value, f"{where}.{name}")
        else:
            kwargs[name] = value
    return cls(**kwargs)


def config_from_dict(values: dict) -> RunConfig:
    cfg = _build(RunConfig, values, "config")
    validate(cfg)
    return cfg


def load_config(path=None, **overrides) -> RunConfig:
    """Read a JSON config (every key optional) and apply non-None overrides."""
    values = {}
    if path is not None:
        try:
            values = json.loads(Path(path).read_text())
        except FileNotFoundError:
            raise ConfigurationError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"{path}: invalid JSON ({exc})") from None
    cfg = _build(RunConfig, values, "config")
    for key, value in overrides.items():
        if value is not None:
            setattr(cfg, key, value)
    validate(cfg)
    return cfg


def validate(cfg: RunConfig) -> None:
    if len(cfg.data.split) != 3:
        raise ConfigurationError("data.split needs three fractions")
    data.SplitSpec(*cfg.data.split)
    if cfg.data.csv is None:
        cfg.garch_spec()
    if cfg.data.lookback < 1 or cfg.data.horizon < 1:
        raise ConfigurationError("lookback and horizon must be >= 1")
    qcbm.QcbmConfig(cfg.qcbm.n_qubits, cfg.qcbm.n_layers)
    if cfg.qcbm.shots < 1 or cfg.qcbm.tau <= 0:
        raise ConfigurationError("qcbm.shots must be >= 1 and qcbm.tau > 0")
    t = cfg.training
    if t.epochs < 0 or t.batch_size < 1 or t.lr <= 0 or t.cobyla_evals < 1:
        raise ConfigurationError("invalid training section")
    if t.prior_mode not in ("per-batch", "per-sample"):
        raise ConfigurationError(f"training.prior_mode must be per-batch or per-sample, got {t.prior_mode!r}")
    if cfg.model.hidden_dim < 1 or cfg.model.num_layers < 1:
        raise ConfigurationError("invalid model section")


# ---------------------------------------------------------------- dataset


@dataclass
class Dataset:
    train: tuple[np.ndarray, np.ndarray]
    val: tuple[np.ndarray, np.ndarray]
    test: tuple[np.ndarray, np.ndarray]
    manifest: dict


def load_bars(cfg: RunConfig) -> tuple[list[data.OhlcvBar], dict]:
    if cfg.data.csv is not None:
        return data.load_csv(cfg.data.csv), {"csv": str(cfg.data.csv)}
    spec = cfg.garch_spec()
    return data.synthesize_garch(spec), {"garch": asdict(spec)}


def prepare_dataset(cfg: RunConfig) -> Dataset:
    bars, source = load_bars(cfg)
    d = cfg.data
    windows = data.build_windows(bars, d.lookback, d.horizon, d.features)
    train, val, test = data.chronological_split(windows, data.SplitSpec(*d.split), purge=d.horizon)
    train, val, test, scaler = data.standardize(train, val, test)
    manifest = {
        "source": source,
        "n_bars": len(bars),
        "feature_spec": list(d.features),
        "lookback": d.lookback,
        "horizon": d.horizon,
        "split_fractions": list(d.split),
        "n_windows": len(windows),
        "split_sizes": {"train": len(train), "val": len(val), "test": len(test)},
        "purged_per_boundary": d.horizon,
        "feature_mean": [float(v) for v in scaler.mean],
        "feature_std": [float(v) for v in scaler.std],
    }
    return Dataset(data.stack(train), data.stack(val), data.stack(test), manifest)


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def synth(cfg: RunConfig, out_dir) -> Path:
    """Write the synthetic OHLCV series and its manifest; returns the CSV path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    spec = cfg.garch_spec()
    bars = data.synthesize_garch(spec)
    csv_path = out / "data.csv"
    data.write_csv(csv_path, bars)
    write_json(out / "dataset_manifest.json", {"garch": asdict(spec), "n_bars": len(bars), "csv": "data.csv"})
    return csv_path


# ---------------------------------------------------------------- training


HISTORY_COLUMNS = ["epoch", "train_mse", "val_rmse", "kl_before", "kl_after", "topk_coverage"]


def _fmt(v: float) -> str:
    return "" if v != v else repr(float(v))  # NaN -> empty cell


def write_history(path, history: list[hybrid.EpochRecord]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HISTORY_COLUMNS)
        for r in history:
            w.writerow([r.epoch, _fmt(r.train_mse), _fmt(r.val_rmse), _fmt(r.kl_before), _fmt(r.kl_after), _fmt(r.topk_coverage)])


def write_coverage(path, coverage: list[float]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "topk_coverage"])
        for epoch, c in enumerate(coverage):
            w.writerow([epoch, repr(float(c))])


def write_snapshots(path, snapshots: dict[int, np.ndarray]) -> None:
    epochs = sorted(snapshots)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["bitstring_index"] + [f"epoch_{e}" for e in epochs])
        for i in range(len(snapshots[epochs[0]])):
            w.writerow([i] + [repr(float(snapshots[e][i])) for e in epochs])


@dataclass
class RunArtifacts:
    out_dir: Path
    result: hybrid.TrainResult
    qcbm_config: qcbm.QcbmConfig | None
    dataset: Dataset


def train(cfg: RunConfig, mode: str, out_dir=None, dataset: Dataset | None = None) -> RunArtifacts:
    """Train a baseline or hybrid model and write the run directory."""
    if mode not in ("baseline", "hybrid"):
        raise ConfigurationError(f"mode must be baseline or hybrid, got {mode!r}")
    out = Path(out_dir if out_dir is not None else cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    ds = dataset if dataset is not None else prepare_dataset(cfg)
    x_train, y_train = ds.train
    n_features = x_train.shape[2]

    alpha = 0.0 if mode == "baseline" else cfg.model.alpha
    model = hybrid.init_model(
        np.random.default_rng(sub_seed(cfg.seed, "init")),
        n_features,
        cfg.qcbm.n_qubits,
        cfg.model.hidden_dim,
        cfg.model.num_layers,
        alpha=alpha,
        train_targets=y_train,
    )
    qcfg = qparams = None
    if mode == "hybrid":
        qcfg = qcbm.QcbmConfig(cfg.qcbm.n_qubits, cfg.qcbm.n_layers)
        qparams = qcbm.init_params(qcfg, np.random.default_rng(sub_seed(cfg.seed, "qcbm")), cfg.qcbm.init_scale)

    t = cfg.training
    result = hybrid.alternating_train(
        model,
        qcfg,
        qparams,
        ds.train,
        ds.val,
        epochs=t.epochs,
        qcbm_shots=cfg.qcbm.shots,
        tau=cfg.qcbm.tau,
        seed=sub_seed(cfg.seed, "train"),
        lr=t.lr,
        batch_size=t.batch_size,
        cobyla_evals=t.cobyla_evals,
        prior_mode=t.prior_mode,
        max_norm=t.max_norm,
    )

    resolved = asdict(cfg)
    resolved["mode"] = mode
    write_json(out / "config.json", resolved)
    write_json(out / "dataset_manifest.json", ds.manifest)
    write_history(out / "history.csv", result.history)
    checkpoint.save_model(result.model, out / "model")
    best = out / "best"
    best.mkdir(exist_ok=True)
    checkpoint.save_model(result.best_model, best / "model")
    write_json(best / "epoch.json", {"best_epoch": result.best_epoch})
    if qcfg is not None:
        write_coverage(out / "coverage.csv", result.coverage)
        write_snapshots(out / "snapshots.csv", result.snapshots)
        qcbm.save_params(out / "qcbm.bin", qcfg, result.qcbm_params)
        qcbm.save_params(best / "qcbm.bin", qcfg, result.best_qcbm_params)
    return RunArtifacts(out, result, qcfg, ds)


# ---------------------------------------------------------------- evaluation


def run_config_of(run_dir) -> tuple[RunConfig, str]:
    path = Path(run_dir) / "config.json"
    if not path.exists():
        raise FileNotFoundError(f"checkpoint config not found: {path}")
    values = json.loads(path.read_text())
    mode = values.pop("mode", "hybrid")
    return config_from_dict(values), mode


def load_run(run_dir):
    """``(model, qcbm_config_or_None, qcbm_params_or_None)`` from a run/checkpoint dir."""
    run_dir = Path(run_dir)
    if not run_dir.is_dir():
        raise FileNotFoundError(f"checkpoint directory not found: {run_dir}")
    model = checkpoint.load_model(run_dir / "model")
    qpath = run_dir / "qcbm.bin"
    if qpath.exists():
        qcfg, qparams = qcbm.load_params(qpath)
        return model, qcfg, qparams
    return model, None, None


def evaluate(cfg: RunConfig, run_dir, dataset: Dataset | None = None) -> MetricsRecord:
    model, qcfg, qparams = load_run(run_dir)
    ds = dataset if dataset is not None else prepare_dataset(cfg)
    return hybrid.evaluate(model, qcfg, qparams, *ds.test)


def write_report(records: dict[str, MetricsRecord], out_dir, dataset_name: str) -> tuple[str, str]:
    text, csv_text = format_report(records, dataset_name)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.txt").write_text(text)
    (out / "report.csv").write_text(csv_text)
    return text, csv_text


def dataset_label(cfg: RunConfig) -> str:
    return Path(cfg.data.csv).stem if cfg.data.csv else "garch"


# ---------------------------------------------------------------- figures


def read_csv_columns(path) -> dict[str, list[str]]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"input not found: {path}")
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ConfigurationError(f"{path}: empty CSV")
    header, body = rows[0], rows[1:]
    return {name: [r[i] for r in body] for i, name in enumerate(header)}


def _floats(cells: list[str]) -> np.ndarray:
    return np.array([float(c) if c != "" else np.nan for c in cells])


def run_label(run_dir) -> str:
    """``LSTM`` / ``LSTM-QCBM`` from the run's mode; ``best/`` dirs use their parent's."""
    cfg_path = Path(run_dir) / "config.json"
    if not cfg_path.exists():
        cfg_path = Path(run_dir).parent / "config.json"
    mode = json.loads(cfg_path.read_text()).get("mode") if cfg_path.exists() else None
    return {"baseline": "LSTM", "hybrid": "LSTM-QCBM"}.get(mode, Path(run_dir).name)


def _unique_labels(run_dirs) -> list[str]:
    labels = [run_label(d) for d in run_dirs]
    if len(set(labels)) < len(labels):
        labels = [f"{l} ({Path(d).name})" for l, d in zip(labels, run_dirs)]
    return labels


def _write_table(path, header: list[str], columns: list) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in zip(*columns):
            w.writerow([c if isinstance(c, (int, str)) else _fmt(c) for c in row])


def report(run_dirs, out_dir, topk: int = hybrid.TOPK) -> list[Path]:
    """Figure data (CSV) and charts (SVG) from one or more run directories.

    * ``rmse_curves``: validation RMSE per epoch, one column per run.
    * ``topk_coverage``: top-k Born mass per epoch for runs with a circuit.
    * ``born_histogram``: epoch-0 and final Born probabilities of the first
      run with a circuit.
    """
    run_dirs = [Path(d) for d in run_dirs]
    if not run_dirs:
        raise ConfigurationError("report needs at least one run directory")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    labels = _unique_labels(run_dirs)
    written = []

    histories = {l: read_csv_columns(d / "history.csv") for l, d in zip(labels, run_dirs)}
    n_epochs = max(len(h["epoch"]) for h in histories.values())
    epochs = list(range(1, n_epochs + 1))
    curves = {}
    for label, h in histories.items():
        y = np.full(n_epochs, np.nan)
        v = _floats(h["val_rmse"])
        y[: v.size] = v
        curves[label] = y
    _write_table(out / "rmse_curves.csv", ["epoch", *curves], [epochs, *curves.values()])
    (out / "rmse_curves.svg").write_text(
        line_chart({l: (epochs, y) for l, y in curves.items()}, "Validation RMSE", "epoch", "RMSE")
    )
    written += [out / "rmse_curves.csv", out / "rmse_curves.svg"]

    quantum = [(l, d) for l, d in zip(labels, run_dirs) if (d / "coverage.csv").exists()]
    if quantum:
        cov = {l: _floats(read_csv_columns(d / "coverage.csv")["topk_coverage"]) for l, d in quantum}
        n_cov = max(c.size for c in cov.values())
        padded = {l: np.concatenate([c, np.full(n_cov - c.size, np.nan)]) for l, c in cov.items()}
        ep = list(range(n_cov))
        _write_table(out / "topk_coverage.csv", ["epoch", *padded], [ep, *padded.values()])
        (out / "topk_coverage.svg").write_text(
            line_chart({l: (ep, c) for l, c in padded.items()}, f"Top-{topk} probability mass", "epoch", "mass")
        )
        written += [out / "topk_coverage.csv", out / "topk_coverage.svg"]

        label, d = quantum[0]
        snap = read_csv_columns(d / "snapshots.csv")
        cols = [c for c in snap if c != "bitstring_index"]
        index = [int(v) for v in snap["bitstring_index"]]
        groups = {c: _floats(snap[c]) for c in cols}
        _write_table(out / "born_histogram.csv", ["bitstring_index", *cols], [index, *groups.values()])
        (out / "born_histogram.svg").write_text(
            bar_chart(index, groups, f"Born probabilities ({label})", "bitstring index", "probability")
        )
        written += [out / "born_histogram.csv", out / "born_histogram.svg"]
    return written
